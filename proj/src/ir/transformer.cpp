#include "fusenas/ir/transformer.hpp"

#include <cmath>

#include "fusenas/ir/shape_inference.hpp"

namespace fusenas::ir {

bool ArchSample::is_valid() const {
  return num_layers >= 1 && hidden_size >= 1 && num_heads >= 1 &&
         hidden_size % num_heads == 0 && ffn_size >= hidden_size;
}

void ArchSample::validate() const {
  if (!is_valid()) {
    throw Error(ErrorCode::InvalidArgument, "invalid architecture " + to_string() +
                                                " (need L>=1, H divisible by A, F>=H)");
  }
}

std::string ArchSample::to_string() const {
  return "L=" + std::to_string(num_layers) + " H=" + std::to_string(hidden_size) +
         " F=" + std::to_string(ffn_size) + " A=" + std::to_string(num_heads);
}

TensorGraph build_transformer_graph(const ArchSample& arch, std::int64_t seq_len) {
  arch.validate();
  if (seq_len < 1) throw Error(ErrorCode::InvalidArgument, "seq_len must be >= 1");
  const std::int64_t s = seq_len, h = arch.hidden_size, f = arch.ffn_size;
  const float scale =
      1.0f / std::sqrt(static_cast<float>(arch.hidden_size / arch.num_heads));

  TensorGraph g;
  NodeId x = g.add_input({s, h});
  for (int layer = 0; layer < arch.num_layers; ++layer) {
    const NodeId wq = g.add_input({h, h});
    const NodeId wk = g.add_input({h, h});
    const NodeId wv = g.add_input({h, h});
    const NodeId wo = g.add_input({h, h});
    const NodeId w1 = g.add_input({h, f});
    const NodeId w2 = g.add_input({f, h});
    const NodeId sc = g.add_const({1, s}, std::vector<float>(static_cast<std::size_t>(s), scale));

    const NodeId q = g.add(OpKind::MatMul, {x, wq});
    const NodeId k = g.add(OpKind::MatMul, {x, wk});
    const NodeId v = g.add(OpKind::MatMul, {x, wv});
    const NodeId kt = g.add(OpKind::Transpose, {k});
    const NodeId scores = g.add(OpKind::MatMul, {q, kt});
    const NodeId scaled = g.add(OpKind::Mul, {scores, sc});
    const NodeId probs = g.add(OpKind::Softmax, {scaled});
    const NodeId ctx = g.add(OpKind::MatMul, {probs, v});
    const NodeId attn = g.add(OpKind::MatMul, {ctx, wo});
    const NodeId res1 = g.add(OpKind::Add, {attn, x});
    const NodeId norm1 = g.add(OpKind::LayerNorm, {res1});
    const NodeId up = g.add(OpKind::MatMul, {norm1, w1});
    const NodeId act = g.add(OpKind::Gelu, {up});
    const NodeId down = g.add(OpKind::MatMul, {act, w2});
    const NodeId res2 = g.add(OpKind::Add, {down, norm1});
    x = g.add(OpKind::LayerNorm, {res2});
  }
  g.set_outputs({x});
  return infer_shapes(g);
}

std::int64_t flops_estimate(const ArchSample& arch, std::int64_t seq_len) {
  arch.validate();
  const std::int64_t s = seq_len, h = arch.hidden_size, f = arch.ffn_size;
  const std::int64_t projections = 4 * matmul_flops(s, h, h);
  const std::int64_t attention = matmul_flops(s, h, s) + matmul_flops(s, s, h);
  const std::int64_t ffn = matmul_flops(s, h, f) + matmul_flops(s, f, h);
  // scale + softmax over scores, two residual adds, two layernorms, gelu.
  const std::int64_t elementwise = 2 * s * s + 4 * s * h + s * f;
  return arch.num_layers * (projections + attention + ffn + elementwise);
}

std::int64_t parameter_count(const ArchSample& arch) {
  const std::int64_t h = arch.hidden_size, f = arch.ffn_size;
  return arch.num_layers * (4 * h * h + 2 * h * f);
}

}  // namespace fusenas::ir
