#include "fusenas/ir/interpreter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fusenas/ir/shape_inference.hpp"

namespace fusenas::ir {

namespace {

template <typename Op>
void binary_broadcast(const Tensor& a, const Tensor& b, Tensor& out, Op op) {
  // Row broadcast only: an operand with fewer elements repeats every
  // numel(operand) output elements.
  const std::size_t n = out.data.size();
  const std::size_t na = a.data.size();
  const std::size_t nb = b.data.size();
  const float* pa = a.data.data();
  const float* pb = b.data.data();
  float* po = out.data.data();
  if (na == n && nb == n) {
    for (std::size_t i = 0; i < n; ++i) po[i] = op(pa[i], pb[i]);
    return;
  }
  // The shorter operand is one row; the longer one spans the output.
  const std::size_t w = std::min(na, nb);
  for (std::size_t base = 0; base < n; base += w) {
    const float* ra = na == n ? pa + base : pa;
    const float* rb = nb == n ? pb + base : pb;
    for (std::size_t j = 0; j < w; ++j) po[base + j] = op(ra[j], rb[j]);
  }
}

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  const auto m = a.shape.dim(0), k = a.shape.dim(1), n = b.shape.dim(1);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < m; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = a.data[static_cast<std::size_t>(i * k + p)];
      const float* brow = &b.data[static_cast<std::size_t>(p * n)];
      for (std::int64_t j = 0; j < n; ++j) row[j] += av * static_cast<double>(brow[j]);
    }
    for (std::int64_t j = 0; j < n; ++j) {
      out.data[static_cast<std::size_t>(i * n + j)] = static_cast<float>(row[j]);
    }
  }
}

void transpose(const Node& node, const Tensor& in, Tensor& out) {
  const std::size_t rank = in.shape.rank();
  std::vector<std::int64_t> perm = node.attrs.perm;
  if (perm.empty()) {
    perm.resize(rank);
    std::iota(perm.rbegin(), perm.rend(), 0);
  }
  std::vector<std::int64_t> idx(rank, 0);
  const std::int64_t total = out.numel();
  for (std::int64_t flat = 0; flat < total; ++flat) {
    std::int64_t rem = flat, src = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      const std::int64_t stride = out.shape.stride(d);
      idx[d] = rem / stride;
      rem %= stride;
    }
    for (std::size_t d = 0; d < rank; ++d) {
      src += idx[d] * in.shape.stride(static_cast<std::size_t>(perm[d]));
    }
    out.data[static_cast<std::size_t>(flat)] = in.data[static_cast<std::size_t>(src)];
  }
}

void softmax(const Tensor& in, Tensor& out) {
  const std::int64_t cols = in.shape.dim(in.shape.rank() - 1);
  const std::int64_t rows = in.numel() / cols;
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* x = &in.data[static_cast<std::size_t>(r * cols)];
    float* y = &out.data[static_cast<std::size_t>(r * cols)];
    const float mx = *std::max_element(x, x + cols);
    double sum = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) sum += std::exp(static_cast<double>(x[c] - mx));
    for (std::int64_t c = 0; c < cols; ++c) {
      y[c] = static_cast<float>(std::exp(static_cast<double>(x[c] - mx)) / sum);
    }
  }
}

void layernorm(const Tensor& in, Tensor& out) {
  constexpr double kEps = 1e-5;
  const std::int64_t cols = in.shape.dim(in.shape.rank() - 1);
  const std::int64_t rows = in.numel() / cols;
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* x = &in.data[static_cast<std::size_t>(r * cols)];
    float* y = &out.data[static_cast<std::size_t>(r * cols)];
    double mean = 0.0, var = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) mean += x[c];
    mean /= static_cast<double>(cols);
    for (std::int64_t c = 0; c < cols; ++c) var += (x[c] - mean) * (x[c] - mean);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (std::int64_t c = 0; c < cols; ++c) y[c] = static_cast<float>((x[c] - mean) * inv);
  }
}

}  // namespace

void eval_primitive(const Node& node, std::span<const Tensor* const> ops, Tensor& out) {
  switch (node.kind) {
    case OpKind::Add:
      binary_broadcast(*ops[0], *ops[1], out, [](float a, float b) { return a + b; });
      return;
    case OpKind::Mul:
      binary_broadcast(*ops[0], *ops[1], out, [](float a, float b) { return a * b; });
      return;
    case OpKind::MatMul:
      matmul(*ops[0], *ops[1], out);
      return;
    case OpKind::Transpose:
      transpose(node, *ops[0], out);
      return;
    case OpKind::Reshape:
      out.data = ops[0]->data;
      return;
    case OpKind::Gelu: {
      const auto& x = ops[0]->data;
      for (std::size_t i = 0; i < x.size(); ++i) {
        out.data[i] = 0.5f * x[i] * (1.0f + std::erf(x[i] * 0.70710678118654752f));
      }
      return;
    }
    case OpKind::Softmax:
      softmax(*ops[0], out);
      return;
    case OpKind::LayerNorm:
      layernorm(*ops[0], out);
      return;
    case OpKind::Const:
      out.data = node.attrs.data;
      return;
    case OpKind::Input:
    case OpKind::Fused:
      break;
  }
  throw Error(ErrorCode::Internal, "eval_primitive cannot evaluate this kind", node.id);
}

void check_bindings(const TensorGraph& g, const Bindings& bindings) {
  for (auto id : g.input_ids()) {
    auto it = bindings.find(id);
    if (it == bindings.end()) throw Error(ErrorCode::MissingBinding, "input is unbound", id);
    const TensorShape expected(g.node(id).attrs.shape);
    if (it->second.shape != expected ||
        static_cast<std::int64_t>(it->second.data.size()) != expected.numel()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "binding shape " + it->second.shape.to_string() + " does not match " +
                      expected.to_string(),
                  id);
    }
  }
}

TensorMap execute_with(const TensorGraph& graph, const Bindings& bindings,
                       const FusedKernel& fused,
                       std::optional<std::span<const NodeId>> order) {
  const TensorGraph g = graph.shapes_inferred() ? graph : infer_shapes(graph);
  check_bindings(g, bindings);
  std::vector<NodeId> owned;
  std::span<const NodeId> seq;
  if (order) {
    if (!g.is_topological(*order)) {
      throw Error(ErrorCode::InvalidArgument, "execution order is not topological");
    }
    seq = *order;
  } else {
    owned = g.topo_order();
    seq = owned;
  }

  std::map<NodeId, Tensor> values;
  for (auto id : seq) {
    const Node& n = g.node(id);
    if (n.kind == OpKind::Input) {
      values.emplace(id, bindings.at(id));
      continue;
    }
    std::vector<const Tensor*> ops;
    for (auto in : n.inputs) ops.push_back(&values.at(in));
    if (n.kind == OpKind::Fused) {
      if (!fused) throw Error(ErrorCode::Execution, "no kernel for fused node", id);
      Tensor t = fused(n, ops);
      if (t.shape != n.shape) {
        throw Error(ErrorCode::Internal, "fused kernel produced the wrong shape", id);
      }
      values.emplace(id, std::move(t));
      continue;
    }
    Tensor out(n.shape);
    eval_primitive(n, ops, out);
    values.emplace(id, std::move(out));
  }
  TensorMap result;
  for (auto out : g.outputs()) result.emplace(out, values.at(out));
  return result;
}

TensorMap reference_execute(const TensorGraph& g, const Bindings& bindings,
                            std::optional<std::span<const NodeId>> order) {
  return execute_with(g, bindings, FusedKernel{}, order);
}

Bindings random_bindings(const TensorGraph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bindings b;
  for (auto id : g.input_ids()) {
    b.emplace(id, random_tensor(TensorShape(g.node(id).attrs.shape), rng));
  }
  return b;
}

}  // namespace fusenas::ir
