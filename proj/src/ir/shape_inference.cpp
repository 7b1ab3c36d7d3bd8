#include "fusenas/ir/shape_inference.hpp"

#include <algorithm>
#include <numeric>

namespace fusenas::ir {

namespace {
[[noreturn]] void mismatch(const Node& n, const std::vector<TensorShape>& ops,
                           const std::string& why) {
  std::string msg = std::string(op_name(n.kind)) + " operands";
  for (const auto& s : ops) msg += " " + s.to_string();
  throw Error(ErrorCode::ShapeMismatch, msg + ": " + why, n.id);
}

std::vector<std::int64_t> transpose_perm(const Node& n, std::size_t rank) {
  std::vector<std::int64_t> perm = n.attrs.perm;
  if (perm.empty()) {
    perm.resize(rank);
    std::iota(perm.rbegin(), perm.rend(), 0);
  }
  return perm;
}
}  // namespace

TensorShape infer_node_shape(const Node& n, const std::vector<TensorShape>& ops) {
  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Const:
      return TensorShape(n.attrs.shape);
    case OpKind::Add:
    case OpKind::Mul: {
      auto s = broadcast_shape(ops[0], ops[1]);
      if (!s) mismatch(n, ops, "shapes are not equal or row-broadcastable");
      return *s;
    }
    case OpKind::MatMul: {
      if (ops[0].rank() != 2 || ops[1].rank() != 2) mismatch(n, ops, "matmul needs rank-2 operands");
      if (ops[0].dim(1) != ops[1].dim(0)) mismatch(n, ops, "inner dimensions differ");
      return TensorShape{ops[0].dim(0), ops[1].dim(1)};
    }
    case OpKind::Transpose: {
      const auto perm = transpose_perm(n, ops[0].rank());
      std::vector<std::int64_t> sorted = perm;
      std::sort(sorted.begin(), sorted.end());
      std::vector<std::int64_t> ident(ops[0].rank());
      std::iota(ident.begin(), ident.end(), 0);
      if (sorted != ident) mismatch(n, ops, "axes are not a permutation of the operand rank");
      std::vector<std::int64_t> dims;
      for (auto p : perm) dims.push_back(ops[0].dim(static_cast<std::size_t>(p)));
      return TensorShape(dims);
    }
    case OpKind::Reshape: {
      TensorShape target(n.attrs.shape);
      if (target.numel() != ops[0].numel()) {
        mismatch(n, ops, "reshape target " + target.to_string() + " changes element count");
      }
      return target;
    }
    case OpKind::Gelu:
    case OpKind::Softmax:
    case OpKind::LayerNorm:
      return ops[0];
    case OpKind::Fused:
      break;
  }
  throw Error(ErrorCode::Internal, "infer_node_shape called on a fused node", n.id);
}

TensorGraph infer_shapes(const TensorGraph& g) {
  g.validate();
  TensorGraph out = g;
  for (auto id : g.topo_order()) {
    Node& n = out.mutable_node(id);
    if (n.kind == OpKind::Fused) {
      if (n.inputs != n.attrs.fused->leaves()) {
        throw Error(ErrorCode::Internal, "fused node inputs differ from its body leaves", id);
      }
      n.shape = n.attrs.fused->infer_shape(
          [&](NodeId leaf) { return out.node(leaf).shape; });
      continue;
    }
    std::vector<TensorShape> ops;
    for (auto in : n.inputs) ops.push_back(out.node(in).shape);
    n.shape = infer_node_shape(n, ops);
  }
  return out;
}

}  // namespace fusenas::ir
