#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "fusenas/codegen/loop_nest.hpp"

namespace fusenas::codegen {

using fusion::Expr;
using fusion::ExprOp;

std::int64_t IterationDomain::points() const {
  std::int64_t p = 1;
  for (auto e : extents) p *= e;
  return p;
}

AccessFunction AccessFunction::make(TensorShape shape, IndexMap map, const IterationDomain& domain) {
  AccessFunction a;
  a.shape = std::move(shape);
  for (auto& row : map.coeffs) {
    row.resize(domain.rank(), 0);
    for (std::size_t v = 0; v < domain.rank(); ++v) {
      if (domain.extents[v] == 1) row[v] = 0;
    }
  }
  a.map = std::move(map);
  a.flat_coeffs.assign(domain.rank(), 0);
  a.flat_offset = 0;
  for (std::size_t d = 0; d < a.map.coeffs.size(); ++d) {
    const std::int64_t stride = a.shape.stride(d);
    for (std::size_t v = 0; v < domain.rank(); ++v) a.flat_coeffs[v] += stride * a.map.coeffs[d][v];
    a.flat_offset += stride * a.map.offsets[d];
  }
  return a;
}

AccessFunction AccessFunction::identity(const IterationDomain& domain) {
  IndexMap map;
  for (std::size_t d = 0; d < domain.rank(); ++d) {
    std::vector<std::int64_t> row(domain.rank(), 0);
    row[d] = 1;
    map.coeffs.push_back(row);
    map.offsets.push_back(0);
  }
  return make(TensorShape(domain.extents), std::move(map), domain);
}

unsigned AccessFunction::dependence_mask() const {
  unsigned mask = 0;
  for (std::size_t v = 0; v < flat_coeffs.size(); ++v) {
    for (const auto& row : map.coeffs) {
      if (row[v] != 0) mask |= 1u << v;
    }
  }
  return mask;
}

bool AccessFunction::in_bounds(const IterationDomain& domain) const {
  for (std::size_t d = 0; d < map.coeffs.size(); ++d) {
    std::int64_t lo = map.offsets[d], hi = map.offsets[d];
    for (std::size_t v = 0; v < domain.rank(); ++v) {
      const std::int64_t c = map.coeffs[d][v];
      const std::int64_t top = c * (domain.extents[v] - 1);
      lo += std::min<std::int64_t>(0, top);
      hi += std::max<std::int64_t>(0, top);
    }
    if (lo < 0 || hi >= shape.dim(d)) return false;
  }
  return true;
}

std::int64_t PointwiseNest::flops_per_point() const {
  std::int64_t f = 0;
  for (const auto& s : body) f += s.cost;
  return f;
}

namespace {

/// Access of an operand whose shape row-broadcasts onto the domain.
AccessFunction broadcast_access(const TensorShape& operand, const IterationDomain& domain) {
  IndexMap map;
  for (std::size_t d = 0; d < operand.rank(); ++d) {
    std::vector<std::int64_t> row(domain.rank(), 0);
    if (operand.dim(d) == domain.extents[d]) row[d] = 1;
    map.coeffs.push_back(row);
    map.offsets.push_back(0);
  }
  return AccessFunction::make(operand, std::move(map), domain);
}

class BlockLowering {
 public:
  explicit BlockLowering(LoweredBlock& block) : block_(block) {}

  PointwiseNest pointwise(const Expr& root) {
    const auto& shape = root.shape();
    if (shape.rank() > kMaxLoopDepth) {
      throw Error(ErrorCode::LoweringUnsupported,
                  "output rank " + std::to_string(shape.rank()) + " exceeds loop depth limit",
                  block_.block);
    }
    PointwiseNest nest;
    nest.domain.extents = shape.dims();
    std::unordered_map<std::string, int> stmt_of;   // expression key -> statement
    std::unordered_map<std::string, int> operand_of;
    emit(root, nest, stmt_of, operand_of);
    return nest;
  }

  TempRef materialize(const Expr& e) {
    if (e.is_leaf()) return {OperandSource::Leaf, e.leaf_id(), -1};
    if (auto it = temp_of_.find(e.key()); it != temp_of_.end()) {
      return {OperandSource::Temp, -1, it->second};
    }
    int temp = -1;
    if (e.op() == ExprOp::MatMul) {
      MatMulStage st;
      st.lhs = materialize(*e.children()[0]);
      st.rhs = materialize(*e.children()[1]);
      st.m = e.children()[0]->shape().dim(0);
      st.k = e.children()[0]->shape().dim(1);
      st.n = e.children()[1]->shape().dim(1);
      temp = new_temp(e.shape());
      st.out_temp = temp;
      block_.stages.emplace_back(st);
    } else {
      PointwiseStage st;
      st.nest = pointwise(e);
      temp = new_temp(e.shape());
      st.out_temp = temp;
      block_.stages.emplace_back(std::move(st));
    }
    temp_of_.emplace(e.key(), temp);
    return {OperandSource::Temp, -1, temp};
  }

 private:
  int new_temp(const TensorShape& s) {
    block_.temps.push_back(s);
    return static_cast<int>(block_.temps.size()) - 1;
  }

  int emit(const Expr& e, PointwiseNest& nest, std::unordered_map<std::string, int>& stmt_of,
           std::unordered_map<std::string, int>& operand_of) {
    if (auto it = stmt_of.find(e.key()); it != stmt_of.end()) return it->second;
    StmtNode s;
    if (e.is_leaf() || e.op() == ExprOp::MatMul) {
      const TempRef ref = materialize(e);
      const std::string okey = e.key();
      int idx;
      if (auto it = operand_of.find(okey); it != operand_of.end()) {
        idx = it->second;
      } else {
        Operand op;
        op.source = ref.source;
        op.leaf = ref.leaf;
        op.temp = ref.temp;
        op.access = broadcast_access(e.shape(), nest.domain);
        nest.operands.push_back(std::move(op));
        idx = static_cast<int>(nest.operands.size()) - 1;
        operand_of.emplace(okey, idx);
      }
      s.op = StmtOp::Load;
      s.operand = idx;
      s.deps = nest.operands[static_cast<std::size_t>(idx)].access.dependence_mask();
    } else {
      for (const auto& c : e.children()) {
        const int arg = emit(*c, nest, stmt_of, operand_of);
        s.args.push_back(arg);
        s.deps |= nest.body[static_cast<std::size_t>(arg)].deps;
      }
      switch (e.op()) {
        case ExprOp::AddN: s.op = StmtOp::Add; break;
        case ExprOp::MulN: s.op = StmtOp::Mul; break;
        case ExprOp::Gelu: s.op = StmtOp::Gelu; break;
        default: throw Error(ErrorCode::Internal, "unexpected expression op in pointwise nest");
      }
      s.cost = s.op == StmtOp::Gelu ? 1 : static_cast<std::int64_t>(s.args.size()) - 1;
    }
    nest.body.push_back(std::move(s));
    const int id = static_cast<int>(nest.body.size()) - 1;
    stmt_of.emplace(e.key(), id);
    return id;
  }

  LoweredBlock& block_;
  std::unordered_map<std::string, int> temp_of_;
};

}  // namespace

LoweredBlock lower_block(NodeId block_id, const Expr& expr) {
  LoweredBlock block;
  block.block = block_id;
  std::set<NodeId> leaves;
  expr.collect_leaves(leaves);
  block.leaves.assign(leaves.begin(), leaves.end());
  BlockLowering lowering(block);
  block.main = lowering.pointwise(expr);
  return block;
}

LoweredBlock lower_block(const ir::Node& node) {
  const auto* body = fusion::fused_block(node);
  if (!body) throw Error(ErrorCode::LoweringUnsupported, "node is not a fused block", node.id);
  return lower_block(node.id, *body->expr());
}

PointwiseNest lower_node(const ir::TensorGraph& g, NodeId id) {
  const ir::Node& n = g.node(id);
  PointwiseNest nest;
  nest.domain.extents = n.shape.dims();
  if (n.shape.rank() > kMaxLoopDepth) {
    throw Error(ErrorCode::LoweringUnsupported, "rank exceeds loop depth limit", id);
  }
  auto load = [&](std::size_t input, AccessFunction access) {
    Operand op;
    op.leaf = n.inputs[input];
    op.access = std::move(access);
    nest.operands.push_back(op);
    StmtNode s;
    s.op = StmtOp::Load;
    s.operand = static_cast<int>(nest.operands.size()) - 1;
    s.deps = nest.operands.back().access.dependence_mask();
    nest.body.push_back(s);
  };
  switch (n.kind) {
    case ir::OpKind::Add:
    case ir::OpKind::Mul:
    case ir::OpKind::Gelu: {
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        load(i, broadcast_access(g.node(n.inputs[i]).shape, nest.domain));
      }
      if (n.kind == ir::OpKind::Gelu) {
        nest.body.push_back({StmtOp::Gelu, -1, {0}, nest.body[0].deps, 1});
      } else {
        nest.body.push_back({n.kind == ir::OpKind::Add ? StmtOp::Add : StmtOp::Mul, -1, {0, 1},
                             nest.body[0].deps | nest.body[1].deps, 1});
      }
      break;
    }
    case ir::OpKind::Transpose: {
      const std::size_t rank = n.shape.rank();
      std::vector<std::int64_t> perm = n.attrs.perm;
      if (perm.empty()) {
        perm.resize(rank);
        std::iota(perm.rbegin(), perm.rend(), 0);
      }
      // out[x] = in[y] with y[perm[d]] = x[d].
      IndexMap map;
      map.coeffs.assign(rank, std::vector<std::int64_t>(rank, 0));
      map.offsets.assign(rank, 0);
      for (std::size_t d = 0; d < rank; ++d) map.coeffs[static_cast<std::size_t>(perm[d])][d] = 1;
      load(0, AccessFunction::make(g.node(n.inputs[0]).shape, std::move(map), nest.domain));
      break;
    }
    default:
      throw Error(ErrorCode::LoweringUnsupported,
                  std::string(ir::op_name(n.kind)) + " has no single-nest lowering", id);
  }
  return nest;
}

}  // namespace fusenas::codegen
