#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fusenas/fusion/fusion.hpp"
#include "fusenas/ir/graph.hpp"

namespace fusenas::codegen {

using fusenas::NodeId;
using ir::TensorShape;

inline constexpr std::size_t kMaxLoopDepth = 3;

/// Rectangular iteration space [0, extent) per loop variable, outer to inner
/// in declaration order (the schedule may permute it).
struct IterationDomain {
  std::vector<std::int64_t> extents;

  std::size_t rank() const { return extents.size(); }
  std::int64_t points() const;

  friend bool operator==(const IterationDomain&, const IterationDomain&) = default;
};

/// index[d] = sum_v coeffs[d][v] * x_v + offsets[d], one row per operand dim.
struct IndexMap {
  std::vector<std::vector<std::int64_t>> coeffs;
  std::vector<std::int64_t> offsets;

  friend bool operator==(const IndexMap&, const IndexMap&) = default;
};

/// Affine access of one operand, both per-dimension and flattened to a
/// row-major element offset. Loop variables of extent 1 always carry a zero
/// coefficient, so a row-broadcast operand has no coefficient on its row loop.
struct AccessFunction {
  TensorShape shape;
  IndexMap map;
  std::vector<std::int64_t> flat_coeffs;  // per loop variable
  std::int64_t flat_offset = 0;

  static AccessFunction make(TensorShape shape, IndexMap map, const IterationDomain& domain);
  /// Identity access of a tensor whose shape equals the domain.
  static AccessFunction identity(const IterationDomain& domain);

  std::int64_t stride(std::size_t loop_var) const { return flat_coeffs.at(loop_var); }
  /// Bitmask of loop variables with a non-zero coefficient.
  unsigned dependence_mask() const;
  /// True when every index stays inside `shape` over the whole domain.
  bool in_bounds(const IterationDomain& domain) const;
};

enum class OperandSource { Leaf, Temp };

struct Operand {
  OperandSource source = OperandSource::Leaf;
  NodeId leaf = -1;   // graph node id for Leaf
  int temp = -1;      // block-local temporary for Temp
  AccessFunction access;
};

enum class StmtOp { Load, Add, Mul, Gelu };

/// One node of the statement DAG evaluated at every domain point.
struct StmtNode {
  StmtOp op = StmtOp::Load;
  int operand = -1;       // Load: index into PointwiseNest::operands
  std::vector<int> args;  // earlier statement nodes
  unsigned deps = 0;      // loop variables the value depends on
  std::int64_t cost = 0;  // arithmetic ops per evaluation (n-1 for n-ary, 1 for gelu)
};

/// A perfectly nested pointwise loop nest writing one row-major result.
struct PointwiseNest {
  IterationDomain domain;
  std::vector<Operand> operands;
  std::vector<StmtNode> body;  // topologically ordered; the last node is the result
  std::int64_t flops_per_point() const;
};

struct TempRef {
  OperandSource source = OperandSource::Leaf;
  NodeId leaf = -1;
  int temp = -1;
};

/// Standalone triple loop (i, j, k with increasing k), double accumulation.
struct MatMulStage {
  int out_temp = -1;
  TempRef lhs, rhs;
  std::int64_t m = 0, k = 0, n = 0;
};

struct PointwiseStage {
  int out_temp = -1;
  PointwiseNest nest;
};

using Stage = std::variant<PointwiseStage, MatMulStage>;

/// A fused block lowered to loop nests: matmul sub-expressions (and the
/// pointwise operands feeding them) run first as stages into block-local
/// temporaries; the main nest then evaluates the remaining pointwise
/// statement over the block's output domain.
struct LoweredBlock {
  NodeId block = -1;
  std::vector<NodeId> leaves;
  std::vector<TensorShape> temps;
  std::vector<Stage> stages;
  PointwiseNest main;
};

/// Lowers a fused expression. Throws LoweringUnsupported for output ranks
/// above kMaxLoopDepth; callers fall back to per-op execution.
LoweredBlock lower_block(NodeId block_id, const fusion::Expr& expr);
LoweredBlock lower_block(const ir::Node& fused_node);

/// Single-node nest for an Add, Mul, Gelu or Transpose node, as used by the
/// dependence analysis. Operand i of the nest reads node input i.
PointwiseNest lower_node(const ir::TensorGraph& g, NodeId id);

}  // namespace fusenas::codegen
