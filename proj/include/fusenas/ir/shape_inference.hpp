#pragma once

#include "fusenas/ir/graph.hpp"

namespace fusenas::ir {

/// Returns a copy of `g` with every node's shape filled in.
///
/// Add/Mul accept (MxN, MxN) or a 1xN row against MxN; MatMul is
/// (MxK)(KxN) -> MxN; Transpose permutes (default: reverse axes); Reshape
/// keeps the element count; unary ops keep their operand shape. Existing
/// annotations are recomputed, so running this twice is a no-op.
TensorGraph infer_shapes(const TensorGraph& g);

/// Shape rule for a single primitive node given its operand shapes.
TensorShape infer_node_shape(const Node& node,
                             const std::vector<TensorShape>& operand_shapes);

}  // namespace fusenas::ir
