#pragma once

#include <cstdint>
#include <unordered_map>

#include "fusenas/ir/graph.hpp"

namespace fusenas::ir {

struct GraphMetrics {
  std::int64_t layer_count = 0;
  std::int64_t computation_count = 0;
  std::int64_t intermediate_bytes = 0;
  std::int64_t node_count = 0;
  std::int64_t edge_count = 0;

  friend bool operator==(const GraphMetrics&, const GraphMetrics&) = default;
};

/// Maps every Add/Mul/MatMul node to the root of the polynomial region it
/// belongs to. A polynomial node joins its consumers' region when it is not a
/// graph output and all of its consumers are polynomial nodes of one region;
/// otherwise it roots its own region.
std::unordered_map<NodeId, NodeId> polynomial_regions(const TensorGraph& g);

/// Layer count: every non-Input/Const node (a fused block is one layer).
///
/// Computation count: operator applications in the graph's symbolic
/// expression. Each polynomial region contributes its tree-expanded operator
/// count, so a subexpression used twice inside a region counts twice; gelu,
/// softmax and layernorm count one; transpose and reshape move data only and
/// count zero; a fused block counts the operators of its rewritten body.
///
/// Intermediate bytes: 4 bytes per element of every buffer that is neither a
/// graph output nor an Input/Const payload.
GraphMetrics count_metrics(const TensorGraph& g);

/// Per-element flop count of a whole shaped graph: 2*M*K*N per matmul, one
/// flop per output element for elementwise and normalisation ops, zero for
/// data movement.
std::int64_t graph_flops(const TensorGraph& g);

}  // namespace fusenas::ir
