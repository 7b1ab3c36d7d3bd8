#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "fusenas/fusion/expr.hpp"
#include "fusenas/ir/graph.hpp"

namespace fusenas::fusion {

using ConsumerMap = std::unordered_map<NodeId, std::vector<NodeId>>;

/// A connected set of nodes that computes one value (the root's) and whose
/// interior results are consumed only inside the set.
struct Region {
  NodeId root = -1;
  std::vector<NodeId> members;  // ascending, includes root
  ExprPtr expr;                 // over the region's leaf nodes
};

/// Grows a region upwards from `root`: a producer joins when `admit` accepts
/// it, it is not a graph output, and every one of its consumers is already a
/// member. Nodes outside the region become expression leaves; shared
/// producers become shared subtrees.
Region grow_region(const ir::TensorGraph& g, NodeId root,
                   const std::function<bool(const ir::Node&)>& admit,
                   const ConsumerMap& consumers);

/// Expression for an explicit member set rooted at `root`.
ExprPtr region_expr(const ir::TensorGraph& g, NodeId root,
                    const std::vector<NodeId>& members);

/// Maximal polynomial (Add/Mul/MatMul) expression rooted at `root`.
/// Throws InvalidArgument when `root` is not a polynomial node.
Region extract_poly(const ir::TensorGraph& g, NodeId root);

}  // namespace fusenas::fusion
