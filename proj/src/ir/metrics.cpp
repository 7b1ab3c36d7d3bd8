#include "fusenas/ir/metrics.hpp"

#include <algorithm>

#include "fusenas/ir/shape_inference.hpp"

namespace fusenas::ir {

std::unordered_map<NodeId, NodeId> polynomial_regions(const TensorGraph& g) {
  const auto users = g.consumers();
  const auto order = g.topo_order();
  std::unordered_map<NodeId, NodeId> root_of;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node& n = g.node(*it);
    if (!is_polynomial(n.kind)) continue;
    const auto& cs = users.at(n.id);
    NodeId root = n.id;
    if (!g.is_output(n.id) && !cs.empty()) {
      const bool all_poly = std::all_of(cs.begin(), cs.end(), [&](NodeId c) {
        return is_polynomial(g.node(c).kind);
      });
      if (all_poly) {
        const NodeId first = root_of.at(cs.front());
        const bool same = std::all_of(cs.begin(), cs.end(),
                                      [&](NodeId c) { return root_of.at(c) == first; });
        if (same) root = first;
      }
    }
    root_of[n.id] = root;
  }
  return root_of;
}

GraphMetrics count_metrics(const TensorGraph& graph) {
  const TensorGraph g = graph.shapes_inferred() ? graph : infer_shapes(graph);
  GraphMetrics m;
  m.node_count = static_cast<std::int64_t>(g.size());
  m.edge_count = static_cast<std::int64_t>(g.edge_count());

  const auto root_of = polynomial_regions(g);
  std::unordered_map<NodeId, std::int64_t> tree_cost;
  // Topological order guarantees operands are costed before their users.
  for (auto id : g.topo_order()) {
    const Node& n = g.node(id);
    if (!is_polynomial(n.kind)) continue;
    std::int64_t cost = 1;
    for (auto in : n.inputs) {
      auto r = root_of.find(in);
      if (r != root_of.end() && r->second == root_of.at(id) && in != root_of.at(id)) {
        cost += tree_cost.at(in);
      }
    }
    tree_cost[id] = cost;
  }

  for (const auto& n : g.nodes()) {
    if (n.kind == OpKind::Input || n.kind == OpKind::Const) continue;
    ++m.layer_count;
    if (!g.is_output(n.id)) m.intermediate_bytes += n.shape.numel() * 4;
    switch (n.kind) {
      case OpKind::Add:
      case OpKind::Mul:
      case OpKind::MatMul:
        if (root_of.at(n.id) == n.id) m.computation_count += tree_cost.at(n.id);
        break;
      case OpKind::Gelu:
      case OpKind::Softmax:
      case OpKind::LayerNorm:
        m.computation_count += 1;
        break;
      case OpKind::Fused:
        m.computation_count += n.attrs.fused->computation_count();
        break;
      default:
        break;
    }
  }
  return m;
}

std::int64_t graph_flops(const TensorGraph& graph) {
  const TensorGraph g = graph.shapes_inferred() ? graph : infer_shapes(graph);
  std::int64_t flops = 0;
  for (const auto& n : g.nodes()) {
    switch (n.kind) {
      case OpKind::MatMul: {
        const auto& a = g.node(n.inputs[0]).shape;
        flops += 2 * a.dim(0) * a.dim(1) * n.shape.dim(1);
        break;
      }
      case OpKind::Add:
      case OpKind::Mul:
      case OpKind::Gelu:
      case OpKind::Softmax:
      case OpKind::LayerNorm:
        flops += n.shape.numel();
        break;
      case OpKind::Fused:
        flops += n.attrs.fused->flops();
        break;
      default:
        break;
    }
  }
  return flops;
}

}  // namespace fusenas::ir
