#include "fusenas/fusion/regions.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "fusenas/ir/shape_inference.hpp"

namespace fusenas::fusion {

using ir::Node;
using ir::OpKind;
using ir::TensorGraph;

ExprPtr region_expr(const TensorGraph& g, NodeId root, const std::vector<NodeId>& members) {
  const std::unordered_set<NodeId> inside(members.begin(), members.end());
  std::unordered_map<NodeId, ExprPtr> memo;
  std::function<ExprPtr(NodeId, bool)> build = [&](NodeId id, bool is_root) -> ExprPtr {
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    const Node& n = g.node(id);
    ExprPtr e;
    if (!is_root && !inside.count(id)) {
      e = Expr::leaf(id, n.shape);
    } else {
      std::vector<ExprPtr> kids;
      for (auto in : n.inputs) kids.push_back(build(in, false));
      switch (n.kind) {
        case OpKind::Add: e = Expr::add(std::move(kids)); break;
        case OpKind::Mul: e = Expr::mul(std::move(kids)); break;
        case OpKind::MatMul: e = Expr::matmul(kids[0], kids[1]); break;
        case OpKind::Gelu: e = Expr::gelu(kids[0]); break;
        default:
          throw Error(ErrorCode::InvalidArgument,
                      std::string(ir::op_name(n.kind)) + " cannot be part of a fused expression", id);
      }
    }
    memo.emplace(id, e);
    return e;
  };
  return build(root, true);
}

Region grow_region(const TensorGraph& g, NodeId root,
                   const std::function<bool(const Node&)>& admit,
                   const ConsumerMap& consumers) {
  // Reverse topological order over the admitted ancestors guarantees every
  // consumer is decided before its producer.
  std::unordered_map<NodeId, std::size_t> position;
  {
    const auto order = g.topo_order();
    for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  }
  std::set<std::pair<std::size_t, NodeId>, std::greater<>> frontier;
  std::unordered_set<NodeId> queued;
  auto enqueue_inputs = [&](NodeId id) {
    for (auto in : g.node(id).inputs) {
      if (queued.insert(in).second) frontier.emplace(position.at(in), in);
    }
  };
  std::unordered_set<NodeId> members{root};
  enqueue_inputs(root);
  while (!frontier.empty()) {
    const NodeId id = frontier.begin()->second;
    frontier.erase(frontier.begin());
    const Node& n = g.node(id);
    if (!admit(n) || g.is_output(id)) continue;
    const auto& users = consumers.at(id);
    const bool enclosed = !users.empty() && std::all_of(users.begin(), users.end(), [&](NodeId u) {
      return members.count(u) != 0;
    });
    if (!enclosed) continue;
    members.insert(id);
    enqueue_inputs(id);
  }
  Region r;
  r.root = root;
  r.members.assign(members.begin(), members.end());
  std::sort(r.members.begin(), r.members.end());
  r.expr = region_expr(g, root, r.members);
  return r;
}

Region extract_poly(const TensorGraph& graph, NodeId root) {
  const TensorGraph g = graph.shapes_inferred() ? graph : ir::infer_shapes(graph);
  if (!ir::is_polynomial(g.node(root).kind)) {
    throw Error(ErrorCode::InvalidArgument,
                "region root must be add, mul or matmul, got " +
                    std::string(ir::op_name(g.node(root).kind)),
                root);
  }
  return grow_region(g, root, [](const Node& n) { return ir::is_polynomial(n.kind); },
                     g.consumers());
}

}  // namespace fusenas::fusion
