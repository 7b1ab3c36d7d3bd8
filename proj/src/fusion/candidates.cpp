#include <algorithm>
#include <map>
#include <set>

#include "fusenas/fusion/algebra.hpp"
#include "fusenas/fusion/fusion.hpp"
#include "fusenas/ir/metrics.hpp"
#include "fusenas/ir/shape_inference.hpp"

namespace fusenas::fusion {

using ir::Node;
using ir::OpKind;
using ir::TensorGraph;

std::string_view candidate_kind_name(CandidateKind kind) {
  switch (kind) {
    case CandidateKind::Algebraic: return "algebraic";
    case CandidateKind::Vertical: return "vertical";
    case CandidateKind::Epilogue: return "epilogue";
  }
  return "unknown";
}

FusedBlock::FusedBlock(CandidateKind kind, ExprPtr expr, std::vector<NodeId> covered)
    : kind_(kind), expr_(std::move(expr)), covered_(std::move(covered)) {
  std::set<NodeId> leaves;
  expr_->collect_leaves(leaves);
  leaves_.assign(leaves.begin(), leaves.end());
  std::sort(covered_.begin(), covered_.end());
}

TensorShape FusedBlock::infer_shape(
    const std::function<TensorShape(NodeId)>& leaf_shape) const {
  std::function<void(const Expr&)> check = [&](const Expr& e) {
    if (e.is_leaf()) {
      if (leaf_shape(e.leaf_id()) != e.shape()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "fused block expects " + e.shape().to_string() + " for leaf " +
                        std::to_string(e.leaf_id()) + ", graph has " +
                        leaf_shape(e.leaf_id()).to_string());
      }
      return;
    }
    for (const auto& c : e.children()) check(*c);
  };
  check(*expr_);
  return expr_->shape();
}

std::string FusedBlock::describe() const {
  return std::string(candidate_kind_name(kind_)) + " " + expr_->to_string();
}

bool FusedBlock::equals(const ir::FusedBody& other) const {
  const auto* o = dynamic_cast<const FusedBlock*>(&other);
  return o && o->kind_ == kind_ && o->covered_ == covered_ &&
         o->expr_->key() == expr_->key();
}

const FusedBlock* fused_block(const Node& node) {
  if (node.kind != OpKind::Fused) return nullptr;
  return dynamic_cast<const FusedBlock*>(node.attrs.fused.get());
}

namespace {

/// Partition of pointwise nodes into maximal groups (same scheme as the
/// polynomial regions, restricted to domains that row-broadcast to the
/// group root's output).
std::map<NodeId, std::vector<NodeId>> pointwise_groups(const TensorGraph& g,
                                                       const ConsumerMap& users,
                                                       const EdgeGate& gate,
                                                       std::unordered_map<NodeId, NodeId>& root_of) {
  const auto order = g.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node& n = g.node(*it);
    if (!ir::is_pointwise(n.kind)) continue;
    NodeId root = n.id;
    const auto& cs = users.at(n.id);
    if (!g.is_output(n.id) && !cs.empty()) {
      const bool all_pointwise = std::all_of(cs.begin(), cs.end(), [&](NodeId c) {
        return ir::is_pointwise(g.node(c).kind);
      });
      if (all_pointwise) {
        const NodeId r = root_of.at(cs.front());
        const bool joinable =
            std::all_of(cs.begin(), cs.end(), [&](NodeId c) { return root_of.at(c) == r; }) &&
            ir::broadcasts_to(n.shape, g.node(r).shape) &&
            std::all_of(cs.begin(), cs.end(), [&](NodeId c) { return !gate || gate(g, n.id, c); });
        if (joinable) root = r;
      }
    }
    root_of[n.id] = root;
  }
  std::map<NodeId, std::vector<NodeId>> groups;
  for (const auto& [id, root] : root_of) groups[root].push_back(id);
  for (auto& [root, members] : groups) std::sort(members.begin(), members.end());
  return groups;
}

void measure_deltas(const TensorGraph& g, FusionCandidate& c) {
  const auto before = ir::count_metrics(g);
  FusionPlan solo;
  solo.accepted.push_back(c);
  const auto after = ir::count_metrics(rewrite_graph(g, solo));
  c.delta_layers = before.layer_count - after.layer_count;
  c.delta_computations = before.computation_count - after.computation_count;
}

}  // namespace

std::vector<FusionCandidate> enumerate_candidates(const TensorGraph& graph, const EdgeGate& gate) {
  const TensorGraph g = graph.shapes_inferred() ? graph : ir::infer_shapes(graph);
  const auto users = g.consumers();
  std::vector<FusionCandidate> out;
  std::set<std::vector<NodeId>> covered_sets;

  // (a) algebraic: polynomial regions whose factored form is cheaper.
  std::set<NodeId> poly_roots;
  for (const auto& [id, root] : ir::polynomial_regions(g)) poly_roots.insert(root);
  for (auto root : poly_roots) {
    Region r = grow_region(g, root, [](const Node& n) { return ir::is_polynomial(n.kind); }, users);
    if (r.members.size() < 2) continue;
    const ExprPtr canon = canonicalize(r.expr);
    const ExprPtr factored = apply_distributive_factor(canon);
    if (factored->op_count() >= canon->op_count()) continue;
    out.push_back({CandidateKind::Algebraic, root, r.members, factored, 0, 0});
    covered_sets.insert(r.members);
  }

  // (b) vertical: maximal pointwise groups.
  std::unordered_map<NodeId, NodeId> group_of;
  const auto groups = pointwise_groups(g, users, gate, group_of);
  for (const auto& [root, members] : groups) {
    if (members.size() < 2 || covered_sets.count(members)) continue;
    const ExprPtr e = apply_distributive_factor(region_expr(g, root, members));
    out.push_back({CandidateKind::Vertical, root, members, e, 0, 0});
    covered_sets.insert(members);
  }

  // (c) epilogue: a matmul whose single use is a pointwise group of its shape.
  for (auto id : g.topo_order()) {
    const Node& n = g.node(id);
    if (n.kind != OpKind::MatMul || g.is_output(id)) continue;
    const auto& cs = users.at(id);
    if (cs.size() != 1 || !ir::is_pointwise(g.node(cs.front()).kind)) continue;
    if (gate && !gate(g, id, cs.front())) continue;
    const NodeId root = group_of.at(cs.front());
    if (g.node(root).shape != n.shape) continue;
    std::vector<NodeId> members = groups.at(root);
    members.push_back(id);
    std::sort(members.begin(), members.end());
    const ExprPtr e = apply_distributive_factor(region_expr(g, root, members));
    out.push_back({CandidateKind::Epilogue, root, members, e, 0, 0});
  }

  for (auto& c : out) measure_deltas(g, c);
  // Expanding a shared non-polynomial value (a gelu read twice) can cost
  // more operators than the unfused graph; such blocks are not candidates.
  std::erase_if(out, [](const FusionCandidate& c) { return c.delta_computations < 0; });
  return out;
}

}  // namespace fusenas::fusion
