#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "fusenas/fusion/fusion.hpp"
#include "fusenas/ir/shape_inference.hpp"

namespace fusenas::fusion {

using ir::Node;
using ir::OpKind;
using ir::TensorGraph;

std::int64_t FusionPlan::total_delta_layers() const {
  return std::accumulate(accepted.begin(), accepted.end(), std::int64_t{0},
                         [](std::int64_t s, const FusionCandidate& c) { return s + c.delta_layers; });
}

std::int64_t FusionPlan::total_delta_computations() const {
  return std::accumulate(
      accepted.begin(), accepted.end(), std::int64_t{0},
      [](std::int64_t s, const FusionCandidate& c) { return s + c.delta_computations; });
}

FusionPlan select_plan(std::vector<FusionCandidate> candidates) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const FusionCandidate& a, const FusionCandidate& b) {
                     if (a.delta_computations != b.delta_computations) {
                       return a.delta_computations > b.delta_computations;
                     }
                     if (a.delta_layers != b.delta_layers) return a.delta_layers > b.delta_layers;
                     return a.covered.front() < b.covered.front();
                   });
  FusionPlan plan;
  std::unordered_set<NodeId> taken;
  for (auto& c : candidates) {
    const bool overlaps = std::any_of(c.covered.begin(), c.covered.end(),
                                      [&](NodeId id) { return taken.count(id) != 0; });
    if (overlaps) continue;
    taken.insert(c.covered.begin(), c.covered.end());
    plan.accepted.push_back(std::move(c));
  }
  return plan;
}

TensorGraph rewrite_graph(const TensorGraph& graph, const FusionPlan& plan) {
  const TensorGraph g = graph.shapes_inferred() ? graph : ir::infer_shapes(graph);
  if (plan.empty()) return g;

  std::unordered_map<NodeId, const FusionCandidate*> root_of_block;
  std::unordered_set<NodeId> covered;
  for (const auto& c : plan.accepted) {
    if (c.covered.empty() || !c.rewritten) {
      throw Error(ErrorCode::StalePlan, "candidate has no covered nodes", c.root);
    }
    if (std::find(c.covered.begin(), c.covered.end(), c.root) == c.covered.end()) {
      throw Error(ErrorCode::StalePlan, "candidate root is not covered", c.root);
    }
    for (auto id : c.covered) {
      if (!g.contains(id)) throw Error(ErrorCode::StalePlan, "plan names a missing node", id);
      const auto kind = g.node(id).kind;
      if (kind == OpKind::Input || kind == OpKind::Const || kind == OpKind::Fused) {
        throw Error(ErrorCode::StalePlan, "plan covers a node that cannot be fused", id);
      }
      if (!covered.insert(id).second) {
        throw Error(ErrorCode::StalePlan, "plan candidates overlap", id);
      }
    }
    root_of_block.emplace(c.root, &c);
  }

  TensorGraph out;
  for (const auto& n : g.nodes()) {
    if (auto it = root_of_block.find(n.id); it != root_of_block.end()) {
      const FusionCandidate& c = *it->second;
      auto body = std::make_shared<FusedBlock>(c.kind, c.rewritten, c.covered);
      for (auto leaf : body->leaves()) {
        if (!g.contains(leaf) || covered.count(leaf)) {
          // A leaf may be another block's root, never an interior node.
          if (!root_of_block.count(leaf)) {
            throw Error(ErrorCode::StalePlan, "fused leaf is not available outside the block", leaf);
          }
        }
      }
      Node fused;
      fused.id = n.id;
      fused.kind = OpKind::Fused;
      fused.inputs = body->leaves();
      fused.attrs.fused = std::move(body);
      out.insert(std::move(fused));
      continue;
    }
    if (covered.count(n.id)) continue;
    Node copy = n;
    copy.shape = {};
    out.insert(std::move(copy));
  }
  out.set_outputs(g.outputs());
  TensorGraph shaped = ir::infer_shapes(out);
  for (const auto& c : plan.accepted) {
    if (shaped.node(c.root).shape != g.node(c.root).shape) {
      throw Error(ErrorCode::StalePlan, "fused block changes the root's shape", c.root);
    }
  }
  return shaped;
}

FusionResult fuse_graph(const TensorGraph& graph, const EdgeGate& gate) {
  FusionResult r;
  const TensorGraph g = graph.shapes_inferred() ? graph : ir::infer_shapes(graph);
  r.candidates = enumerate_candidates(g, gate);
  r.plan = select_plan(r.candidates);
  r.fused = rewrite_graph(g, r.plan);
  return r;
}

}  // namespace fusenas::fusion
