#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "fusenas/codegen/legality.hpp"
#include "fusenas/ir/shape_inference.hpp"
#include "support/oracles.hpp"

namespace fusenas::testing {

struct LegalityTally {
  long blocks = 0;
  long checks = 0;  // (edge, operand slot, loop order) triples
  long legal = 0;
  long mismatches = 0;
};

namespace detail {

using ir::OpKind;
using ir::TensorGraph;
using ir::TensorShape;

inline bool nestable(OpKind k) {
  return k == OpKind::Add || k == OpKind::Mul || k == OpKind::Gelu || k == OpKind::Transpose;
}

/// Every way to append one pointwise/transpose consumer of `p` to `g`.
/// Second operands are fresh inputs of every compatible shape or an earlier
/// op node, so diamonds appear in three-node blocks.
inline std::vector<TensorGraph> extend(const TensorGraph& g, NodeId p, std::int64_t max_dim) {
  std::vector<TensorGraph> out;
  const TensorShape s = g.node(p).shape;
  auto push = [&](OpKind k, std::vector<NodeId> ins, TensorGraph h) {
    const NodeId id = h.add(k, std::move(ins));
    h.set_outputs({id});
    out.push_back(ir::infer_shapes(h));
  };
  push(OpKind::Gelu, {p}, g);
  push(OpKind::Transpose, {p}, g);
  for (OpKind k : {OpKind::Add, OpKind::Mul}) {
    push(k, {p, p}, g);
    std::vector<TensorShape> others{s};
    if (s.dim(0) > 1) others.push_back({1, s.dim(1)});
    if (s.dim(0) == 1) {
      for (std::int64_t m = 2; m <= max_dim; ++m) others.push_back({m, s.dim(1)});
    }
    for (const auto& o : others) {
      for (int slot = 0; slot < 2; ++slot) {
        TensorGraph h = g;
        const NodeId x = h.add_input(o);
        push(k, slot == 0 ? std::vector<NodeId>{p, x} : std::vector<NodeId>{x, p}, h);
      }
    }
    for (const auto& n : g.nodes()) {
      if (n.id == p || !nestable(n.kind) || !ir::broadcast_shape(s, n.shape)) continue;
      push(k, {p, n.id}, g);
      push(k, {n.id, p}, g);
    }
  }
  return out;
}

/// Every single-op producer whose output is a x b.
inline std::vector<std::pair<TensorGraph, NodeId>> producers(std::int64_t a, std::int64_t b) {
  std::vector<std::pair<TensorGraph, NodeId>> out;
  auto make = [&](OpKind k, std::vector<TensorShape> in_shapes) {
    TensorGraph g;
    std::vector<NodeId> ins;
    for (auto& sh : in_shapes) ins.push_back(g.add_input(sh));
    const NodeId id = g.add(k, ins);
    g.set_outputs({id});
    out.emplace_back(ir::infer_shapes(g), id);
  };
  make(OpKind::Gelu, {{a, b}});
  make(OpKind::Transpose, {{b, a}});
  make(OpKind::Add, {{a, b}, {a, b}});
  make(OpKind::Mul, {{a, b}, {1, b}});
  return out;
}

}  // namespace detail

/// Checks legality_check against the element-order simulation for every
/// edge between nestable nodes of every block of two or three nodes with
/// all dims in 1..max_dim, under every loop order, and legal_for_all_orders
/// plus the fusion edge gate against the simulation over all orders.
inline LegalityTally exhaustive_legality(std::int64_t max_dim = 4) {
  using namespace detail;
  LegalityTally t;
  const auto gate = codegen::make_legality_gate();

  auto check_edges = [&](const TensorGraph& g) {
    ++t.blocks;
    for (const auto& c : g.nodes()) {
      if (!nestable(c.kind)) continue;
      for (NodeId p : std::set<NodeId>(c.inputs.begin(), c.inputs.end())) {
        if (!nestable(g.node(p).kind)) continue;
        const auto pn = codegen::lower_node(g, p);
        const auto cn = codegen::lower_node(g, c.id);
        bool all_sim = true, all_ana = true;
        for (std::size_t slot = 0; slot < c.inputs.size(); ++slot) {
          if (c.inputs[slot] != p) continue;
          std::vector<std::size_t> order(cn.domain.rank());
          std::iota(order.begin(), order.end(), 0);
          do {
            const bool sim = simulate_fusion(pn, cn, slot, order);
            const bool ana = codegen::legality_check(pn, cn, slot, order);
            ++t.checks;
            t.legal += ana;
            t.mismatches += sim != ana;
            all_sim = all_sim && sim;
          } while (std::next_permutation(order.begin(), order.end()));
          all_ana = all_ana && codegen::legal_for_all_orders(pn, cn, slot);
        }
        ++t.checks;
        t.mismatches += all_sim != all_ana;
        ++t.checks;
        t.mismatches += all_sim != gate(g, p, c.id);
      }
    }
  };

  for (std::int64_t a = 1; a <= max_dim; ++a) {
    for (std::int64_t b = 1; b <= max_dim; ++b) {
      for (const auto& [g, p] : producers(a, b)) {
        for (const auto& two : extend(g, p, max_dim)) {
          check_edges(two);
          const NodeId mid = two.outputs().front();
          for (const auto& three : extend(two, mid, max_dim)) check_edges(three);
        }
      }
    }
  }
  return t;
}

}  // namespace fusenas::testing
