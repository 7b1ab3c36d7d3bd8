#include "fusenas/codegen/legality.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

namespace fusenas::codegen {

namespace {

struct Interval {
  std::int64_t lo = 0, hi = 0;
};

/// Row r(x) = x_var + offset (var == -1 for a constant row).
struct SimpleRow {
  int var = -1;
  std::int64_t offset = 0;
};

std::optional<SimpleRow> simple_row(const std::vector<std::int64_t>& coeffs, std::int64_t offset) {
  SimpleRow r{-1, offset};
  for (std::size_t v = 0; v < coeffs.size(); ++v) {
    if (coeffs[v] == 0) continue;
    if (coeffs[v] != 1 || r.var != -1) return std::nullopt;
    r.var = static_cast<int>(v);
  }
  return r;
}

}  // namespace

bool legality_check(const PointwiseNest& producer, const PointwiseNest& consumer,
                    std::size_t operand, std::span<const std::size_t> loop_order) {
  const auto& dom = consumer.domain;
  const std::size_t rank = dom.rank();
  if (operand >= consumer.operands.size()) return false;
  const auto& access = consumer.operands[operand].access;
  if (producer.domain.rank() != rank || access.map.coeffs.size() != rank) return false;
  if (loop_order.size() != rank) return false;

  std::vector<SimpleRow> rows;
  for (std::size_t d = 0; d < rank; ++d) {
    auto r = simple_row(access.map.coeffs[d], access.map.offsets[d]);
    if (!r) return false;
    rows.push_back(*r);
  }

  // Every read must hit an element the producer computes.
  std::vector<Interval> box(rank);
  for (std::size_t v = 0; v < rank; ++v) box[v] = {0, dom.extents[v] - 1};
  for (std::size_t d = 0; d < rank; ++d) {
    const auto& r = rows[d];
    const Interval span = r.var < 0 ? Interval{r.offset, r.offset}
                                    : Interval{box[r.var].lo + r.offset, box[r.var].hi + r.offset};
    if (span.lo < 0 || span.hi >= producer.domain.extents[d]) return false;
  }

  // Lexicographic sign of r(x) - x, outer loop first. `box` shrinks to the
  // points where every outer difference is zero.
  for (std::size_t k : loop_order) {
    const auto& r = rows[k];
    if (r.var == static_cast<int>(k)) {
      if (r.offset > 0) return false;
      if (r.offset < 0) return true;
      continue;
    }
    // d = x_m + c - x_k (or c - x_k), maximised at x_m = hi, x_k = lo.
    const std::int64_t top = (r.var < 0 ? 0 : box[r.var].hi) + r.offset - box[k].lo;
    if (top > 0) return false;
    if (top < 0) return true;
    if (r.var >= 0) box[r.var].lo = box[r.var].hi;
    box[k].hi = box[k].lo;
  }
  return true;
}

bool legal_for_all_orders(const PointwiseNest& producer, const PointwiseNest& consumer,
                          std::size_t operand) {
  std::vector<std::size_t> order(consumer.domain.rank());
  std::iota(order.begin(), order.end(), 0);
  do {
    if (!legality_check(producer, consumer, operand, order)) return false;
  } while (std::next_permutation(order.begin(), order.end()));
  return true;
}

fusion::EdgeGate make_legality_gate() {
  return [](const ir::TensorGraph& g, NodeId producer, NodeId consumer) {
    const auto nestable = [](ir::OpKind k) {
      return ir::is_pointwise(k) || k == ir::OpKind::Transpose;
    };
    if (!nestable(g.node(producer).kind)) return true;
    if (!nestable(g.node(consumer).kind)) return false;
    PointwiseNest p, c;
    try {
      p = lower_node(g, producer);
      c = lower_node(g, consumer);
    } catch (const Error&) {
      return false;
    }
    const auto& inputs = g.node(consumer).inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (inputs[i] == producer && !legal_for_all_orders(p, c, i)) return false;
    }
    return true;
  };
}

}  // namespace fusenas::codegen
