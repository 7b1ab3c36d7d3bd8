#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fusenas/codegen/loop_nest.hpp"

namespace fusenas::codegen {

inline constexpr double kDefaultLocalityLambda = 0.25;
inline constexpr int kUnrollFactors[] = {1, 2, 4, 8};

struct RedundancyProfile {
  std::int64_t redundant_flops = 0;  // re-executions beyond the hoisted ideal
  std::int64_t stride_cost = 0;      // sum of |innermost stride| over operands
};

/// One schedule of a pointwise nest. Every statement is evaluated at its
/// hoist level: the deepest loop position among the variables it depends on
/// (-1 = before the outermost loop). Loads and arithmetic at the innermost
/// position run per element; everything above is a hoisted temporary.
struct ScheduleVariant {
  std::shared_ptr<const PointwiseNest> nest;
  std::vector<std::size_t> order;  // loop position -> domain variable, outer first
  std::vector<int> hoist_level;    // per statement
  int unroll = 1;
  RedundancyProfile profile;

  std::size_t depth() const { return order.size(); }
  /// Arithmetic statements evaluated above the innermost loop.
  std::vector<int> hoisted_temporaries() const;
};

/// Builds the variant for one loop order and unroll factor.
ScheduleVariant make_variant(std::shared_ptr<const PointwiseNest> nest,
                             std::vector<std::size_t> order, int unroll = 1);

/// Every permutation of the domain's loops (lexicographic, identity first)
/// crossed with `unrolls`. The identity order is the row-outer schedule that
/// recomputes row-invariant values; column-outer orders hoist them.
std::vector<ScheduleVariant> gen_variants(std::shared_ptr<const PointwiseNest> nest,
                                          std::span<const int> unrolls = kUnrollFactors);

/// Σ_operands |innermost stride| × elements touched + λ · redundant_flops.
double estimate_locality(const ScheduleVariant& v, double lambda = kDefaultLocalityLambda);

/// Text form: loop order, hoist levels, unroll factor and redundancy profile.
std::string dump_variant(const ScheduleVariant& v);

}  // namespace fusenas::codegen
