#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fusenas/codegen/loop_nest.hpp"
#include "fusenas/codegen/variants.hpp"
#include "fusenas/ir/interpreter.hpp"

namespace fusenas::codegen {

/// Innermost loops run in strips of this many elements.
inline constexpr std::int64_t kStripLength = 256;

/// Interprets `v`. operands[i] holds nest operand i in row-major order and
/// `out` receives domain.points() values. With workers > 1 the outermost
/// loop is split into disjoint contiguous ranges, one thread each.
void run_schedule(const ScheduleVariant& v, std::span<const float* const> operands, float* out,
                  int workers = 1);

/// run_schedule over graph bindings; every operand must be a bound leaf.
ir::Tensor execute_schedule(const ScheduleVariant& v, const ir::Bindings& bindings,
                            int workers = 1);

/// out[i,j] = Σ_k a[i,k] b[k,j], double accumulation, increasing k.
void run_matmul(const MatMulStage& st, const float* a, const float* b, float* out);

/// Identity-order, unroll-1 variants for the pointwise stages of a block
/// (empty entries for matmul stages). They share ownership of `block`.
std::vector<std::optional<ScheduleVariant>> default_stage_variants(
    const std::shared_ptr<const LoweredBlock>& block);

/// Runs the stages of a lowered block and then `main`. `temps` must hold one
/// buffer per block temporary, sized to its shape.
void run_block(const LoweredBlock& block,
               std::span<const std::optional<ScheduleVariant>> stage_variants,
               const ScheduleVariant& main, const std::function<const float*(NodeId)>& leaf,
               std::vector<std::vector<float>>& temps, float* out, int workers = 1);

}  // namespace fusenas::codegen
