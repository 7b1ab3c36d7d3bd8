#pragma once

#include <span>

#include "fusenas/codegen/loop_nest.hpp"
#include "fusenas/fusion/fusion.hpp"

namespace fusenas::codegen {

/// Dependence test for fusing `producer` into the loop nest of `consumer`.
///
/// Both nests share loop variables: the fused nest iterates the consumer's
/// domain, the producer writes its element y at iteration y, and the consumer
/// reads operand `operand` through its access map at iteration x. The fusion
/// is legal iff every read r(x) lands inside the producer's extents and r(x)
/// is not later than x in the lexicographic order of `loop_order` (outer
/// first). Within one iteration the producer statement runs first.
///
/// Only rows of the form x_m + c or c are analysed; any other access is
/// reported illegal.
bool legality_check(const PointwiseNest& producer, const PointwiseNest& consumer,
                     std::size_t operand, std::span<const std::size_t> loop_order);

/// legality_check under every permutation of the consumer's loops.
bool legal_for_all_orders(const PointwiseNest& producer, const PointwiseNest& consumer,
                          std::size_t operand);

/// Edge gate for fusion: producer/consumer pairs that both lower to single
/// nests must be legal under every loop order. Edges from nodes without a
/// nest (matmul, inputs) are left to the fusion rules.
fusion::EdgeGate make_legality_gate();

}  // namespace fusenas::codegen
