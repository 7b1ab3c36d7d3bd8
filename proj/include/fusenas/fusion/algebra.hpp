#pragma once

#include "fusenas/fusion/expr.hpp"

namespace fusenas::fusion {

/// Commutative/associative normal form: AddN under AddN and MulN under MulN
/// are flattened, and the children of every AddN/MulN are sorted by key().
/// MatMul operand order is preserved. Idempotent.
ExprPtr canonicalize(const ExprPtr& e);

/// Distributive factoring to fixpoint. Within every AddN, the factor shared
/// by the most terms is pulled out:
///
///   sum_i c * t_i        ->  c * (sum_i t_i)
///   sum_i (L @ R_i)      ->  L @ (sum_i R_i)
///   sum_i (L_i @ R)      ->  (sum_i L_i) @ R
///
/// Ties go to the smallest factor key. Factors can be whole subtrees, so
/// a*b + a*c + d*b + d*c ends at (a + d) * (b + c). Each step removes at
/// least one operator; the result is canonical.
ExprPtr apply_distributive_factor(const ExprPtr& e);

}  // namespace fusenas::fusion
