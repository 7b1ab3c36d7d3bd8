#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>

#include "fusenas/ir/graph.hpp"

namespace fusenas::ir {

using Bindings = std::map<NodeId, Tensor>;
using TensorMap = std::map<NodeId, Tensor>;

/// Evaluates a Fused node given its operand tensors (in `node.inputs` order).
using FusedKernel =
    std::function<Tensor(const Node& node, std::span<const Tensor* const> operands)>;

/// Naive evaluation of one primitive node into a preallocated `out` whose
/// shape is already set. MatMul accumulates in double, increasing k; softmax
/// and layernorm work along the last dimension.
void eval_primitive(const Node& node, std::span<const Tensor* const> operands,
                    Tensor& out);

/// The numerical oracle: evaluates every node with per-op loops in
/// topological order and returns the graph outputs. `order`, when given, must
/// be a valid topological order of `g`; results do not depend on it.
/// Graphs containing Fused nodes are rejected.
TensorMap reference_execute(const TensorGraph& g, const Bindings& bindings,
                            std::optional<std::span<const NodeId>> order = std::nullopt);

/// reference_execute with a hook for Fused nodes.
TensorMap execute_with(const TensorGraph& g, const Bindings& bindings,
                       const FusedKernel& fused,
                       std::optional<std::span<const NodeId>> order = std::nullopt);

/// Checks that `bindings` covers every Input node with a matching shape.
void check_bindings(const TensorGraph& g, const Bindings& bindings);

/// Seeded uniform [-1, 1) tensors for every Input node of a shaped graph.
Bindings random_bindings(const TensorGraph& g, std::uint64_t seed);

}  // namespace fusenas::ir
