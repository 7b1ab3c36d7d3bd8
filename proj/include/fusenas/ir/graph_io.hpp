#pragma once

#include <string>
#include <string_view>

#include "fusenas/ir/graph.hpp"

namespace fusenas::ir {

/// Parses the JSON graph document:
///
///   {"nodes": [{"id": 0, "op": "input", "inputs": [], "attrs": {"shape": [2, 3]}}, ...],
///    "outputs": [3]}
///
/// Ids must be unique and dense from 0. Unknown keys, unknown op names,
/// dangling inputs and cycles are rejected with an Error naming the node.
/// The returned graph is validated but carries no shapes yet.
TensorGraph parse_graph(std::string_view document);

TensorGraph load_graph_file(const std::string& path);

/// Inverse of parse_graph for graphs without Fused nodes.
std::string write_graph(const TensorGraph& graph);

}  // namespace fusenas::ir
