#pragma once

#include <json.hpp>

#include "fusenas/fusion/fusion.hpp"
#include "fusenas/ir/metrics.hpp"

namespace fusenas::fusion {

nlohmann::json metrics_json(const ir::GraphMetrics& m);
nlohmann::json candidate_json(const FusionCandidate& c);

/// The fuse-report document: every candidate (kind, covered ids, deltas),
/// the selected plan, and before/after metrics. Keys are emitted in sorted
/// order, so the text is stable for golden comparisons.
nlohmann::json fusion_report(const ir::TensorGraph& before, const FusionResult& result);

}  // namespace fusenas::fusion
