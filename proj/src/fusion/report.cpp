#include "fusenas/fusion/report.hpp"

namespace fusenas::fusion {

using nlohmann::json;

json metrics_json(const ir::GraphMetrics& m) {
  return {{"layer_count", m.layer_count},
          {"computation_count", m.computation_count},
          {"intermediate_bytes", m.intermediate_bytes},
          {"node_count", m.node_count},
          {"edge_count", m.edge_count}};
}

json candidate_json(const FusionCandidate& c) {
  return {{"kind", std::string(candidate_kind_name(c.kind))},
          {"root", c.root},
          {"covered", c.covered},
          {"delta_layers", c.delta_layers},
          {"delta_computations", c.delta_computations},
          {"expression", c.rewritten ? c.rewritten->to_string() : std::string()}};
}

json fusion_report(const ir::TensorGraph& before, const FusionResult& result) {
  json cands = json::array();
  for (const auto& c : result.candidates) cands.push_back(candidate_json(c));
  json accepted = json::array();
  for (const auto& c : result.plan.accepted) accepted.push_back(candidate_json(c));
  return {{"candidates", cands},
          {"plan",
           {{"accepted", accepted},
            {"total_delta_layers", result.plan.total_delta_layers()},
            {"total_delta_computations", result.plan.total_delta_computations()}}},
          {"metrics",
           {{"before", metrics_json(ir::count_metrics(before))},
            {"after", metrics_json(ir::count_metrics(result.fused))}}}};
}

}  // namespace fusenas::fusion
