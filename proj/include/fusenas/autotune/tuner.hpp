#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fusenas/autotune/genetic.hpp"
#include "fusenas/autotune/latency.hpp"
#include "fusenas/codegen/compiled_graph.hpp"

namespace fusenas::autotune {

inline constexpr int kWorkerChoices[] = {1, 2, 4, 8};

struct TuneConfig {
  GAConfig ga;
  LatencyConfig fitness_latency{5, 1};  // per chromosome
  LatencyConfig final_latency{};        // for the returned assignment
  bool tune_workers = true;
  /// Lets each block's order gene also pick per-op execution, so a block
  /// whose fused variants all lose to its unfused operators can opt out.
  bool allow_per_op = true;
};

struct TuneResult {
  std::map<NodeId, std::size_t> assignment;  // block id -> variant index
  std::set<NodeId> per_op;                   // blocks left to run op by op
  int workers = 1;
  LatencyStats stats;
  std::vector<double> history;  // best-so-far median per generation
  std::vector<std::string> notes;
};

/// Chromosome layout: for every lowered block (ascending id) a loop-order
/// gene, whose extra last value means per-op when allowed, and an unroll
/// gene, then one workers gene when enabled. Fitness is
/// the median latency of the whole graph. The best assignment is applied to
/// `graph` before returning.
TuneResult tune_graph(codegen::CompiledGraph& graph, const ir::Bindings& bench,
                      const TuneConfig& cfg = {});

/// Text report: per-generation best, final assignment and LatencyStats.
std::string tune_report(const codegen::CompiledGraph& graph, const TuneResult& r);

}  // namespace fusenas::autotune
