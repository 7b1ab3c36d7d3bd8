#pragma once

#include <functional>
#include <mutex>
#include <vector>

#include "fusenas/codegen/compiled_graph.hpp"

namespace fusenas::autotune {

struct LatencyConfig {
  int runs = 100;
  int warmup = 10;
};

struct LatencyStats {
  int runs = 0;
  int warmup = 0;
  std::vector<double> samples_ms;  // in run order
  double median_ms = 0.0;
  double p90_ms = 0.0;
};

/// Median (mean of the two middle samples for even counts) and nearest-rank
/// p90 of `samples_ms`.
LatencyStats summarize(std::vector<double> samples_ms, int warmup);

/// Held for the duration of every timed region.
std::mutex& measurement_lock();

/// Runs `fn` `warmup` times unrecorded, then `runs` timed times. A failing
/// run is rethrown as an Execution error naming its index.
LatencyStats measure_latency(const std::function<void()>& fn, const LatencyConfig& cfg = {});

LatencyStats measure_latency(codegen::CompiledGraph& graph, const ir::Bindings& bindings,
                             const LatencyConfig& cfg = {});

}  // namespace fusenas::autotune
