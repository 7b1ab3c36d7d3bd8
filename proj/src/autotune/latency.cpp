#include "fusenas/autotune/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace fusenas::autotune {

LatencyStats summarize(std::vector<double> samples_ms, int warmup) {
  LatencyStats s;
  s.runs = static_cast<int>(samples_ms.size());
  s.warmup = warmup;
  s.samples_ms = samples_ms;
  if (samples_ms.empty()) return s;
  std::sort(samples_ms.begin(), samples_ms.end());
  const std::size_t n = samples_ms.size();
  s.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
  s.p90_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

std::mutex& measurement_lock() {
  static std::mutex m;
  return m;
}

LatencyStats measure_latency(const std::function<void()>& fn, const LatencyConfig& cfg) {
  if (cfg.runs < 1) throw Error(ErrorCode::InvalidArgument, "runs must be at least 1");
  if (cfg.warmup < 0) throw Error(ErrorCode::InvalidArgument, "warmup must be non-negative");
  std::lock_guard lock(measurement_lock());
  auto call = [&](int index) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::Execution, "run " + std::to_string(index) + " failed: " + e.what());
    }
  };
  for (int i = 0; i < cfg.warmup; ++i) call(i - cfg.warmup);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(cfg.runs));
  using clock = std::chrono::steady_clock;
  for (int i = 0; i < cfg.runs; ++i) {
    const auto t0 = clock::now();
    call(i);
    const auto t1 = clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return summarize(std::move(samples), cfg.warmup);
}

LatencyStats measure_latency(codegen::CompiledGraph& graph, const ir::Bindings& bindings,
                             const LatencyConfig& cfg) {
  ir::check_bindings(graph.graph(), bindings);
  return measure_latency([&] { graph.execute(bindings); }, cfg);
}

}  // namespace fusenas::autotune
