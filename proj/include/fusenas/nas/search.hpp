#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fusenas/nas/controller.hpp"
#include "fusenas/nas/reward.hpp"
#include "fusenas/nas/trainer.hpp"

namespace fusenas::nas {

/// Compiler feedback for one architecture.
struct Measurement {
  double latency_ms = 0.0;
  std::int64_t fused_layer_count = 0;
  std::int64_t computation_count = 0;
};

using CompileAndMeasure = std::function<Measurement(const ArchSample&)>;

/// latency = intercept + ms_per_gflop · flops_estimate / 1e9.
CompileAndMeasure flops_latency_model(std::int64_t seq_len, double intercept_ms,
                                      double ms_per_gflop);

struct SearchConfig {
  int episodes_per_update = 32;
  int updates_phase1 = 60;
  int updates_phase2 = 150;
  double learning_rate = 0.5;
  double baseline_decay = 0.9;
  double initial_baseline = 0.0;
  std::uint64_t seed = 0;
  RewardMode reward = RewardMode::Ratio;
  double init_scale = 0.1;
  int controller_width = kDefaultControllerWidth;
  int mode_samples = 1000;  // draws from the final policy for the modal arch

  void validate() const;
};

struct Episode {
  int phase = 1;
  int update = 0;
  int index = 0;
  ArchSample arch;
  std::array<int, kNumDecisions> actions{};
  std::vector<double> log_probs;
  std::optional<double> accuracy;  // unset when over budget
  Measurement feedback;
  double reward = 0.0;
  double baseline = 0.0;  // at sampling time
  bool feasible = false;
};

struct SearchResult {
  ArchSample best;
  std::optional<Episode> best_episode;
  bool exhausted = false;  // no feasible arch; `best` is the best infeasible one
  std::vector<Episode> history;
  int phase1_layers = 0;
  ArchSample mode;
  double mode_frequency = 0.0;
  ControllerState final_state;
  std::size_t trainer_calls = 0;
  std::size_t measure_calls = 0;
};

/// Two-phase search. Phase 1 pins hidden and ffn to their midpoints and
/// learns the layer count; phase 2 freezes the layer argmax and learns the
/// sizes. Over-budget architectures get the penalty reward without
/// training. Accuracy and measurements are cached per architecture. The
/// best episode is the feasible one with the highest reward against a zero
/// baseline.
SearchResult search(const SearchSpace& space, TrainerIface& trainer,
                    const CompileAndMeasure& measure, const SearchConfig& cfg);

/// One line per episode: phase, update, arch, A, L, R, b.
std::string history_log(const std::vector<Episode>& history);

}  // namespace fusenas::nas
