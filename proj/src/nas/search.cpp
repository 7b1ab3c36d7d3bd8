#include "fusenas/nas/search.hpp"

#include <cstdio>

namespace fusenas::nas {

CompileAndMeasure flops_latency_model(std::int64_t seq_len, double intercept_ms,
                                      double ms_per_gflop) {
  return [=](const ArchSample& arch) {
    Measurement m;
    m.latency_ms =
        intercept_ms + ms_per_gflop * static_cast<double>(ir::flops_estimate(arch, seq_len)) / 1e9;
    return m;
  };
}

void SearchConfig::validate() const {
  if (episodes_per_update < 1) throw Error(ErrorCode::InvalidArgument, "episodes_per_update must be >= 1");
  if (updates_phase1 < 0 || updates_phase2 < 0) {
    throw Error(ErrorCode::InvalidArgument, "update counts must be non-negative");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (!(baseline_decay > 0.0 && baseline_decay < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "baseline_decay must lie in (0, 1)");
  }
  if (mode_samples < 1) throw Error(ErrorCode::InvalidArgument, "mode_samples must be >= 1");
}

namespace {

// Rewards carry the baseline at sampling time, so episodes are compared by
// the reward they would get against a zero baseline.
double score(const Episode& e, const SearchSpace& space, RewardMode mode) {
  if (!e.accuracy) return e.reward;
  return compute_reward(*e.accuracy, e.feedback.latency_ms, space.latency_budget_ms, 0.0, mode);
}

}  // namespace

SearchResult search(const SearchSpace& space, TrainerIface& trainer,
                    const CompileAndMeasure& measure, const SearchConfig& cfg) {
  space.validate();
  cfg.validate();
  const auto sizes = space.head_sizes();
  ControllerState state = ControllerState::random({sizes.begin(), sizes.end()}, cfg.seed,
                                                  cfg.init_scale, cfg.controller_width);
  state.baseline = cfg.initial_baseline;
  state.baseline_decay = cfg.baseline_decay;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  SearchResult result;
  std::map<ArchSample, Measurement> measured;
  std::map<ArchSample, double> accuracy;
  std::optional<Episode> best_feasible, best_infeasible;

  auto run_phase = [&](int phase, int updates, const ForcedActions& forced) {
    for (int u = 0; u < updates; ++u) {
      std::vector<ScoredActions> batch;
      for (int e = 0; e < cfg.episodes_per_update; ++e) {
        const ControllerSample s = controller_sample(state, space, rng, forced);
        Episode ep;
        ep.phase = phase;
        ep.update = u;
        ep.index = static_cast<int>(result.history.size());
        ep.arch = s.arch;
        for (std::size_t t = 0; t < kNumDecisions; ++t) ep.actions[t] = s.trajectory.actions[t];
        ep.log_probs = s.trajectory.log_probs;
        ep.baseline = state.baseline;

        // An invalid arch (F < H) is neither measured nor trained and gets
        // the penalty of an arch just over budget.
        if (s.arch.is_valid()) {
          auto mit = measured.find(s.arch);
          if (mit == measured.end()) {
            mit = measured.emplace(s.arch, measure(s.arch)).first;
            ++result.measure_calls;
          }
          ep.feedback = mit->second;
          ep.feasible = ep.feedback.latency_ms <= space.latency_budget_ms;
        }
        if (ep.feasible) {
          auto ait = accuracy.find(s.arch);
          if (ait == accuracy.end()) {
            ait = accuracy.emplace(s.arch, trainer.evaluate(s.arch)).first;
            ++result.trainer_calls;
          }
          ep.accuracy = ait->second;
          ep.reward = compute_reward(*ep.accuracy, ep.feedback.latency_ms, space.latency_budget_ms,
                                     ep.baseline, cfg.reward);
          state.baseline = baseline_update(state.baseline, *ep.accuracy, cfg.baseline_decay);
        } else {
          const double over = std::max(ep.feedback.latency_ms, space.latency_budget_ms * (1.0 + 1e-9));
          ep.reward = compute_reward(0.0, over, space.latency_budget_ms, ep.baseline, cfg.reward);
        }

        ScoredActions sa;
        sa.actions = s.trajectory.actions;
        sa.forced = s.trajectory.forced;
        sa.advantage = ep.reward - ep.baseline;
        batch.push_back(std::move(sa));

        auto& slot = ep.feasible ? best_feasible : best_infeasible;
        const bool candidate = ep.arch.is_valid();  // invalid archs are never reported
        if (candidate && (!slot || score(ep, space, cfg.reward) > score(*slot, space, cfg.reward))) {
          slot = ep;
        }
        result.history.push_back(std::move(ep));
      }
      reinforce_update(state, batch, cfg.learning_rate);
    }
  };

  ForcedActions phase1{};
  phase1[kHidden] = space.midpoint(kHidden);
  phase1[kFfn] = space.midpoint(kFfn);
  run_phase(1, cfg.updates_phase1, phase1);

  const Trajectory greedy = controller_rollout(state, {std::nullopt}, nullptr);
  ForcedActions phase2{};
  phase2[kLayers] = greedy.actions[0];
  result.phase1_layers = space.layer_choices[static_cast<std::size_t>(greedy.actions[0])];
  run_phase(2, cfg.updates_phase2, phase2);

  std::mt19937_64 mode_rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  std::map<ArchSample, int> counts;
  for (int i = 0; i < cfg.mode_samples; ++i) ++counts[controller_sample(state, space, mode_rng, phase2).arch];
  int top = 0;
  for (const auto& [arch, n] : counts) {
    if (n > top) {
      top = n;
      result.mode = arch;
    }
  }
  result.mode_frequency = static_cast<double>(top) / cfg.mode_samples;

  if (best_feasible) {
    result.best_episode = best_feasible;
  } else {
    result.exhausted = true;
    result.best_episode = best_infeasible;
  }
  if (result.best_episode) result.best = result.best_episode->arch;
  result.final_state = std::move(state);
  return result;
}

std::string history_log(const std::vector<Episode>& history) {
  std::string out;
  char line[256];
  for (const auto& e : history) {
    char acc[32] = "skipped";
    if (e.accuracy) std::snprintf(acc, sizeof acc, "%.9g", *e.accuracy);
    std::snprintf(line, sizeof line, "phase=%d update=%d episode=%d arch=%s A=%s L=%.9g R=%.9g b=%.9g\n",
                  e.phase, e.update, e.index, e.arch.to_string().c_str(), acc,
                  e.feedback.latency_ms, e.reward, e.baseline);
    out += line;
  }
  return out;
}

}  // namespace fusenas::nas
