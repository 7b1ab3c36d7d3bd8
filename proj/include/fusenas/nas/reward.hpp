#pragma once

namespace fusenas::nas {

enum class RewardMode {
  /// (rL − L)/rL − 1 over budget, (A − b) + L/rL within it.
  Ratio,
  /// Same penalty; within budget (A − b) + 1 − L/rL, so faster is better.
  Corrected,
};

double compute_reward(double accuracy, double latency_ms, double budget_ms, double baseline,
                      RewardMode mode = RewardMode::Ratio);

/// b′ = β·b + (1 − β)·A.
double baseline_update(double baseline, double accuracy, double decay);

}  // namespace fusenas::nas
