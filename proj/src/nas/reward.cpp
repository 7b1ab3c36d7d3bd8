#include "fusenas/nas/reward.hpp"

#include <cmath>

#include "fusenas/error.hpp"

namespace fusenas::nas {

double compute_reward(double accuracy, double latency_ms, double budget_ms, double baseline,
                      RewardMode mode) {
  if (!(budget_ms > 0.0)) throw Error(ErrorCode::InvalidArgument, "latency budget must be positive");
  if (!(latency_ms > 0.0)) throw Error(ErrorCode::InvalidArgument, "latency must be positive");
  if (latency_ms > budget_ms) return (budget_ms - latency_ms) / budget_ms - 1.0;
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "accuracy must lie in [0, 1]");
  }
  const double ratio = latency_ms / budget_ms;
  return mode == RewardMode::Ratio ? (accuracy - baseline) + ratio
                                   : (accuracy - baseline) + 1.0 - ratio;
}

double baseline_update(double baseline, double accuracy, double decay) {
  if (!(decay > 0.0 && decay < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "baseline decay must lie in (0, 1)");
  }
  return decay * baseline + (1.0 - decay) * accuracy;
}

}  // namespace fusenas::nas
