#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "fusenas/nas/space.hpp"

namespace fusenas::nas {

inline constexpr int kDefaultControllerWidth = 32;

/// Single-layer tanh recurrence over the three decisions:
///   h_t = tanh(Wx x_t + Wh h_{t-1} + b),  logits_t = O_t h_t + c_t,
/// with x_0 a learned start vector and x_{t+1} the embedding of action a_t.
struct ControllerState {
  Eigen::MatrixXd wx, wh;
  Eigen::VectorXd bias, start;
  std::vector<Eigen::MatrixXd> out_w;      // per head, choices x width
  std::vector<Eigen::VectorXd> out_b;      // per head
  std::vector<Eigen::MatrixXd> embedding;  // per head, choices x width
  double baseline = 0.0;
  double baseline_decay = 0.9;

  /// All weights zero: every head is uniform.
  static ControllerState zeros(const std::vector<int>& head_sizes,
                               int width = kDefaultControllerWidth);
  /// Weights uniform in [-scale, scale].
  static ControllerState random(const std::vector<int>& head_sizes, std::uint64_t seed,
                                double scale = 0.1, int width = kDefaultControllerWidth);

  int width() const { return static_cast<int>(bias.size()); }
  std::vector<int> head_sizes() const;
  std::size_t num_params() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);
};

struct Trajectory {
  std::vector<int> actions;
  std::vector<double> log_probs;       // log P(a_t | a_<t); 0 for forced steps
  std::vector<bool> forced;
  std::vector<Eigen::VectorXd> probs;  // per step
};

/// Runs the recurrence. Free steps sample from their head with `rng`, or
/// take the argmax when `rng` is null; forced steps take the given action.
Trajectory controller_rollout(const ControllerState& s,
                              const std::vector<std::optional<int>>& forced,
                              std::mt19937_64* rng);

/// Forward pass for a fixed action sequence.
Trajectory controller_score(const ControllerState& s, const std::vector<int>& actions,
                            const std::vector<bool>& forced);

/// (ArchSample, log-probs) for the search space's decision order.
struct ControllerSample {
  ArchSample arch;
  Trajectory trajectory;
};
ControllerSample controller_sample(const ControllerState& s, const SearchSpace& space,
                                   std::mt19937_64& rng, const ForcedActions& forced = {});

/// One episode's contribution to the policy gradient.
struct ScoredActions {
  std::vector<int> actions;
  std::vector<bool> forced;
  double advantage = 0.0;
};

/// Σ_episodes advantage · Σ_{free t} log P(a_t), the surrogate objective.
double policy_objective(const ControllerState& s, const std::vector<ScoredActions>& batch);

/// Gradient of policy_objective in flatten() layout, by backpropagation
/// through time.
Eigen::VectorXd policy_gradient(const ControllerState& s, const std::vector<ScoredActions>& batch);

/// θ += lr · gradient / |batch|. Throws NonFiniteGradient naming the first
/// episode whose gradient is not finite.
void reinforce_update(ControllerState& s, const std::vector<ScoredActions>& batch,
                      double learning_rate);

}  // namespace fusenas::nas
