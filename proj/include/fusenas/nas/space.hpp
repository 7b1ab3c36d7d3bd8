#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fusenas/ir/transformer.hpp"

namespace fusenas::nas {

using ir::ArchSample;

/// Decision order of the controller.
enum Decision : std::size_t { kLayers = 0, kHidden = 1, kFfn = 2, kNumDecisions = 3 };

struct SearchSpace {
  std::vector<int> layer_choices{2, 4, 6, 8, 10, 12};
  std::vector<int> hidden_choices{128, 192, 256, 384, 512, 768};
  std::vector<int> ffn_choices{256, 512, 1024, 2048, 3072};
  double latency_budget_ms = 100.0;
  std::int64_t seq_len = 128;
  int head_dim = 64;

  void validate() const;
  const std::vector<int>& choices(std::size_t decision) const;
  std::array<int, kNumDecisions> head_sizes() const;
  /// Index of the middle choice, (n - 1) / 2.
  int midpoint(std::size_t decision) const;
  /// Heads = max(1, H / head_dim).
  ArchSample arch(const std::array<int, kNumDecisions>& actions) const;
};

/// Per-decision forced action; nullopt leaves the decision to the policy.
using ForcedActions = std::array<std::optional<int>, kNumDecisions>;

}  // namespace fusenas::nas
