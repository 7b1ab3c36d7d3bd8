#include "fusenas/nas/space.hpp"

#include <algorithm>

namespace fusenas::nas {

void SearchSpace::validate() const {
  for (std::size_t d = 0; d < kNumDecisions; ++d) {
    if (choices(d).empty()) throw Error(ErrorCode::InvalidArgument, "empty choice list");
    if (std::any_of(choices(d).begin(), choices(d).end(), [](int c) { return c < 1; })) {
      throw Error(ErrorCode::InvalidArgument, "choices must be positive");
    }
  }
  if (!(latency_budget_ms > 0.0)) throw Error(ErrorCode::InvalidArgument, "latency budget must be positive");
  if (seq_len < 1) throw Error(ErrorCode::InvalidArgument, "seq_len must be positive");
  if (head_dim < 1) throw Error(ErrorCode::InvalidArgument, "head_dim must be positive");
}

const std::vector<int>& SearchSpace::choices(std::size_t decision) const {
  switch (decision) {
    case kLayers: return layer_choices;
    case kHidden: return hidden_choices;
    case kFfn: return ffn_choices;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown decision");
}

std::array<int, kNumDecisions> SearchSpace::head_sizes() const {
  return {static_cast<int>(layer_choices.size()), static_cast<int>(hidden_choices.size()),
          static_cast<int>(ffn_choices.size())};
}

int SearchSpace::midpoint(std::size_t decision) const {
  return (static_cast<int>(choices(decision).size()) - 1) / 2;
}

ArchSample SearchSpace::arch(const std::array<int, kNumDecisions>& a) const {
  ArchSample s;
  s.num_layers = layer_choices.at(static_cast<std::size_t>(a[kLayers]));
  s.hidden_size = hidden_choices.at(static_cast<std::size_t>(a[kHidden]));
  s.ffn_size = ffn_choices.at(static_cast<std::size_t>(a[kFfn]));
  s.num_heads = std::max(1, s.hidden_size / head_dim);
  if (s.hidden_size % s.num_heads != 0) s.num_heads = 1;
  return s;
}

}  // namespace fusenas::nas
