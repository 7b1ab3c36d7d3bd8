#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fusenas::autotune {

struct GAConfig {
  int population_size = 24;
  int generations = 30;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  int elitism_count = 1;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// One categorical gene per tunable; gene i lies in [0, sizes[i]).
using Chromosome = std::vector<int>;
/// Lower is better.
using Fitness = std::function<double(const Chromosome&)>;

struct GAResult {
  Chromosome best;
  double best_fitness = 0.0;
  /// Best-so-far fitness after the initial population (entry 0) and after
  /// each generation.
  std::vector<double> history;
  std::size_t evaluations = 0;  // distinct chromosomes scored
};

/// Seeded generational GA: tournament selection of size 2, single-point
/// crossover, per-gene uniform mutation and elitism. Each distinct
/// chromosome is scored once.
GAResult ga_search(std::span<const int> category_sizes, const Fitness& fitness,
                   const GAConfig& cfg);

}  // namespace fusenas::autotune
