#include "fusenas/autotune/genetic.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "fusenas/error.hpp"

namespace fusenas::autotune {

void GAConfig::validate() const {
  if (population_size < 1) throw Error(ErrorCode::InvalidArgument, "population_size must be >= 1");
  if (generations < 0) throw Error(ErrorCode::InvalidArgument, "generations must be >= 0");
  if (elitism_count < 1 || elitism_count > population_size) {
    throw Error(ErrorCode::InvalidArgument, "elitism_count must lie in [1, population_size]");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(crossover_rate) || !prob(mutation_rate)) {
    throw Error(ErrorCode::InvalidArgument, "GA rates must be probabilities");
  }
}

GAResult ga_search(std::span<const int> sizes, const Fitness& fitness, const GAConfig& cfg) {
  cfg.validate();
  if (sizes.empty()) throw Error(ErrorCode::InvalidArgument, "empty gene space");
  for (int s : sizes) {
    if (s < 1) throw Error(ErrorCode::InvalidArgument, "gene category size must be >= 1");
  }

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto random_gene = [&](std::size_t i) {
    return std::uniform_int_distribution<int>(0, sizes[i] - 1)(rng);
  };

  GAResult result;
  std::map<Chromosome, double> cache;
  auto score = [&](const Chromosome& c) {
    auto it = cache.find(c);
    if (it != cache.end()) return it->second;
    const double f = fitness(c);
    cache.emplace(c, f);
    ++result.evaluations;
    return f;
  };

  const std::size_t n = sizes.size();
  const auto pop_size = static_cast<std::size_t>(cfg.population_size);
  std::vector<Chromosome> pop(pop_size, Chromosome(n));
  for (auto& c : pop) {
    for (std::size_t i = 0; i < n; ++i) c[i] = random_gene(i);
  }
  std::vector<double> fit(pop_size);

  auto evaluate = [&] {
    for (std::size_t i = 0; i < pop_size; ++i) {
      fit[i] = score(pop[i]);
      if (result.best.empty() || fit[i] < result.best_fitness) {
        result.best = pop[i];
        result.best_fitness = fit[i];
      }
    }
    result.history.push_back(result.best_fitness);
  };
  evaluate();

  std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
  auto tournament = [&]() -> const Chromosome& {
    const std::size_t a = pick(rng), b = pick(rng);
    return fit[b] < fit[a] ? pop[b] : pop[a];
  };

  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<std::size_t> rank(pop_size);
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });
    std::vector<Chromosome> next;
    next.reserve(pop_size);
    for (int e = 0; e < cfg.elitism_count; ++e) next.push_back(pop[rank[static_cast<std::size_t>(e)]]);
    while (next.size() < pop_size) {
      Chromosome child = tournament();
      const Chromosome& other = tournament();
      if (n > 1 && coin(rng) < cfg.crossover_rate) {
        const auto point = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
        std::copy(other.begin() + static_cast<std::ptrdiff_t>(point), other.end(),
                  child.begin() + static_cast<std::ptrdiff_t>(point));
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (coin(rng) < cfg.mutation_rate) child[i] = random_gene(i);
      }
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    evaluate();
  }
  return result;
}

}  // namespace fusenas::autotune
