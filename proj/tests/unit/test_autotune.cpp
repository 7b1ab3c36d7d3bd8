#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>
#include <stdexcept>
#include <thread>

#include "fusenas/autotune/genetic.hpp"
#include "fusenas/autotune/latency.hpp"
#include "fusenas/autotune/tuner.hpp"
#include "fusenas/error.hpp"
#include "fusenas/fusion/fusion.hpp"
#include "fusenas/ir/interpreter.hpp"
#include "fusenas/ir/shape_inference.hpp"

using namespace fusenas;
using namespace fusenas::autotune;
using ir::OpKind;
using ir::TensorGraph;

namespace {

TensorGraph fuse_add_graph(std::int64_t m, std::int64_t n) {
  TensorGraph g;
  const NodeId a = g.add_input({m, n}), b = g.add_input({m, n});
  const NodeId c = g.add_input({1, n}), d = g.add_input({1, n});
  g.set_outputs({g.add(OpKind::Add, {g.add(OpKind::Mul, {a, b}), g.add(OpKind::Mul, {c, d})})});
  return ir::infer_shapes(g);
}

double count_nonzero(const Chromosome& c) {
  return static_cast<double>(std::count_if(c.begin(), c.end(), [](int v) { return v != 0; }));
}

// Separable convex latency over (unroll, loop order, workers) with 8 choices each.
double synthetic_latency(const Chromosome& c) {
  const double u = c[0] - 5.0, o = c[1] - 2.0, w = c[2] - 6.0;
  return 10.0 + 0.4 * u * u + 0.9 * o * o + 0.25 * w * w;
}

// Smallest of three medians; damps scheduler bursts on a shared host.
double steady_median(codegen::CompiledGraph& cg, const ir::Bindings& bind) {
  double best = INFINITY;
  for (int i = 0; i < 3; ++i) best = std::min(best, measure_latency(cg, bind, {30, 3}).median_ms);
  return best;
}

}  // namespace

TEST_CASE("summarize: median, p90 and order invariance") {
  const auto s = summarize({4, 1, 3, 2}, 0);
  CHECK(s.median_ms == 2.5);
  CHECK(s.runs == 4);

  std::vector<double> xs(10);
  for (int i = 0; i < 10; ++i) xs[static_cast<std::size_t>(i)] = i + 1;
  CHECK(summarize(xs, 0).p90_ms == 9);
  CHECK(summarize(xs, 0).median_ms == 5.5);

  std::mt19937 rng(7);
  std::vector<double> odd{3, 9, 1, 7, 5};
  for (int t = 0; t < 20; ++t) {
    std::shuffle(odd.begin(), odd.end(), rng);
    CHECK(summarize(odd, 0).median_ms == 5);
  }
  odd.back() = 1e9;  // replace one sample with an outlier
  const double with_outlier = summarize(odd, 0).median_ms;
  CHECK(with_outlier >= 3);
  CHECK(with_outlier <= 9);
}

TEST_CASE("measure_latency: defaults, argument errors and failing runs") {
  const LatencyConfig def;
  CHECK(def.runs == 100);
  CHECK(def.warmup == 10);

  int calls = 0;
  const auto s = measure_latency([&] { ++calls; }, {7, 3});
  CHECK(calls == 10);
  CHECK(s.samples_ms.size() == 7);
  CHECK(s.warmup == 3);

  CHECK_THROWS_AS(measure_latency([] {}, {0, 0}), Error);
  try {
    int n = 0;
    measure_latency([&] { if (++n == 4) throw std::runtime_error("boom"); }, {5, 1});
    FAIL("expected an execution error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Execution);
    CHECK(std::string(e.what()).find("run 2") != std::string::npos);
  }
}

TEST_CASE("measure_latency: a 5 ms stub measures at least 5 ms") {
  const auto s = measure_latency([] { std::this_thread::sleep_for(std::chrono::milliseconds(5)); },
                                 {5, 1});
  CHECK(s.median_ms >= 5.0);
  CHECK(s.p90_ms >= s.median_ms);
}

TEST_CASE("measure_latency: timed regions never overlap") {
  std::atomic<int> active{0}, worst{0};
  auto body = [&] {
    const int now = ++active;
    worst = std::max(worst.load(), now);
    std::this_thread::sleep_for(std::chrono::microseconds(200));
    --active;
  };
  std::thread t1([&] { measure_latency(body, {20, 0}); });
  std::thread t2([&] { measure_latency(body, {20, 0}); });
  t1.join();
  t2.join();
  CHECK(worst == 1);
}

TEST_CASE("GAConfig and ga_search argument errors") {
  const std::vector<int> sizes{2, 2};
  auto f = [](const Chromosome&) { return 0.0; };
  CHECK_THROWS_AS(ga_search({}, f, {}), Error);
  CHECK_THROWS_AS(ga_search(std::vector<int>{2, 0}, f, {}), Error);
  GAConfig bad;
  bad.elitism_count = 0;
  CHECK_THROWS_AS(ga_search(sizes, f, bad), Error);
  bad = {};
  bad.mutation_rate = 1.5;
  CHECK_THROWS_AS(ga_search(sizes, f, bad), Error);
  bad = {};
  bad.population_size = 2;
  bad.elitism_count = 3;
  CHECK_THROWS_AS(ga_search(sizes, f, bad), Error);
}

TEST_CASE("ga_search: seeded runs are bit-reproducible and history never rises") {
  const std::vector<int> sizes(10, 5);
  auto f = [](const Chromosome& c) {
    double s = 0;
    for (std::size_t i = 0; i < c.size(); ++i) s += std::abs(c[i] - static_cast<int>(i % 5)) * (1.0 + 0.1 * i);
    return s;
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GAConfig cfg;
    cfg.rng_seed = seed;
    const auto a = ga_search(sizes, f, cfg), b = ga_search(sizes, f, cfg);
    CHECK(a.best == b.best);
    CHECK(a.history == b.history);
    CHECK(a.history.size() == static_cast<std::size_t>(cfg.generations) + 1);
    CHECK(std::is_sorted(a.history.rbegin(), a.history.rend()));
    CHECK(a.best_fitness == f(a.best));
    CHECK(a.best_fitness == a.history.back());
  }
}

TEST_CASE("ga_search: a lone individual without variation stagnates") {
  GAConfig cfg;
  cfg.population_size = 1;
  cfg.crossover_rate = 0;
  cfg.mutation_rate = 0;
  cfg.generations = 15;
  std::vector<Chromosome> seen;
  const auto r = ga_search(std::vector<int>(6, 4),
                           [&](const Chromosome& c) {
                             seen.push_back(c);
                             return count_nonzero(c);
                           },
                           cfg);
  REQUIRE(seen.size() == 1);  // every later generation repeats the cached initial
  CHECK(r.best == seen.front());
  CHECK(std::all_of(r.history.begin(), r.history.end(),
                    [&](double h) { return h == count_nonzero(seen.front()); }));
}

TEST_CASE("ga_search: inverted one-max over 12 binary genes") {
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GAConfig cfg;
    cfg.generations = 50;
    cfg.rng_seed = seed;
    const auto r = ga_search(std::vector<int>(12, 2), count_nonzero, cfg);
    solved += r.best_fitness == 0.0;
  }
  CHECK(solved >= 19);
}

TEST_CASE("ga_search: synthetic latency model against exhaustive search") {
  const std::vector<int> sizes{8, 8, 8};
  double optimum = INFINITY;
  for (int u = 0; u < 8; ++u) {
    for (int o = 0; o < 8; ++o) {
      for (int w = 0; w < 8; ++w) optimum = std::min(optimum, synthetic_latency({u, o, w}));
    }
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GAConfig cfg;
    cfg.rng_seed = seed;
    const auto r = ga_search(sizes, synthetic_latency, cfg);
    CHECK(r.best_fitness <= optimum * 1.05);
  }
}

TEST_CASE("tune_graph: single-variant graph") {
  TensorGraph g;
  const NodeId a = g.add_input({256}), b = g.add_input({256});
  g.set_outputs({g.add(OpKind::Gelu, {g.add(OpKind::Add, {a, b})})});
  g = ir::infer_shapes(g);
  codegen::CompiledGraph cg(fusion::fuse_graph(g).fused, {{1}});
  REQUIRE(cg.block_ids().size() == 1);
  const NodeId block = cg.block_ids().front();
  REQUIRE(cg.block(block).variants.size() == 1);

  TuneConfig cfg;
  cfg.ga.generations = 3;
  cfg.ga.population_size = 4;
  cfg.final_latency = {5, 1};
  cfg.allow_per_op = false;
  auto r = tune_graph(cg, ir::random_bindings(cg.graph(), 1), cfg);
  CHECK(r.assignment.at(block) == 0);
  CHECK(r.per_op.empty());
  CHECK(std::is_sorted(r.history.rbegin(), r.history.rend()));
  const auto report = tune_report(cg, r);
  CHECK(report.find("block " + std::to_string(block) + " variant 0") != std::string::npos);
  CHECK(report.find("generation 3 best_ms") != std::string::npos);
  r.per_op.insert(block);
  CHECK(tune_report(cg, r).find("block " + std::to_string(block) + " per-op") != std::string::npos);
}

TEST_CASE("tune_graph: the order gene can switch a block to per-op execution") {
  const auto g = fuse_add_graph(16, 16);
  codegen::CompiledGraph cg(fusion::fuse_graph(g).fused);
  const auto bind = ir::random_bindings(g, 4);
  TuneConfig cfg;
  cfg.tune_workers = false;
  cfg.ga.generations = 4;
  cfg.ga.population_size = 10;
  cfg.fitness_latency = {1, 0};
  cfg.final_latency = {1, 0};
  const auto r = tune_graph(cg, bind, cfg);
  const NodeId block = cg.block_ids().front();
  CHECK(cg.per_op(block) == (r.per_op.count(block) == 1));
  CHECK(cg.run(bind) == codegen::CompiledGraph(fusion::fuse_graph(g).fused).run(bind));
  cg.set_per_op(block, true);
  CHECK(cg.run(bind).at(6) == ir::reference_execute(g, bind).at(6));
}

TEST_CASE("tune_graph: selected variants dominate the rejected ones") {
  // Unroll siblings of one loop order differ by less than wall-clock noise
  // here, so dominance is asserted against every other loop order and only
  // reported for siblings. Ratios use the 1.10 noise budget.
  for (auto [m, n] : {std::pair<std::int64_t, std::int64_t>{2048, 64}, {64, 2048}}) {
    CAPTURE(m);
    const auto g = fuse_add_graph(m, n);
    codegen::CompiledGraph cg(fusion::fuse_graph(g).fused);
    const auto bind = ir::random_bindings(g, 11);
    TuneConfig cfg;
    cfg.tune_workers = false;
    cfg.allow_per_op = false;  // compares fused variants only
    cfg.ga.generations = 8;
    cfg.ga.population_size = 8;
    cfg.fitness_latency = {30, 3};
    cfg.final_latency = {30, 3};
    const auto r = tune_graph(cg, bind, cfg);
    CHECK(std::is_sorted(r.history.rbegin(), r.history.rend()));
    REQUIRE(r.assignment.size() == 1);
    const auto [block, chosen] = *r.assignment.begin();
    const auto& variants = cg.block(block).variants;

    auto median_of = [&](std::size_t v) {
      cg.select(block, v);
      return steady_median(cg, bind);
    };
    const double selected = median_of(chosen);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (v == chosen) continue;
      CAPTURE(v);
      const double other = median_of(v);
      if (variants[v].order != variants[chosen].order) {
        CHECK(selected <= 1.10 * other);
      } else {
        MESSAGE("unroll sibling " << variants[v].unroll << ": " << other << " ms vs selected "
                                  << selected << " ms");
      }
    }
    cg.select(block, chosen);
  }
}

TEST_CASE("tune_graph: tuned graph is no slower than the unfused baseline") {
  const auto g = fuse_add_graph(512, 512);
  const auto bind = ir::random_bindings(g, 2);
  codegen::CompiledGraph fused(fusion::fuse_graph(g).fused);
  codegen::CompiledGraph unfused(g);
  TuneConfig cfg;
  cfg.ga.generations = 5;
  cfg.ga.population_size = 8;
  cfg.final_latency = {40, 5};
  tune_graph(fused, bind, cfg);
  CHECK(steady_median(fused, bind) <= 1.10 * steady_median(unfused, bind));
}
