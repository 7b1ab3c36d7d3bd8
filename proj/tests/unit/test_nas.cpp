#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "fusenas/error.hpp"
#include "fusenas/ir/transformer.hpp"
#include "fusenas/nas/controller.hpp"
#include "fusenas/nas/reward.hpp"
#include "fusenas/nas/search.hpp"
#include "fusenas/nas/trainer.hpp"

using namespace fusenas;
using namespace fusenas::nas;

namespace {

ArchSample make_arch(int l, int h, int f) { return {l, h, f, std::max(1, h / 64)}; }

// Counts calls and remembers which architectures were trained.
class RecordingTrainer final : public TrainerIface {
 public:
  double evaluate(const ArchSample& arch) override {
    seen.push_back(arch);
    return surrogate_accuracy(arch);
  }
  std::vector<ArchSample> seen;
};

SearchConfig small_config(std::uint64_t seed) {
  SearchConfig cfg;
  cfg.episodes_per_update = 8;
  cfg.updates_phase1 = 6;
  cfg.updates_phase2 = 6;
  cfg.mode_samples = 200;
  cfg.seed = seed;
  return cfg;
}

// Feasible architecture with the highest within-budget reward at baseline 0,
// found by enumerating the whole space.
ArchSample planted_optimum(const SearchSpace& space, const CompileAndMeasure& measure) {
  ArchSample best;
  double best_r = -INFINITY;
  for (int l : space.layer_choices) {
    for (int h : space.hidden_choices) {
      for (int f : space.ffn_choices) {
        const auto a = make_arch(l, h, f);
        if (!a.is_valid()) continue;
        const double lat = measure(a).latency_ms;
        if (lat > space.latency_budget_ms) continue;
        const double r = surrogate_accuracy(a) + lat / space.latency_budget_ms;
        if (r > best_r) best_r = r, best = a;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("compute_reward: tabulated cases") {
  CHECK(compute_reward(0.3, 150, 100, 0.2) == -1.5);
  CHECK(compute_reward(0.9, 150, 100, 0.0) == -1.5);
  CHECK(compute_reward(0.7, 100, 100, 0.7) == 1.0);
  CHECK(compute_reward(0.8, 50, 100, 0.8) == 0.5);
  CHECK(compute_reward(0.8, 50, 100, 0.8, RewardMode::Corrected) == 0.5);
  CHECK(compute_reward(0.8, 25, 100, 0.8, RewardMode::Corrected) == 0.75);
  CHECK_THROWS_AS(compute_reward(0.5, 10, 0, 0), Error);
  CHECK_THROWS_AS(compute_reward(1.5, 10, 10, 0), Error);
}

TEST_CASE("compute_reward: over budget is always negative") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> acc(0, 1), budget(1, 500), excess(1e-9, 4);
  for (int i = 0; i < 10000; ++i) {
    const double rl = budget(rng), l = rl * (1 + excess(rng));
    CHECK(compute_reward(acc(rng), l, rl, acc(rng)) < 0);
  }
}

TEST_CASE("baseline_update: examples and closed form") {
  CHECK(baseline_update(0, 1, 0.9) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(baseline_update(0.37, 0.37, 0.9) == 0.37);
  CHECK_THROWS_AS(baseline_update(0, 1, 1.0), Error);
  const double b0 = 0.2, a = 0.85, beta = 0.9;
  double b = b0;
  for (int k = 1; k <= 200; ++k) {
    b = baseline_update(b, a, beta);
    CHECK(std::abs(b - (a - (a - b0) * std::pow(beta, k))) <= 1e-12);
  }
}

TEST_CASE("controller_sample: zero state samples uniformly") {
  const SearchSpace space;
  const auto heads = space.head_sizes();
  const auto s = ControllerState::zeros({heads.begin(), heads.end()});
  std::mt19937_64 rng(5);
  std::array<std::map<int, int>, kNumDecisions> freq;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto smp = controller_sample(s, space, rng);
    for (std::size_t d = 0; d < kNumDecisions; ++d) ++freq[d][smp.trajectory.actions[d]];
  }
  for (std::size_t d = 0; d < kNumDecisions; ++d) {
    const double uniform = 1.0 / heads[d];
    for (int c = 0; c < heads[d]; ++c) {
      CAPTURE(d);
      CHECK(std::abs(freq[d][c] / double(n) - uniform) <= 0.03);
    }
  }
}

TEST_CASE("controller_sample: determinism, decision order and shape errors") {
  const SearchSpace space;
  const auto heads = space.head_sizes();
  const auto s = ControllerState::random({heads.begin(), heads.end()}, 9, 0.5);
  std::mt19937_64 r1(42), r2(42);
  for (int i = 0; i < 50; ++i) {
    const auto a = controller_sample(s, space, r1), b = controller_sample(s, space, r2);
    CHECK(a.arch == b.arch);
    const auto& t = a.trajectory.actions;
    CHECK(a.arch == space.arch({t[0], t[1], t[2]}));
    CHECK(a.arch.num_layers == space.layer_choices[static_cast<std::size_t>(t[0])]);
  }
  std::mt19937_64 rng(1);
  ForcedActions forced{};
  forced[kHidden] = 2;
  for (int i = 0; i < 20; ++i) {
    const auto smp = controller_sample(s, space, rng, forced);
    CHECK(smp.trajectory.actions[kHidden] == 2);
    CHECK(smp.trajectory.forced[kHidden]);
    CHECK(smp.trajectory.log_probs[kHidden] == 0.0);
  }
  const auto wrong = ControllerState::zeros({2, 2, 2});
  CHECK_THROWS_AS(controller_sample(wrong, space, rng), Error);
}

TEST_CASE("controller: probabilities normalise and log-probs are non-positive") {
  const SearchSpace space;
  const auto heads = space.head_sizes();
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = ControllerState::random({heads.begin(), heads.end()}, seed, 2.0);
    const auto smp = controller_sample(s, space, rng);
    for (std::size_t t = 0; t < kNumDecisions; ++t) {
      const auto& p = smp.trajectory.probs[t];
      CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
      CHECK((p.array() >= 0).all());
      CHECK(std::isfinite(smp.trajectory.log_probs[t]));
      CHECK(smp.trajectory.log_probs[t] <= 0.0);
      CHECK(smp.trajectory.log_probs[t] ==
            doctest::Approx(std::log(p[smp.trajectory.actions[t]])).epsilon(1e-12));
    }
  }
}

TEST_CASE("ControllerState: flatten round trip") {
  const auto s = ControllerState::random({3, 4, 2}, 2, 0.3, 5);
  CHECK(s.head_sizes() == std::vector<int>{3, 4, 2});
  const auto theta = s.flatten();
  CHECK(static_cast<std::size_t>(theta.size()) == s.num_params());
  auto t = ControllerState::zeros({3, 4, 2}, 5);
  t.unflatten(theta);
  CHECK(t.flatten() == theta);
  CHECK_THROWS_AS(t.unflatten(theta.head(3)), Error);
}

TEST_CASE("policy_gradient matches central finite differences") {
  // Two heads of two choices; a few episodes with mixed-sign advantages.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    const auto s = ControllerState::random({2, 2}, seed, 0.8, 4);
    const std::vector<ScoredActions> batch{{{0, 1}, {false, false}, 0.7},
                                           {{1, 1}, {false, false}, -1.3},
                                           {{1, 0}, {false, false}, 0.4},
                                           {{0, 0}, {true, false}, 2.0}};
    const Eigen::VectorXd grad = policy_gradient(s, batch);
    const Eigen::VectorXd theta = s.flatten();
    const double eps = 1e-5;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      auto plus = s, minus = s;
      Eigen::VectorXd tp = theta, tm = theta;
      tp[i] += eps;
      tm[i] -= eps;
      plus.unflatten(tp);
      minus.unflatten(tm);
      const double fd = (policy_objective(plus, batch) - policy_objective(minus, batch)) / (2 * eps);
      const double denom = std::max(std::abs(fd) + std::abs(grad[i]), 1e-8);
      worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("reinforce_update: zero advantage, positive advantage and non-finite gradients") {
  auto s = ControllerState::random({3, 4}, 4, 0.3, 6);
  const auto before = s.flatten();
  reinforce_update(s, {{{0, 1}, {false, false}, 0.0}, {{2, 3}, {false, false}, 0.0}}, 0.5);
  CHECK(s.flatten() == before);

  const std::vector<int> actions{2, 1};
  const std::vector<bool> free(2, false);
  const auto p0 = controller_score(s, actions, free);
  reinforce_update(s, {{actions, free, 1.0}}, 0.1);
  const auto p1 = controller_score(s, actions, free);
  CHECK(p1.probs[0][2] > p0.probs[0][2]);
  CHECK(p1.log_probs[0] + p1.log_probs[1] > p0.log_probs[0] + p0.log_probs[1]);

  try {
    reinforce_update(s, {{actions, free, 1.0}, {actions, free, NAN}}, 0.1);
    FAIL("expected NonFiniteGradient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteGradient);
    CHECK(std::string(e.what()).find("episode 1") != std::string::npos);
  }
}

TEST_CASE("surrogate_accuracy: calibration, clamp and monotonicity") {
  CHECK(ir::parameter_count(make_arch(12, 768, 3072)) == 84934656);
  CHECK(surrogate_accuracy(make_arch(12, 768, 3072)) == doctest::Approx(0.846).epsilon(1e-9));
  CHECK(surrogate_accuracy({1, 1, 1, 1}) >= 0.0);
  CHECK(surrogate_accuracy({1, 1, 1, 1}) == 0.0);
  const SearchSpace space;
  for (int h : space.hidden_choices) {
    for (int f : space.ffn_choices) {
      if (f < h) continue;
      double prev = -1;
      for (int l : space.layer_choices) {
        const double a = surrogate_accuracy(make_arch(l, h, f));
        CHECK(a >= prev);
        prev = a;
      }
    }
  }
  for (int l : space.layer_choices) {
    double prev = -1;
    for (int f : space.ffn_choices) {
      if (f < 256) continue;
      const double a = surrogate_accuracy(make_arch(l, 256, f));
      CHECK(a >= prev);
      prev = a;
    }
  }
  SurrogateTrainer noisy(kSurrogateMaxAccuracy, kSurrogateScale, 0.02, 7);
  const auto arch = make_arch(6, 384, 1536);
  const double first = noisy.evaluate(arch);
  CHECK(noisy.evaluate(arch) == first);
  CHECK(noisy.calls() == 2);
}

TEST_CASE("ExternalCommandTrainer: placeholders, parsing and failures") {
  const auto arch = make_arch(4, 256, 1024);
  ExternalCommandTrainer echo("echo acc {layers} {hidden} {ffn} {heads} | awk '{print 0.5}'");
  CHECK(echo.command_for(arch).find("acc 4 256 1024 4") != std::string::npos);
  CHECK(echo.evaluate(arch) == 0.5);
  CHECK(ExternalCommandTrainer("echo accuracy: 0.75").evaluate(arch) == 0.75);
  CHECK_THROWS_AS(ExternalCommandTrainer("echo 1.5").evaluate(arch), Error);
  CHECK_THROWS_AS(ExternalCommandTrainer("echo none").evaluate(arch), Error);
  CHECK_THROWS_AS(ExternalCommandTrainer("exit 3").evaluate(arch), Error);
}

TEST_CASE("search: seeded determinism and consistent episodes") {
  const SearchSpace space;
  const auto measure = flops_latency_model(space.seq_len, 0.0, 10.0);
  SurrogateTrainer t1, t2;
  const auto a = search(space, t1, measure, small_config(3));
  const auto b = search(space, t2, measure, small_config(3));
  CHECK(history_log(a.history) == history_log(b.history));
  CHECK(a.best == b.best);
  CHECK(a.history.size() == 8u * 12u);
  for (const auto& e : a.history) {
    for (double lp : e.log_probs) CHECK(lp <= 0.0);
    if (e.feasible) {
      REQUIRE(e.accuracy);
      CHECK(e.reward == compute_reward(*e.accuracy, e.feedback.latency_ms,
                                       space.latency_budget_ms, e.baseline));
    } else {
      CHECK(!e.accuracy);
      CHECK(e.reward < 0);
    }
    if (e.phase == 2) CHECK(e.arch.num_layers == a.phase1_layers);
    if (e.phase == 1) {
      CHECK(e.arch.hidden_size == space.hidden_choices[static_cast<std::size_t>(space.midpoint(kHidden))]);
    }
  }
}

TEST_CASE("search: over-budget architectures are never trained") {
  SearchSpace space;
  space.latency_budget_ms = 60;
  const auto measure = flops_latency_model(space.seq_len, 0.0, 10.0);
  RecordingTrainer trainer;
  const auto r = search(space, trainer, measure, small_config(1));
  REQUIRE(!r.exhausted);
  CHECK(r.trainer_calls == trainer.seen.size());
  for (const auto& arch : trainer.seen) CHECK(measure(arch).latency_ms <= space.latency_budget_ms);
  CHECK(measure(r.best).latency_ms <= space.latency_budget_ms);
  bool any_infeasible = false;
  for (const auto& e : r.history) any_infeasible = any_infeasible || !e.feasible;
  CHECK(any_infeasible);
}

TEST_CASE("search: infeasible budget exhausts") {
  SearchSpace space;
  space.latency_budget_ms = 1e-3;
  const auto measure = flops_latency_model(space.seq_len, 0.0, 10.0);
  RecordingTrainer trainer;
  const auto r = search(space, trainer, measure, small_config(2));
  CHECK(r.exhausted);
  CHECK(trainer.seen.empty());
  for (const auto& e : r.history) CHECK(e.reward < 0);
  CHECK(r.best.is_valid());
}

TEST_CASE("search: planted optimum on a few seeds") {
  const SearchSpace space;
  const auto measure = flops_latency_model(space.seq_len, 0.0, 10.0);
  const auto want = planted_optimum(space, measure);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SearchConfig cfg;
    cfg.seed = seed;
    SurrogateTrainer trainer;
    const auto r = search(space, trainer, measure, cfg);
    CHECK(r.mode == want);
    CHECK(r.mode_frequency >= 0.9);
    CHECK(measure(r.best).latency_ms <= space.latency_budget_ms);
  }
}

TEST_CASE("SearchConfig and SearchSpace validation") {
  SearchConfig cfg;
  cfg.episodes_per_update = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.baseline_decay = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  SearchSpace space;
  space.ffn_choices.clear();
  CHECK_THROWS_AS(space.validate(), Error);
  space = {};
  space.latency_budget_ms = 0;
  CHECK_THROWS_AS(space.validate(), Error);
}
