#include "fusenas/nas/controller.hpp"

#include <cmath>

namespace fusenas::nas {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ControllerState ControllerState::zeros(const std::vector<int>& head_sizes, int width) {
  if (width < 1) throw Error(ErrorCode::InvalidArgument, "controller width must be positive");
  ControllerState s;
  s.wx = MatrixXd::Zero(width, width);
  s.wh = MatrixXd::Zero(width, width);
  s.bias = VectorXd::Zero(width);
  s.start = VectorXd::Zero(width);
  for (int n : head_sizes) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "head needs at least one choice");
    s.out_w.push_back(MatrixXd::Zero(n, width));
    s.out_b.push_back(VectorXd::Zero(n));
    s.embedding.push_back(MatrixXd::Zero(n, width));
  }
  return s;
}

ControllerState ControllerState::random(const std::vector<int>& head_sizes, std::uint64_t seed,
                                        double scale, int width) {
  ControllerState s = zeros(head_sizes, width);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  VectorXd theta(s.num_params());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = u(rng);
  s.unflatten(theta);
  return s;
}

std::vector<int> ControllerState::head_sizes() const {
  std::vector<int> out;
  for (const auto& o : out_w) out.push_back(static_cast<int>(o.rows()));
  return out;
}

std::size_t ControllerState::num_params() const {
  std::size_t n = static_cast<std::size_t>(wx.size() + wh.size() + bias.size() + start.size());
  for (std::size_t h = 0; h < out_w.size(); ++h) {
    n += static_cast<std::size_t>(out_w[h].size() + out_b[h].size() + embedding[h].size());
  }
  return n;
}

namespace {

template <class F>
void for_each_block(ControllerState& s, F&& f) {
  f(s.wx.data(), s.wx.size());
  f(s.wh.data(), s.wh.size());
  f(s.bias.data(), s.bias.size());
  f(s.start.data(), s.start.size());
  for (std::size_t h = 0; h < s.out_w.size(); ++h) {
    f(s.out_w[h].data(), s.out_w[h].size());
    f(s.out_b[h].data(), s.out_b[h].size());
    f(s.embedding[h].data(), s.embedding[h].size());
  }
}

}  // namespace

VectorXd ControllerState::flatten() const {
  VectorXd theta(num_params());
  Eigen::Index pos = 0;
  for_each_block(const_cast<ControllerState&>(*this), [&](double* p, Eigen::Index n) {
    theta.segment(pos, n) = Eigen::Map<const VectorXd>(p, n);
    pos += n;
  });
  return theta;
}

void ControllerState::unflatten(const VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != num_params()) {
    throw Error(ErrorCode::InvalidArgument, "parameter vector has the wrong length");
  }
  Eigen::Index pos = 0;
  for_each_block(*this, [&](double* p, Eigen::Index n) {
    Eigen::Map<VectorXd>(p, n) = theta.segment(pos, n);
    pos += n;
  });
}

namespace {

VectorXd softmax(const VectorXd& z) {
  const VectorXd e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Forward pass that keeps what backpropagation needs.
struct Tape {
  std::vector<VectorXd> x, h;  // inputs and hidden states per step
  Trajectory traj;
};

template <class Choose>
Tape forward(const ControllerState& s, std::size_t steps, Choose&& choose) {
  if (steps > s.out_w.size()) throw Error(ErrorCode::InvalidArgument, "more steps than heads");
  Tape tape;
  VectorXd h_prev = VectorXd::Zero(s.width());
  VectorXd x = s.start;
  for (std::size_t t = 0; t < steps; ++t) {
    const VectorXd h = (s.wx * x + s.wh * h_prev + s.bias).array().tanh().matrix();
    const VectorXd p = softmax(s.out_w[t] * h + s.out_b[t]);
    const auto [a, forced] = choose(t, p);
    if (a < 0 || a >= p.size()) throw Error(ErrorCode::InvalidArgument, "action outside its head");
    tape.x.push_back(x);
    tape.h.push_back(h);
    tape.traj.actions.push_back(a);
    tape.traj.forced.push_back(forced);
    tape.traj.log_probs.push_back(forced ? 0.0 : std::log(p[a]));
    tape.traj.probs.push_back(p);
    x = s.embedding[t].row(a).transpose();
    h_prev = h;
  }
  return tape;
}

}  // namespace

Trajectory controller_rollout(const ControllerState& s,
                              const std::vector<std::optional<int>>& forced,
                              std::mt19937_64* rng) {
  return forward(s, forced.size(),
                 [&](std::size_t t, const VectorXd& p) -> std::pair<int, bool> {
                   if (forced[t]) return {*forced[t], true};
                   if (!rng) {
                     Eigen::Index best;
                     p.maxCoeff(&best);
                     return {static_cast<int>(best), false};
                   }
                   std::discrete_distribution<int> d(p.data(), p.data() + p.size());
                   return {d(*rng), false};
                 })
      .traj;
}

Trajectory controller_score(const ControllerState& s, const std::vector<int>& actions,
                            const std::vector<bool>& forced) {
  return forward(s, actions.size(), [&](std::size_t t, const VectorXd&) -> std::pair<int, bool> {
           return {actions[t], forced.empty() ? false : static_cast<bool>(forced[t])};
         })
      .traj;
}

ControllerSample controller_sample(const ControllerState& s, const SearchSpace& space,
                                   std::mt19937_64& rng, const ForcedActions& forced) {
  const auto sizes = space.head_sizes();
  const auto heads = s.head_sizes();
  if (heads.size() != sizes.size() || !std::equal(heads.begin(), heads.end(), sizes.begin())) {
    throw Error(ErrorCode::ShapeMismatch, "controller heads do not match the search space");
  }
  ControllerSample out;
  out.trajectory = controller_rollout(s, {forced.begin(), forced.end()}, &rng);
  std::array<int, kNumDecisions> a{};
  for (std::size_t t = 0; t < kNumDecisions; ++t) a[t] = out.trajectory.actions[t];
  out.arch = space.arch(a);
  return out;
}

double policy_objective(const ControllerState& s, const std::vector<ScoredActions>& batch) {
  double j = 0.0;
  for (const auto& e : batch) {
    const auto traj = controller_score(s, e.actions, e.forced);
    for (double lp : traj.log_probs) j += e.advantage * lp;
  }
  return j;
}

namespace {

/// Gradient of advantage · Σ_free log P for one episode.
ControllerState episode_gradient(const ControllerState& s, const ScoredActions& e) {
  ControllerState g = ControllerState::zeros(s.head_sizes(), s.width());
  const Tape tape = forward(s, e.actions.size(), [&](std::size_t t, const VectorXd&) {
    return std::pair<int, bool>{e.actions[t], e.forced.empty() ? false : static_cast<bool>(e.forced[t])};
  });
  const std::size_t steps = e.actions.size();
  VectorXd dh_next = VectorXd::Zero(s.width());  // gradient reaching h_t from step t+1
  for (std::size_t t = steps; t-- > 0;) {
    const VectorXd& h = tape.h[t];
    VectorXd dh = dh_next;
    if (!tape.traj.forced[t]) {
      VectorXd dlogits = -e.advantage * tape.traj.probs[t];
      dlogits[e.actions[t]] += e.advantage;
      g.out_w[t] += dlogits * h.transpose();
      g.out_b[t] += dlogits;
      dh += s.out_w[t].transpose() * dlogits;
    }
    const VectorXd dpre = dh.array() * (1.0 - h.array().square());
    const VectorXd h_prev = t > 0 ? tape.h[t - 1] : VectorXd::Zero(s.width());
    g.wx += dpre * tape.x[t].transpose();
    g.wh += dpre * h_prev.transpose();
    g.bias += dpre;
    const VectorXd dx = s.wx.transpose() * dpre;
    if (t == 0) {
      g.start += dx;
    } else {
      g.embedding[t - 1].row(e.actions[t - 1]) += dx.transpose();
    }
    dh_next = s.wh.transpose() * dpre;
  }
  return g;
}

}  // namespace

VectorXd policy_gradient(const ControllerState& s, const std::vector<ScoredActions>& batch) {
  VectorXd grad = VectorXd::Zero(s.num_params());
  for (const auto& e : batch) grad += episode_gradient(s, e).flatten();
  return grad;
}

void reinforce_update(ControllerState& s, const std::vector<ScoredActions>& batch,
                      double learning_rate) {
  if (batch.empty()) return;
  VectorXd grad = VectorXd::Zero(s.num_params());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const VectorXd g = episode_gradient(s, batch[i]).flatten();
    if (!g.allFinite()) {
      throw Error(ErrorCode::NonFiniteGradient,
                  "non-finite policy gradient in episode " + std::to_string(i));
    }
    grad += g;
  }
  s.unflatten(s.flatten() + (learning_rate / static_cast<double>(batch.size())) * grad);
}

}  // namespace fusenas::nas
