#include "vrql/sampling.hpp"

#include <cmath>

namespace vrql {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kTransitionStream = 0x7472616e73ull;
constexpr std::uint64_t kRewardStream = 0x726577617264ull;

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t state = base ^ (0xD1B54A32D192ED03ull * (index + 1));
  std::uint64_t out = splitmix64(state);
  out ^= splitmix64(state);
  return out;
}

SeededSampler::SeededSampler(const TabularMDP& mdp, std::uint64_t seed, std::optional<std::int64_t> budget)
    : mdp_(&mdp),
      seed_(seed),
      budget_(budget),
      transition_rng_(derive_seed(seed, kTransitionStream)),
      reward_rng_(derive_seed(seed, kRewardStream)) {}

double SeededSampler::uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double SeededSampler::standard_normal() {
  // Box-Muller without a cached spare keeps the reward stream's draw
  // positions independent of call history and of the standard library.
  const double u1 = 1.0 - uniform01(reward_rng_);
  const double u2 = uniform01(reward_rng_);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

TransitionSample SeededSampler::draw() {
  TransitionSample sample;
  draw_into(sample);
  return sample;
}

void SeededSampler::draw_into(TransitionSample& out) {
  if (budget_ && draws_ >= *budget_) throw budget_error(*budget_, draws_);
  const Eigen::Index s = mdp_->num_states();
  const Eigen::Index a = mdp_->num_actions();
  out.next_state.resize(s, a);
  out.reward.resize(s, a);
  for (Eigen::Index x = 0; x < s; ++x) {
    for (Eigen::Index u = 0; u < a; ++u) {
      const double point = uniform01(transition_rng_);
      const auto& row = mdp_->kernel(u);
      double cum = 0.0;
      Eigen::Index pick = s - 1;
      for (Eigen::Index y = 0; y < s; ++y) {
        cum += row(x, y);
        if (point < cum) {
          pick = y;
          break;
        }
      }
      out.next_state(x, u) = pick;
    }
  }
  if (mdp_->reward_noise() == 0.0) {
    out.reward = mdp_->rewards();
  } else {
    for (Eigen::Index x = 0; x < s; ++x)
      for (Eigen::Index u = 0; u < a; ++u)
        out.reward(x, u) = mdp_->rewards()(x, u) + mdp_->reward_noise() * standard_normal();
  }
  ++draws_;
}

void empirical_bellman_into(const TransitionSample& sample, const TabularMDP& mdp, const QFunction& q,
                            QFunction& out) {
  check_shape(mdp, q, "empirical_bellman");
  if (sample.next_state.rows() != mdp.num_states() || sample.next_state.cols() != mdp.num_actions())
    throw dimension_error("empirical_bellman: sample shape does not match MDP");
  out.resize(mdp.num_states(), mdp.num_actions());
  const double g = mdp.gamma();
  for (Eigen::Index x = 0; x < mdp.num_states(); ++x)
    for (Eigen::Index u = 0; u < mdp.num_actions(); ++u)
      out(x, u) = sample.reward(x, u) + g * q.row(sample.next_state(x, u)).maxCoeff();
}

QFunction empirical_bellman(const TransitionSample& sample, const TabularMDP& mdp, const QFunction& q) {
  QFunction out;
  empirical_bellman_into(sample, mdp, q, out);
  return out;
}

QFunction monte_carlo_bellman(SeededSampler& sampler, const QFunction& q, std::int64_t n) {
  if (n < 1) throw validation_error("monte_carlo_bellman requires n >= 1");
  const TabularMDP& mdp = sampler.mdp();
  check_shape(mdp, q, "monte_carlo_bellman");
  QFunction sum = QFunction::Zero(mdp.num_states(), mdp.num_actions());
  TransitionSample ws;
  QFunction t_hat;
  for (std::int64_t i = 0; i < n; ++i) {
    sampler.draw_into(ws);
    empirical_bellman_into(ws, mdp, q, t_hat);
    sum += t_hat;
  }
  return sum / static_cast<double>(n);
}

QFunction apply_sampled_policy_transition(const TransitionSample& sample, const Policy& pi, const QFunction& q) {
  if (sample.next_state.rows() != q.rows() || pi.num_states() != q.rows())
    throw dimension_error("apply_sampled_policy_transition: shape mismatch");
  QFunction out(sample.next_state.rows(), sample.next_state.cols());
  for (Eigen::Index x = 0; x < out.rows(); ++x)
    for (Eigen::Index u = 0; u < out.cols(); ++u) {
      const Eigen::Index z = sample.next_state(x, u);
      out(x, u) = q(z, pi(z));
    }
  return out;
}

}  // namespace vrql
