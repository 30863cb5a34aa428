#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "vrql/mdp.hpp"

namespace vrql {

// One generative-model observation: for every (x,u) an independent next
// state Z(x,u) ~ P_u(.|x) and reward R(x,u) ~ Normal(r(x,u), reward_noise^2).
struct TransitionSample {
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> next_state;
  Eigen::MatrixXd reward;
};

// Deterministic mix of a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Reproducible sampler over an MDP. Transitions and rewards are drawn from
// two generator substreams derived from the one seed, so conditioning on the
// realized transitions never perturbs the reward stream. Tables are filled
// state-major. A zero noise level consumes no reward-stream draws and the
// reward table equals the mean table exactly.
class SeededSampler {
 public:
  SeededSampler(const TabularMDP& mdp, std::uint64_t seed,
                std::optional<std::int64_t> budget = std::nullopt);

  TransitionSample draw();
  void draw_into(TransitionSample& out);

  std::int64_t draws_consumed() const { return draws_; }
  std::optional<std::int64_t> budget() const { return budget_; }
  std::uint64_t seed() const { return seed_; }
  const TabularMDP& mdp() const { return *mdp_; }

 private:
  double uniform01(std::mt19937_64& rng);
  double standard_normal();

  const TabularMDP* mdp_;
  std::uint64_t seed_;
  std::optional<std::int64_t> budget_;
  std::int64_t draws_ = 0;
  std::mt19937_64 transition_rng_;
  std::mt19937_64 reward_rng_;
};

// Single-sample empirical operator:
// T_hat(Q)(x,u) = R(x,u) + gamma * max_u' Q(Z(x,u), u').
QFunction empirical_bellman(const TransitionSample& sample, const TabularMDP& mdp, const QFunction& q);
void empirical_bellman_into(const TransitionSample& sample, const TabularMDP& mdp, const QFunction& q,
                            QFunction& out);

// Average of n independent empirical operator applications at fixed Q.
QFunction monte_carlo_bellman(SeededSampler& sampler, const QFunction& q, std::int64_t n);

// Sampled policy transition: (Z^pi Q)(x,u) = Q(Z(x,u), pi(Z(x,u))).
QFunction apply_sampled_policy_transition(const TransitionSample& sample, const Policy& pi, const QFunction& q);

}  // namespace vrql
