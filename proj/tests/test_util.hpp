#pragma once

// Shared generators and independent oracles for the test binaries.
// Test-only code; intentionally reimplements library quantities from their
// definitions so the tests do not assume the library's own algebra.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "vrql/mdp.hpp"

namespace testutil {

// Dense random MDP: kernel rows are normalized positive draws (every entry
// bounded away from zero), rewards uniform in [-1, 1].
inline vrql::TabularMDP random_mdp(Eigen::Index states, Eigen::Index actions, double gamma,
                                   double reward_noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<Eigen::MatrixXd> kernels(static_cast<std::size_t>(actions));
  for (auto& k : kernels) {
    k.resize(states, states);
    for (Eigen::Index x = 0; x < states; ++x) {
      double total = 0.0;
      for (Eigen::Index y = 0; y < states; ++y) {
        k(x, y) = expo(rng) + 1e-3;
        total += k(x, y);
      }
      k.row(x) /= total;
    }
  }
  Eigen::MatrixXd rewards(states, actions);
  for (Eigen::Index x = 0; x < states; ++x)
    for (Eigen::Index u = 0; u < actions; ++u) rewards(x, u) = unif(rng);
  return vrql::TabularMDP(gamma, std::move(kernels), std::move(rewards), reward_noise);
}

// Deterministic-kernel MDP: every row is one-hot at a random next state,
// zero reward noise.
inline vrql::TabularMDP random_deterministic_mdp(Eigen::Index states, Eigen::Index actions,
                                                 double gamma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, states - 1);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<Eigen::MatrixXd> kernels(static_cast<std::size_t>(actions));
  for (auto& k : kernels) {
    k = Eigen::MatrixXd::Zero(states, states);
    for (Eigen::Index x = 0; x < states; ++x) k(x, pick(rng)) = 1.0;
  }
  Eigen::MatrixXd rewards(states, actions);
  for (Eigen::Index x = 0; x < states; ++x)
    for (Eigen::Index u = 0; u < actions; ++u) rewards(x, u) = unif(rng);
  return vrql::TabularMDP(gamma, std::move(kernels), std::move(rewards), 0.0);
}

// Random Q-table with entries uniform in [-scale, scale].
inline vrql::QFunction random_q(Eigen::Index states, Eigen::Index actions, double scale,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-scale, scale);
  vrql::QFunction q(states, actions);
  for (Eigen::Index x = 0; x < states; ++x)
    for (Eigen::Index u = 0; u < actions; ++u) q(x, u) = unif(rng);
  return q;
}

// Truncated Neumann series sum_{t=0..terms} (gamma P^pi)^t, an independent
// stand-in for the exact resolvent (I - gamma P^pi)^{-1}.
inline Eigen::MatrixXd neumann_resolvent(const vrql::TabularMDP& mdp, const vrql::Policy& pi,
                                         int terms) {
  const Eigen::MatrixXd p = vrql::policy_transition_matrix(mdp, pi);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(p.rows(), p.cols());
  Eigen::MatrixXd pow = Eigen::MatrixXd::Identity(p.rows(), p.cols());
  for (int t = 1; t <= terms; ++t) {
    pow = mdp.gamma() * (pow * p);
    acc += pow;
  }
  return acc;
}

// Plain value iteration from Q = 0.
inline vrql::QFunction value_iteration(const vrql::TabularMDP& mdp, int iters) {
  vrql::QFunction q = vrql::QFunction::Zero(mdp.num_states(), mdp.num_actions());
  for (int i = 0; i < iters; ++i) q = vrql::bellman_optimality(mdp, q);
  return q;
}

}  // namespace testutil
