#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vrql/errors.hpp"

namespace vrql {

// Action-value table, num_states x num_actions.
using QFunction = Eigen::MatrixXd;

struct Policy {
  std::vector<Eigen::Index> action_of;

  Eigen::Index operator()(Eigen::Index state) const { return action_of[static_cast<std::size_t>(state)]; }
  Eigen::Index num_states() const { return static_cast<Eigen::Index>(action_of.size()); }
  bool operator==(const Policy& other) const { return action_of == other.action_of; }
};

// Discounted tabular MDP under the generative sampling model: per-action
// row-stochastic kernels, a deterministic mean reward table, and i.i.d.
// Gaussian reward noise with known level reward_noise.
class TabularMDP {
 public:
  TabularMDP(double gamma, std::vector<Eigen::MatrixXd> transitions,
             Eigen::MatrixXd rewards, double reward_noise);

  Eigen::Index num_states() const { return rewards_.rows(); }
  Eigen::Index num_actions() const { return rewards_.cols(); }
  Eigen::Index dim() const { return num_states() * num_actions(); }
  double gamma() const { return gamma_; }
  double reward_noise() const { return reward_noise_; }
  const Eigen::MatrixXd& kernel(Eigen::Index action) const { return transitions_[static_cast<std::size_t>(action)]; }
  const std::vector<Eigen::MatrixXd>& kernels() const { return transitions_; }
  const Eigen::MatrixXd& rewards() const { return rewards_; }

  // Copy with the reward table replaced; transition kernels are carried over
  // bit-for-bit (no renormalization pass).
  TabularMDP with_rewards(Eigen::MatrixXd rewards) const;

  static TabularMDP load(const std::string& path);
  static TabularMDP from_json_text(const std::string& text);
  void save(const std::string& path) const;
  std::string to_json_text() const;

 private:
  double gamma_;
  double reward_noise_;
  std::vector<Eigen::MatrixXd> transitions_;
  Eigen::MatrixXd rewards_;
};

// Flattened state-action index; tables are traversed state-major.
inline Eigen::Index flat_index(Eigen::Index state, Eigen::Index action, Eigen::Index num_actions) {
  return state * num_actions + action;
}

Eigen::VectorXd flatten(const QFunction& q);
QFunction unflatten(const Eigen::VectorXd& v, Eigen::Index num_states, Eigen::Index num_actions);

// V(x) = max_u Q(x, u).
Eigen::VectorXd state_values(const QFunction& q);

// T(Q)(x,u) = r(x,u) + gamma * sum_x' P_u(x'|x) max_u' Q(x',u').
QFunction bellman_optimality(const TabularMDP& mdp, const QFunction& q);

// (P^pi Q)(x,u) = sum_x' P_u(x'|x) Q(x', pi(x')).
QFunction apply_policy_transition(const TabularMDP& mdp, const Policy& pi, const QFunction& q);

// Row-wise argmax; ties within tie_tol go to the smallest action index.
Policy greedy_policy(const QFunction& q, double tie_tol = 0.0);

// Flattened D x D matrix of P^pi acting on state-action tables.
Eigen::MatrixXd policy_transition_matrix(const TabularMDP& mdp, const Policy& pi);

// Solves (I - gamma P^pi) u = m exactly.
QFunction resolvent_apply(const TabularMDP& mdp, const Policy& pi, const QFunction& m);

// (I - gamma P^pi)^{-1} as a dense D x D matrix.
Eigen::MatrixXd resolvent_matrix(const TabularMDP& mdp, const Policy& pi);

// Q-value table of a fixed policy: the exact solution of Q = r + gamma P^pi Q.
QFunction policy_q_value(const TabularMDP& mdp, const Policy& pi);

// Exact Q* by policy iteration; post-condition ||T(Q*) - Q*||_inf <= tol.
QFunction solve_optimal_q(const TabularMDP& mdp, double tol = 1e-10);

double linf_distance(const QFunction& a, const QFunction& b);
double span_seminorm(const QFunction& q);

void check_shape(const TabularMDP& mdp, const QFunction& q, const char* what);
void check_policy(const TabularMDP& mdp, const Policy& pi);

}  // namespace vrql
