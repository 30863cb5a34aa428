#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vrql/mdp.hpp"

namespace vrql {

// Instance-dependent difficulty summary at the optimum. Tables are evaluated
// at argmax_policy, the optimal policy maximizing ||nu||_inf.
struct ComplexityReport {
  QFunction nu;
  QFunction rho;
  QFunction sigma_term;
  QFunction phi_sq;
  double max_nu_inf = 0.0;
  Policy argmax_policy;
  double gap = 0.0;     // +infinity when every policy is optimal
  double n_zero = 0.0;  // +infinity when the kernel is deterministic at the optimum

  std::string to_json_text() const;
  std::string to_csv() const;
};

// Per-pair variance of the sampled next-state value:
// phi^2(z) = sum_x' P(x'|z) (Q*(x',pi(x')) - (P^pi Q*)(z))^2.
QFunction phi_squared(const TabularMDP& mdp, const Policy& pi, const QFunction& qstar);

// rho(zbar) = sqrt( sum_z U(zbar,z)^2 phi^2(z) ) with U = (I - gamma P^pi)^{-1}.
QFunction rho_matrix(const TabularMDP& mdp, const Policy& pi);
QFunction rho_matrix(const TabularMDP& mdp, const Policy& pi, const QFunction& qstar,
                     const Eigen::MatrixXd& resolvent);

// sigma(zbar) = reward_noise * sqrt( sum_z U(zbar,z)^2 ).
QFunction sigma_matrix(const TabularMDP& mdp, const Policy& pi);
QFunction sigma_matrix(const TabularMDP& mdp, const Policy& pi, const Eigen::MatrixXd& resolvent);

// nu = sqrt( gamma^2 rho^2 + sigma^2 ) elementwise; the standard deviation of
// (I - gamma P^pi)^{-1}(T_hat(Q*) - T(Q*)) under one generative observation.
QFunction nu_matrix(const TabularMDP& mdp, const Policy& pi);
QFunction nu_matrix(const TabularMDP& mdp, const Policy& pi, const QFunction& qstar,
                    const Eigen::MatrixXd& resolvent);

// All policies greedy within opt_tol of the per-state maxima of Q*, in
// lexicographic order; throws once the product exceeds cap.
std::vector<Policy> optimal_policy_set(const TabularMDP& mdp, double opt_tol = 1e-9, std::size_t cap = 4096);

// max over the optimal-policy set of ||nu(pi)||_inf, with the first
// (lexicographically smallest) maximizer.
std::pair<double, Policy> max_nu_over_optimal(const TabularMDP& mdp, double opt_tol = 1e-9,
                                              std::size_t cap = 4096);

// Optimality gap: min over policies outside the optimal set of
// ||Q* - (r + gamma P^pi Q*)||_inf. Because a suboptimal policy is felt only
// through the states where it deviates, the minimum is attained by a single
// deviation and equals
//   gamma * min over (y,u'') suboptimal of [ (V*(y) - Q*(y,u'')) * max_{(x,u)} P_u(y|x) ].
// Returns +infinity when every action is optimal everywhere.
double optimality_gap(const TabularMDP& mdp, double opt_tol = 1e-9);

// N0 = max( 2 gamma^2/(1-gamma)^2, 2 span(Q*)^2/((1-gamma)^2 ||rho^2||_inf) ),
// rho taken at the argmax policy; +infinity when rho vanishes.
double min_sample_size(const TabularMDP& mdp, double opt_tol = 1e-9, std::size_t cap = 4096);

// Empirical lower estimate of the greedy-perturbation Lipschitz constant:
// max over probes theta = Q* + delta, ||delta||_inf <= radius, of
// ||(P^{greedy(theta)} - P^{pi*})(theta - Q*)||_inf / ||theta - Q*||_inf^2.
// Probes are radius-scaled copies of a seed-fixed unit-box sample, so the
// estimate scales exactly as 1/radius whenever the greedy flips persist.
double lipschitz_check(const TabularMDP& mdp, int num_probes, double radius, std::uint64_t seed = 0);

ComplexityReport complexity_report(const TabularMDP& mdp, double opt_tol = 1e-9, std::size_t cap = 4096);

}  // namespace vrql
