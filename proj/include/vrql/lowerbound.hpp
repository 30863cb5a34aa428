#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vrql/mdp.hpp"

namespace vrql {

// Hardest-alternative instance together with the quantities the construction
// is required to control.
struct PerturbationReport {
  TabularMDP alt_mdp;
  double hellinger = 0.0;        // exact d_Hel between the observation laws
  double hellinger_bound = 0.0;  // chi-square / quadratic upper bound, reported for comparison
  double opnorm_gap = 0.0;       // ||Pbar^{pi1} - P^{pi1}|| in l-inf operator norm (transitions)
  double frobenius_gap = 0.0;    // l2 norm of the raw perturbation (entries of dP, or dr)
  double q_gap_scaled = 0.0;     // sqrt(n) * ||Q*(alt) - Q*(base)||_inf
  double target_functional = 0.0;  // gamma*max rho (transitions) or max sigma (rewards)
  std::int64_t n = 0;

  std::string to_json_text() const;
};

struct AuditClause {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct AuditReport {
  std::vector<AuditClause> clauses;
  bool all_pass = false;

  std::string to_json_text() const;
  std::string to_csv() const;  // name,measured,threshold,pass
};

// Alternative instance with kernel rows tilted along the value direction:
// Pbar(y|z) = P(y|z) (1 + U(zbar,z)(Q*(y,pi1(y)) - (P^{pi1}Q*)(z)) / (rho~(zbar) sqrt(2n))),
// pi1 the rho-maximizing optimal policy, zbar its maximizing entry.
// Requires n >= min_sample_size(mdp) and a non-vanishing rho.
PerturbationReport perturb_transitions(const TabularMDP& mdp, std::int64_t n);

// Alternative instance with rewards shifted along the resolvent row:
// rbar(z) = r(z) + U(zbar,z) sigma_r^2 / (sigma(zbar) sqrt(2n)). Requires sigma_r > 0.
PerturbationReport perturb_rewards(const TabularMDP& mdp, std::int64_t n);

// Exact single-observation Hellinger distance between the generative laws of
// two MDPs sharing dimensions and reward noise:
// H^2 = 1 - prod_z BC_trans(z) BC_rew(z). With sigma_r = 0 a differing reward
// makes the laws mutually singular and the distance is 1.
double hellinger_mdp(const TabularMDP& a, const TabularMDP& b);

// Clause-by-clause check of the transition construction: kernel validity,
// Hellinger/operator-norm/Frobenius budgets, resolvent-product nonnegativity,
// and the scaled Q-gap inequality. Runs for any n >= 1 so that infeasible
// budgets are reported rather than asserted.
AuditReport audit_transition_perturbation(const TabularMDP& mdp, std::int64_t n);

// Same for the reward construction: Hellinger budget, l2 perturbation size,
// and the scaled Q-gap inequality.
AuditReport audit_reward_perturbation(const TabularMDP& mdp, std::int64_t n);

// c * max over optimal policies of ||nu||_inf; the plotting constant c is
// configuration, not a certified universal constant. Zero for noiseless
// instances; otherwise requires n >= min_sample_size(mdp).
double local_minimax_bound(const TabularMDP& mdp, std::int64_t n, double c = 0.125);

}  // namespace vrql
