#include "vrql/lowerbound.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include "json.hpp"
#include "vrql/complexity.hpp"
#include "vrql/errors.hpp"

namespace vrql {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Slack for inequalities the construction attains with equality.
constexpr double kGapSlack = 1e-9;

nlohmann::json json_number(double v) {
  if (std::isnan(v)) return nlohmann::json("nan");
  if (std::isinf(v)) return nlohmann::json(v > 0 ? "inf" : "-inf");
  return nlohmann::json(v);
}

// rho- or sigma-maximizing optimal policy; strict comparison keeps the
// lexicographically smallest maximizer.
template <typename TableOf>
std::pair<double, Policy> argmax_over_optimal(const TabularMDP& mdp, TableOf table_of) {
  const std::vector<Policy> pis = optimal_policy_set(mdp);
  double best = -kInf;
  Policy best_pi;
  for (const Policy& pi : pis) {
    const double m = table_of(pi).maxCoeff();
    if (m > best) {
      best = m;
      best_pi = pi;
    }
  }
  return {best, best_pi};
}

struct TransitionConstruction {
  QFunction qstar;
  Policy pi1;
  Eigen::MatrixXd resolvent;
  Eigen::Index zbar = 0;   // flat index of the maximizing entry of rho(pi1)
  double rho_tilde = 0.0;  // max over optimal policies of ||rho||_inf
  std::vector<Eigen::MatrixXd> alt_kernels;  // raw perturbed kernels, unvalidated
  double chi_sq_sum = 0.0;
  double frob_sq = 0.0;
  double opnorm = 0.0;
  double resolvent_product_min = 0.0;
};

TransitionConstruction build_transition_construction(const TabularMDP& mdp, std::int64_t n) {
  TransitionConstruction c;
  c.qstar = solve_optimal_q(mdp);
  auto [rho_max, pi1] = argmax_over_optimal(
      mdp, [&](const Policy& pi) { return rho_matrix(mdp, pi, c.qstar, resolvent_matrix(mdp, pi)); });
  c.pi1 = std::move(pi1);
  c.resolvent = resolvent_matrix(mdp, c.pi1);
  const Eigen::VectorXd rho_flat = flatten(rho_matrix(mdp, c.pi1, c.qstar, c.resolvent));
  rho_flat.maxCoeff(&c.zbar);
  c.rho_tilde = rho_flat(c.zbar);
  if (c.rho_tilde <= 0.0) {
    throw degenerate_error("transition perturbation undefined: rho vanishes at every optimal policy");
  }

  const Eigen::Index X = mdp.num_states();
  const Eigen::Index U = mdp.num_actions();
  Eigen::VectorXd w(X);
  for (Eigen::Index y = 0; y < X; ++y) w(y) = c.qstar(y, c.pi1(y));
  const double denom = c.rho_tilde * std::sqrt(2.0 * static_cast<double>(n));

  c.alt_kernels.reserve(static_cast<std::size_t>(U));
  Eigen::VectorXd tilt(mdp.dim());  // (dP^{pi1} Q*)(z)
  for (Eigen::Index u = 0; u < U; ++u) {
    const Eigen::MatrixXd& k = mdp.kernel(u);
    Eigen::MatrixXd alt = k;
    for (Eigen::Index x = 0; x < X; ++x) {
      const Eigen::Index z = flat_index(x, u, U);
      const double scale = c.resolvent(c.zbar, z) / denom;
      const double mean = k.row(x).dot(w);
      double l1 = 0.0;
      double dot_w = 0.0;
      for (Eigen::Index y = 0; y < X; ++y) {
        const double p = k(x, y);
        const double dp = p * scale * (w(y) - mean);
        alt(x, y) = p + dp;
        l1 += std::abs(dp);
        c.frob_sq += dp * dp;
        if (p > 0.0) c.chi_sq_sum += dp * dp / p;
        dot_w += dp * w(y);
      }
      tilt(z) = dot_w;
      c.opnorm = std::max(c.opnorm, l1);
    }
    c.alt_kernels.push_back(std::move(alt));
  }
  c.resolvent_product_min = (c.resolvent * tilt).minCoeff();
  return c;
}

// Hellinger between the base law and raw (possibly invalid) perturbed kernels,
// rewards shared. Negative entries surface as NaN.
double hellinger_vs_raw_kernels(const TabularMDP& mdp, const std::vector<Eigen::MatrixXd>& alt_kernels) {
  double log_bc = 0.0;
  for (Eigen::Index u = 0; u < mdp.num_actions(); ++u) {
    const Eigen::MatrixXd& a = mdp.kernel(u);
    const Eigen::MatrixXd& b = alt_kernels[static_cast<std::size_t>(u)];
    for (Eigen::Index x = 0; x < mdp.num_states(); ++x) {
      const double bc = (a.row(x).array() * b.row(x).array()).sqrt().sum();
      if (!(bc > 0.0)) return std::isnan(bc) ? kNaN : 1.0;
      log_bc += std::log(std::min(bc, 1.0));
    }
  }
  return std::sqrt(std::max(0.0, -std::expm1(log_bc)));
}

struct RewardConstruction {
  QFunction qstar;
  Policy pi2;
  double sigma_tilde = 0.0;  // max over optimal policies of ||sigma||_inf
  Eigen::VectorXd delta_r;   // flat perturbation
  Eigen::MatrixXd alt_rewards;
};

RewardConstruction build_reward_construction(const TabularMDP& mdp, std::int64_t n) {
  if (mdp.reward_noise() <= 0.0) {
    throw degenerate_error("reward perturbation undefined: reward noise is zero");
  }
  RewardConstruction c;
  c.qstar = solve_optimal_q(mdp);
  auto [sigma_max, pi2] =
      argmax_over_optimal(mdp, [&](const Policy& pi) { return sigma_matrix(mdp, pi); });
  c.pi2 = std::move(pi2);
  c.sigma_tilde = sigma_max;
  const Eigen::MatrixXd resolvent = resolvent_matrix(mdp, c.pi2);
  const Eigen::VectorXd sigma_flat = flatten(sigma_matrix(mdp, c.pi2, resolvent));
  Eigen::Index zbar = 0;
  sigma_flat.maxCoeff(&zbar);
  const double sr = mdp.reward_noise();
  const double scale = sr * sr / (c.sigma_tilde * std::sqrt(2.0 * static_cast<double>(n)));
  c.delta_r = scale * resolvent.row(zbar).transpose();
  c.alt_rewards = mdp.rewards() + unflatten(c.delta_r, mdp.num_states(), mdp.num_actions());
  return c;
}

}  // namespace

PerturbationReport perturb_transitions(const TabularMDP& mdp, std::int64_t n) {
  if (n < 1) throw validation_error("perturbation sample size must be positive");
  TransitionConstruction c = build_transition_construction(mdp, n);
  const double n0 = min_sample_size(mdp);
  if (static_cast<double>(n) < n0) {
    throw validation_error("sample size " + std::to_string(n) +
                           " is below the minimal size required by the construction (" +
                           std::to_string(n0) + ")");
  }
  PerturbationReport rep{TabularMDP(mdp.gamma(), std::move(c.alt_kernels), mdp.rewards(),
                                    mdp.reward_noise()),
                         0.0,
                         0.0,
                         0.0,
                         0.0,
                         0.0,
                         0.0,
                         n};
  rep.hellinger = hellinger_mdp(mdp, rep.alt_mdp);
  rep.hellinger_bound = std::sqrt(0.5 * c.chi_sq_sum);
  rep.opnorm_gap = c.opnorm;
  rep.frobenius_gap = std::sqrt(c.frob_sq);
  rep.q_gap_scaled =
      std::sqrt(static_cast<double>(n)) * linf_distance(solve_optimal_q(rep.alt_mdp), c.qstar);
  rep.target_functional = mdp.gamma() * c.rho_tilde;
  return rep;
}

PerturbationReport perturb_rewards(const TabularMDP& mdp, std::int64_t n) {
  if (n < 1) throw validation_error("perturbation sample size must be positive");
  RewardConstruction c = build_reward_construction(mdp, n);
  PerturbationReport rep{mdp.with_rewards(c.alt_rewards),
                         0.0,
                         0.0,
                         0.0,
                         0.0,
                         0.0,
                         0.0,
                         n};
  const double sr = mdp.reward_noise();
  rep.hellinger = hellinger_mdp(mdp, rep.alt_mdp);
  rep.hellinger_bound = std::sqrt(c.delta_r.squaredNorm() / (2.0 * sr * sr));
  rep.opnorm_gap = 0.0;
  rep.frobenius_gap = c.delta_r.norm();
  rep.q_gap_scaled =
      std::sqrt(static_cast<double>(n)) * linf_distance(solve_optimal_q(rep.alt_mdp), c.qstar);
  rep.target_functional = c.sigma_tilde;
  return rep;
}

double hellinger_mdp(const TabularMDP& a, const TabularMDP& b) {
  if (a.num_states() != b.num_states() || a.num_actions() != b.num_actions()) {
    throw dimension_error("hellinger_mdp requires instances of equal dimensions");
  }
  if (a.reward_noise() != b.reward_noise()) {
    throw validation_error("hellinger_mdp requires instances sharing the reward noise");
  }
  const double sr = a.reward_noise();
  double log_bc = 0.0;
  for (Eigen::Index u = 0; u < a.num_actions(); ++u) {
    for (Eigen::Index x = 0; x < a.num_states(); ++x) {
      double bc = (a.kernel(u).row(x).array() * b.kernel(u).row(x).array()).sqrt().sum();
      const double dr = a.rewards()(x, u) - b.rewards()(x, u);
      if (sr > 0.0) {
        bc *= std::exp(-dr * dr / (8.0 * sr * sr));
      } else if (dr != 0.0) {
        bc = 0.0;  // singular pair: identical-variance point masses at different rewards
      }
      if (!(bc > 0.0)) return 1.0;
      log_bc += std::log(std::min(bc, 1.0));
    }
  }
  return std::sqrt(std::max(0.0, -std::expm1(log_bc)));
}

AuditReport audit_transition_perturbation(const TabularMDP& mdp, std::int64_t n) {
  if (n < 1) throw validation_error("perturbation sample size must be positive");
  TransitionConstruction c = build_transition_construction(mdp, n);

  AuditReport rep;
  double row_sum_err = 0.0;
  double min_entry = kInf;
  for (const Eigen::MatrixXd& k : c.alt_kernels) {
    row_sum_err = std::max(row_sum_err, (k.rowwise().sum().array() - 1.0).abs().maxCoeff());
    min_entry = std::min(min_entry, k.minCoeff());
  }
  rep.clauses.push_back({"kernel_row_sums", row_sum_err, 1e-12, row_sum_err <= 1e-12});
  rep.clauses.push_back({"kernel_nonnegative", min_entry, -1e-12, min_entry >= -1e-12});

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double hel = hellinger_vs_raw_kernels(mdp, c.alt_kernels);
  const double hel_budget = 1.0 / (2.0 * sqrt_n);
  rep.clauses.push_back({"hellinger", hel, hel_budget, hel <= hel_budget});

  const double norm_budget = 1.0 / std::sqrt(2.0 * static_cast<double>(n));
  rep.clauses.push_back({"opnorm", c.opnorm, norm_budget, c.opnorm <= norm_budget});
  const double frob = std::sqrt(c.frob_sq);
  rep.clauses.push_back({"frobenius", frob, norm_budget, frob <= norm_budget});

  rep.clauses.push_back({"resolvent_product_nonneg", c.resolvent_product_min, -1e-12,
                         c.resolvent_product_min >= -1e-12});

  double q_gap = kNaN;
  const double q_gap_floor = 0.25 * mdp.gamma() * c.rho_tilde;
  try {
    const TabularMDP alt(mdp.gamma(), std::move(c.alt_kernels), mdp.rewards(), mdp.reward_noise());
    q_gap = sqrt_n * linf_distance(solve_optimal_q(alt), c.qstar);
  } catch (const error&) {
    // invalid kernels: the gap clause is reported as failed, not asserted
  }
  rep.clauses.push_back({"q_gap_scaled", q_gap, q_gap_floor, q_gap >= q_gap_floor * (1.0 - kGapSlack)});

  rep.all_pass = true;
  for (const AuditClause& cl : rep.clauses) rep.all_pass = rep.all_pass && cl.pass;
  return rep;
}

AuditReport audit_reward_perturbation(const TabularMDP& mdp, std::int64_t n) {
  if (n < 1) throw validation_error("perturbation sample size must be positive");
  RewardConstruction c = build_reward_construction(mdp, n);
  const TabularMDP alt(mdp.gamma(), mdp.kernels(), c.alt_rewards, mdp.reward_noise());

  AuditReport rep;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double hel = hellinger_mdp(mdp, alt);
  const double hel_budget = 1.0 / (2.0 * sqrt_n);
  rep.clauses.push_back({"hellinger", hel, hel_budget, hel <= hel_budget});

  const double l2 = c.delta_r.norm();
  const double l2_budget = mdp.reward_noise() / std::sqrt(2.0 * static_cast<double>(n));
  rep.clauses.push_back({"reward_l2", l2, l2_budget, l2 <= l2_budget * (1.0 + kGapSlack)});

  const double q_gap = sqrt_n * linf_distance(solve_optimal_q(alt), c.qstar);
  const double q_gap_floor = c.sigma_tilde / std::sqrt(2.0);
  rep.clauses.push_back({"q_gap_scaled", q_gap, q_gap_floor, q_gap >= q_gap_floor * (1.0 - kGapSlack)});

  rep.all_pass = true;
  for (const AuditClause& cl : rep.clauses) rep.all_pass = rep.all_pass && cl.pass;
  return rep;
}

double local_minimax_bound(const TabularMDP& mdp, std::int64_t n, double c) {
  if (n < 1) throw validation_error("sample size must be positive");
  if (!(c > 0.0) || !std::isfinite(c)) throw validation_error("bound constant must be positive and finite");
  const double max_nu = max_nu_over_optimal(mdp).first;
  if (max_nu == 0.0) return 0.0;
  const double n0 = min_sample_size(mdp);
  if (static_cast<double>(n) < n0) {
    throw validation_error("sample size " + std::to_string(n) +
                           " is below the minimal size required by the bound (" + std::to_string(n0) +
                           ")");
  }
  return c * max_nu;
}

std::string PerturbationReport::to_json_text() const {
  nlohmann::json j;
  j["alt_mdp"] = nlohmann::json::parse(alt_mdp.to_json_text());
  j["hellinger"] = json_number(hellinger);
  j["hellinger_bound"] = json_number(hellinger_bound);
  j["opnorm_gap"] = json_number(opnorm_gap);
  j["frobenius_gap"] = json_number(frobenius_gap);
  j["q_gap_scaled"] = json_number(q_gap_scaled);
  j["target_functional"] = json_number(target_functional);
  j["n"] = n;
  return j.dump(2);
}

std::string AuditReport::to_json_text() const {
  nlohmann::json j;
  j["all_pass"] = all_pass;
  nlohmann::json arr = nlohmann::json::array();
  for (const AuditClause& c : clauses) {
    nlohmann::json jc;
    jc["name"] = c.name;
    jc["measured"] = json_number(c.measured);
    jc["threshold"] = json_number(c.threshold);
    jc["pass"] = c.pass;
    arr.push_back(std::move(jc));
  }
  j["clauses"] = std::move(arr);
  return j.dump(2);
}

std::string AuditReport::to_csv() const {
  std::string out = "clause,measured,threshold,pass\n";
  char line[220];
  for (const AuditClause& c : clauses) {
    std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%d\n", c.name.c_str(), c.measured, c.threshold,
                  c.pass ? 1 : 0);
    out += line;
  }
  return out;
}

}  // namespace vrql
