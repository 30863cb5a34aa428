#include "vrql/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "json.hpp"
#include "vrql/errors.hpp"

namespace vrql {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Actions within opt_tol of each state's maximum, ascending per state.
std::vector<std::vector<Eigen::Index>> optimal_action_sets(const QFunction& qstar, double opt_tol) {
  std::vector<std::vector<Eigen::Index>> sets(static_cast<std::size_t>(qstar.rows()));
  for (Eigen::Index x = 0; x < qstar.rows(); ++x) {
    const double best = qstar.row(x).maxCoeff();
    for (Eigen::Index u = 0; u < qstar.cols(); ++u) {
      if (qstar(x, u) >= best - opt_tol) sets[static_cast<std::size_t>(x)].push_back(u);
    }
  }
  return sets;
}

std::vector<Policy> enumerate_policies(const std::vector<std::vector<Eigen::Index>>& sets, std::size_t cap) {
  std::size_t total = 1;
  for (const auto& s : sets) {
    const std::size_t c = s.size();
    total = (total > std::numeric_limits<std::size_t>::max() / c) ? std::numeric_limits<std::size_t>::max()
                                                                  : total * c;
  }
  if (total > cap) throw enumeration_overflow_error(total, cap);

  std::vector<Policy> out;
  out.reserve(total);
  std::vector<std::size_t> odo(sets.size(), 0);
  for (;;) {
    Policy pi;
    pi.action_of.resize(sets.size());
    for (std::size_t x = 0; x < sets.size(); ++x) pi.action_of[x] = sets[x][odo[x]];
    out.push_back(std::move(pi));
    std::size_t x = sets.size();
    while (x > 0) {
      --x;
      if (++odo[x] < sets[x].size()) break;
      odo[x] = 0;
      if (x == 0) return out;
    }
  }
}

double n_zero_from(const TabularMDP& mdp, const QFunction& qstar, const QFunction& rho) {
  const double one_minus = 1.0 - mdp.gamma();
  const double branch1 = 2.0 * mdp.gamma() * mdp.gamma() / (one_minus * one_minus);
  const double rho_sq_max = rho.array().square().maxCoeff();
  if (rho_sq_max == 0.0) return kInf;
  const double sp = span_seminorm(qstar);
  const double branch2 = 2.0 * sp * sp / (one_minus * one_minus * rho_sq_max);
  return std::max(branch1, branch2);
}

nlohmann::json json_number(double v) {
  if (std::isinf(v)) return nlohmann::json(v > 0 ? "inf" : "-inf");
  return nlohmann::json(v);
}

nlohmann::json json_matrix(const QFunction& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index x = 0; x < m.rows(); ++x) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index u = 0; u < m.cols(); ++u) row.push_back(m(x, u));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

QFunction phi_squared(const TabularMDP& mdp, const Policy& pi, const QFunction& qstar) {
  check_policy(mdp, pi);
  check_shape(mdp, qstar, "phi_squared input");
  const Eigen::Index X = mdp.num_states();
  const Eigen::Index U = mdp.num_actions();
  Eigen::VectorXd w(X);
  for (Eigen::Index x = 0; x < X; ++x) w(x) = qstar(x, pi(x));
  QFunction out(X, U);
  for (Eigen::Index u = 0; u < U; ++u) {
    const Eigen::MatrixXd& k = mdp.kernel(u);
    for (Eigen::Index x = 0; x < X; ++x) {
      const double mean = k.row(x).dot(w);
      out(x, u) = k.row(x).dot((w.array() - mean).square().matrix());
    }
  }
  return out;
}

QFunction rho_matrix(const TabularMDP& mdp, const Policy& pi, const QFunction& qstar,
                     const Eigen::MatrixXd& resolvent) {
  const Eigen::VectorXd phi = flatten(phi_squared(mdp, pi, qstar));
  const Eigen::VectorXd rho_sq = resolvent.array().square().matrix() * phi;
  return unflatten(rho_sq.array().max(0.0).sqrt().matrix(), mdp.num_states(), mdp.num_actions());
}

QFunction rho_matrix(const TabularMDP& mdp, const Policy& pi) {
  return rho_matrix(mdp, pi, solve_optimal_q(mdp), resolvent_matrix(mdp, pi));
}

QFunction sigma_matrix(const TabularMDP& mdp, const Policy& pi, const Eigen::MatrixXd& resolvent) {
  check_policy(mdp, pi);
  const Eigen::VectorXd row_norms = resolvent.array().square().rowwise().sum().sqrt().matrix();
  return unflatten(mdp.reward_noise() * row_norms, mdp.num_states(), mdp.num_actions());
}

QFunction sigma_matrix(const TabularMDP& mdp, const Policy& pi) {
  return sigma_matrix(mdp, pi, resolvent_matrix(mdp, pi));
}

QFunction nu_matrix(const TabularMDP& mdp, const Policy& pi, const QFunction& qstar,
                    const Eigen::MatrixXd& resolvent) {
  const QFunction rho = rho_matrix(mdp, pi, qstar, resolvent);
  const QFunction sig = sigma_matrix(mdp, pi, resolvent);
  const double g2 = mdp.gamma() * mdp.gamma();
  return (g2 * rho.array().square() + sig.array().square()).sqrt().matrix();
}

QFunction nu_matrix(const TabularMDP& mdp, const Policy& pi) {
  return nu_matrix(mdp, pi, solve_optimal_q(mdp), resolvent_matrix(mdp, pi));
}

std::vector<Policy> optimal_policy_set(const TabularMDP& mdp, double opt_tol, std::size_t cap) {
  const QFunction qstar = solve_optimal_q(mdp);
  return enumerate_policies(optimal_action_sets(qstar, opt_tol), cap);
}

std::pair<double, Policy> max_nu_over_optimal(const TabularMDP& mdp, double opt_tol, std::size_t cap) {
  const QFunction qstar = solve_optimal_q(mdp);
  const std::vector<Policy> pis = enumerate_policies(optimal_action_sets(qstar, opt_tol), cap);
  double best = -kInf;
  Policy best_pi;
  for (const Policy& pi : pis) {
    const double m = nu_matrix(mdp, pi, qstar, resolvent_matrix(mdp, pi)).maxCoeff();
    if (m > best) {
      best = m;
      best_pi = pi;
    }
  }
  return {best, best_pi};
}

double optimality_gap(const TabularMDP& mdp, double opt_tol) {
  const QFunction qstar = solve_optimal_q(mdp);
  const Eigen::VectorXd v = state_values(qstar);
  Eigen::RowVectorXd max_inflow = Eigen::RowVectorXd::Zero(mdp.num_states());
  for (Eigen::Index u = 0; u < mdp.num_actions(); ++u) {
    max_inflow = max_inflow.cwiseMax(mdp.kernel(u).colwise().maxCoeff());
  }
  double best = kInf;
  for (Eigen::Index y = 0; y < mdp.num_states(); ++y) {
    for (Eigen::Index u = 0; u < mdp.num_actions(); ++u) {
      const double shortfall = v(y) - qstar(y, u);
      if (shortfall <= opt_tol) continue;
      best = std::min(best, mdp.gamma() * shortfall * max_inflow(y));
    }
  }
  return best;
}

double min_sample_size(const TabularMDP& mdp, double opt_tol, std::size_t cap) {
  const QFunction qstar = solve_optimal_q(mdp);
  const Policy pistar = max_nu_over_optimal(mdp, opt_tol, cap).second;
  const QFunction rho = rho_matrix(mdp, pistar, qstar, resolvent_matrix(mdp, pistar));
  return n_zero_from(mdp, qstar, rho);
}

double lipschitz_check(const TabularMDP& mdp, int num_probes, double radius, std::uint64_t seed) {
  if (num_probes < 1) throw validation_error("lipschitz_check requires num_probes >= 1");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw validation_error("lipschitz_check requires a positive finite radius");
  }
  const QFunction qstar = solve_optimal_q(mdp);
  const Policy pistar = greedy_policy(qstar);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto unit = [&rng]() {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
  };
  double best = 0.0;
  QFunction delta(mdp.num_states(), mdp.num_actions());
  for (int p = 0; p < num_probes; ++p) {
    for (Eigen::Index x = 0; x < delta.rows(); ++x)
      for (Eigen::Index u = 0; u < delta.cols(); ++u) delta(x, u) = radius * unit();
    const double norm = delta.array().abs().maxCoeff();
    if (norm == 0.0) continue;
    const Policy pi_theta = greedy_policy(qstar + delta);
    if (pi_theta == pistar) continue;
    const double num = linf_distance(apply_policy_transition(mdp, pi_theta, delta),
                                     apply_policy_transition(mdp, pistar, delta));
    best = std::max(best, num / (norm * norm));
  }
  return best;
}

ComplexityReport complexity_report(const TabularMDP& mdp, double opt_tol, std::size_t cap) {
  const QFunction qstar = solve_optimal_q(mdp);
  const std::vector<Policy> pis = enumerate_policies(optimal_action_sets(qstar, opt_tol), cap);
  double best = -kInf;
  Policy best_pi;
  for (const Policy& pi : pis) {
    const double m = nu_matrix(mdp, pi, qstar, resolvent_matrix(mdp, pi)).maxCoeff();
    if (m > best) {
      best = m;
      best_pi = pi;
    }
  }
  const Eigen::MatrixXd resolvent = resolvent_matrix(mdp, best_pi);
  ComplexityReport rep;
  rep.phi_sq = phi_squared(mdp, best_pi, qstar);
  rep.rho = rho_matrix(mdp, best_pi, qstar, resolvent);
  rep.sigma_term = sigma_matrix(mdp, best_pi, resolvent);
  const double g2 = mdp.gamma() * mdp.gamma();
  rep.nu = (g2 * rep.rho.array().square() + rep.sigma_term.array().square()).sqrt().matrix();
  rep.max_nu_inf = best;
  rep.argmax_policy = best_pi;
  rep.gap = optimality_gap(mdp, opt_tol);
  rep.n_zero = n_zero_from(mdp, qstar, rep.rho);
  return rep;
}

std::string ComplexityReport::to_json_text() const {
  nlohmann::json j;
  j["nu"] = json_matrix(nu);
  j["rho"] = json_matrix(rho);
  j["sigma_term"] = json_matrix(sigma_term);
  j["phi_sq"] = json_matrix(phi_sq);
  j["max_nu_inf"] = json_number(max_nu_inf);
  nlohmann::json actions = nlohmann::json::array();
  for (const Eigen::Index a : argmax_policy.action_of) actions.push_back(static_cast<std::int64_t>(a));
  j["argmax_policy"] = std::move(actions);
  j["gap"] = json_number(gap);
  j["n_zero"] = json_number(n_zero);
  return j.dump(2);
}

std::string ComplexityReport::to_csv() const {
  std::string out = "state,action,nu,rho,sigma,phi_sq\n";
  char line[256];
  for (Eigen::Index x = 0; x < nu.rows(); ++x) {
    for (Eigen::Index u = 0; u < nu.cols(); ++u) {
      std::snprintf(line, sizeof(line), "%lld,%lld,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(x), static_cast<long long>(u), nu(x, u), rho(x, u),
                    sigma_term(x, u), phi_sq(x, u));
      out += line;
    }
  }
  return out;
}

}  // namespace vrql
