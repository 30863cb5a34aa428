#include "vrql/family.hpp"

#include <cmath>

#include "vrql/errors.hpp"

namespace vrql {

namespace {

void check_family_params(double gamma, double lambda) {
  if (!(gamma > 0.25) || !(gamma < 1.0)) {
    throw validation_error("family gamma must lie in (1/4, 1)");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw validation_error("family lambda must be finite and non-negative");
  }
}

double tau_of(double gamma, double lambda) { return 1.0 - std::pow(1.0 - gamma, lambda); }

}  // namespace

TabularMDP two_state_family_mdp(double gamma, double lambda) {
  check_family_params(gamma, lambda);
  const double p = (4.0 * gamma - 1.0) / (3.0 * gamma);
  const double tau = tau_of(gamma, lambda);
  Eigen::MatrixXd k1(2, 2), k2(2, 2), rewards(2, 2);
  k1 << p, 1.0 - p, 0.0, 1.0;
  k2 << 1.0, 0.0, 0.0, 1.0;
  rewards << 1.0, 0.0, tau, 0.0;
  return TabularMDP(gamma, {k1, k2}, rewards, 0.0);
}

QFunction two_state_family_qstar(double gamma, double lambda) {
  check_family_params(gamma, lambda);
  const double tau = tau_of(gamma, lambda);
  const double a = (3.0 + tau) / (4.0 * (1.0 - gamma));
  const double b = tau / (1.0 - gamma);
  QFunction q(2, 2);
  q << a, gamma * a, b, gamma * b;
  return q;
}

std::int64_t scaling_budget(double gamma) {
  if (!(gamma > 0.0) || !(gamma < 1.0)) throw validation_error("gamma must lie in (0, 1)");
  const double one_minus = 1.0 - gamma;
  return static_cast<std::int64_t>(std::ceil((512.0 / 9.0) / (one_minus * one_minus * one_minus)));
}

}  // namespace vrql
