#include "vrql/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "vrql/errors.hpp"

namespace vrql {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// M, K, and the N_m coefficients (before c1) for a budget; M <= 0 marks infeasible.
struct ScheduleShape {
  std::int64_t m = 0;
  std::int64_t k = 0;
  std::vector<double> coeff;  // N_m = ceil(c1 * coeff[m-1])
};

ScheduleShape schedule_shape(std::int64_t n, double gamma, double delta, std::int64_t d, double base) {
  ScheduleShape s;
  if (n < 2) return s;
  const auto logb = [base](double x) { return std::log(x) / std::log(base); };
  const double one_minus = 1.0 - gamma;
  const double denom = 8.0 * std::log((16.0 * static_cast<double>(d) / delta) * std::log(static_cast<double>(n)));
  if (!(denom > 0.0)) return s;
  const double arg = static_cast<double>(n) * one_minus * one_minus / denom;
  std::int64_t m = 1;
  if (arg > 0.0) m = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(logb(arg))));
  const std::int64_t k = n / (2 * m);
  if (k < 1) return s;
  s.m = m;
  s.k = k;
  const double level = logb(16.0 * static_cast<double>(m) * static_cast<double>(d) / delta);
  s.coeff.reserve(static_cast<std::size_t>(m));
  double powb = 1.0;
  for (std::int64_t i = 1; i <= m; ++i) {
    powb *= base;
    s.coeff.push_back(powb / (one_minus * one_minus) * level);
  }
  return s;
}

std::int64_t total_with_c1(const ScheduleShape& s, double c1) {
  double total = static_cast<double>(s.m) * static_cast<double>(s.k);
  for (const double c : s.coeff) total += std::ceil(c1 * c);
  if (total > 9.0e18) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(total);
}

bool feasible(const ScheduleShape& s, std::int64_t n) {
  if (s.m < 1 || s.k < 1) return false;
  // At c1 -> 0+ every N_m collapses to 1.
  return s.m * s.k + s.m <= n;
}

std::int64_t minimal_feasible_budget(std::int64_t n, double gamma, double delta, std::int64_t d,
                                     double base) {
  std::int64_t hi = std::max<std::int64_t>(n, 2);
  while (!feasible(schedule_shape(hi, gamma, delta, d, base), hi)) {
    if (hi > (std::numeric_limits<std::int64_t>::max() >> 1)) {
      throw schedule_error(n, std::numeric_limits<std::int64_t>::max());
    }
    hi *= 2;
  }
  std::int64_t lo = 2;
  while (lo < hi) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (feasible(schedule_shape(mid, gamma, delta, d, base), mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

void push_trace(RunRecord& rec, const SolverOptions& opts, std::int64_t epoch, std::int64_t iter,
                std::int64_t samples, const QFunction& q) {
  if (opts.qstar == nullptr || !opts.record_trace) return;
  rec.trace.push_back({epoch, iter, samples, linf_distance(q, *opts.qstar)});
}

void check_init_contract(RunRecord& rec, const SolverOptions& opts, const TabularMDP& mdp,
                         const QFunction& q0) {
  if (opts.qstar == nullptr) {
    if (opts.enforce_init_contract)
      throw validation_error("enforcing the initialization contract needs a reference optimum");
    return;
  }
  rec.init_contract_checked = true;
  const double bound = mdp.rewards().array().abs().maxCoeff() / std::sqrt(1.0 - mdp.gamma());
  rec.init_contract_ok = linf_distance(q0, *opts.qstar) <= bound;
  if (opts.enforce_init_contract && !rec.init_contract_ok) {
    throw validation_error("initial point violates the warm-start contract");
  }
}

// One re-centered update written into theta; scratch buffers are reused across steps.
void vr_step_inplace(QFunction& theta, double alpha, const QFunction& qbar, const QFunction& tbar_qbar,
                     const TransitionSample& sample, const TabularMDP& mdp, QFunction& t_theta,
                     QFunction& t_qbar) {
  empirical_bellman_into(sample, mdp, theta, t_theta);
  empirical_bellman_into(sample, mdp, qbar, t_qbar);
  theta.array() =
      (1.0 - alpha) * theta.array() + alpha * (t_theta.array() - t_qbar.array() + tbar_qbar.array());
}

QFunction run_epoch_impl(const QFunction& qbar, std::int64_t k_steps, std::int64_t n_m,
                         SeededSampler& sampler, const TabularMDP& mdp, std::int64_t epoch,
                         std::int64_t& global_iter, RunRecord* rec, const SolverOptions& opts) {
  if (n_m < 1) throw validation_error("re-centering size must be at least 1");
  if (k_steps < 0) throw validation_error("epoch length must be non-negative");
  check_shape(mdp, qbar, "epoch anchor");
  const QFunction tbar = monte_carlo_bellman(sampler, qbar, n_m);
  QFunction theta = qbar;
  TransitionSample sample;
  QFunction t_theta(mdp.num_states(), mdp.num_actions());
  QFunction t_qbar(mdp.num_states(), mdp.num_actions());
  for (std::int64_t k = 1; k <= k_steps; ++k) {
    const double alpha = 1.0 / (1.0 + (1.0 - mdp.gamma()) * static_cast<double>(k));
    sampler.draw_into(sample);
    vr_step_inplace(theta, alpha, qbar, tbar, sample, mdp, t_theta, t_qbar);
    ++global_iter;
    if (rec != nullptr) push_trace(*rec, opts, epoch, global_iter, sampler.draws_consumed(), theta);
  }
  return theta;
}

}  // namespace

double StepsizeRule::alpha(std::int64_t k, double gamma) const {
  switch (kind) {
    case Kind::rescaled_linear:
      return 1.0 / (1.0 + (1.0 - gamma) * static_cast<double>(k));
    case Kind::polynomial:
      return std::pow(static_cast<double>(k), -omega);
  }
  return 0.0;
}

StepsizeRule StepsizeRule::rescaled() { return StepsizeRule{Kind::rescaled_linear, 1.0}; }

StepsizeRule StepsizeRule::poly(double omega) {
  if (!(omega >= 0.0) || !std::isfinite(omega)) {
    throw validation_error("polynomial stepsize exponent must be finite and non-negative");
  }
  return StepsizeRule{Kind::polynomial, omega};
}

StepsizeRule StepsizeRule::parse(const std::string& text) {
  if (text == "rescaled") return rescaled();
  const std::string prefix = "poly:";
  if (text.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const double omega = std::stod(text.substr(prefix.size()), &used);
      if (used != text.size() - prefix.size()) throw validation_error("trailing junk");
      return poly(omega);
    } catch (const validation_error&) {
      throw;
    } catch (const std::exception&) {
      throw validation_error("cannot parse stepsize exponent in '" + text + "'");
    }
  }
  throw validation_error("unknown stepsize rule '" + text + "' (expected 'rescaled' or 'poly:<omega>')");
}

std::string StepsizeRule::describe() const {
  if (kind == Kind::rescaled_linear) return "rescaled";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "poly:%g", omega);
  return buf;
}

std::int64_t EpochSchedule::total_samples() const {
  std::int64_t total = num_epochs * epoch_length;
  for (const std::int64_t n : recenter_sizes) total += n;
  return total;
}

std::string EpochSchedule::describe() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "epochs M=%lld\nepoch_length K=%lld\ndelta=%g\nbase=%g\nc1=%.17g",
                static_cast<long long>(num_epochs), static_cast<long long>(epoch_length), delta, base,
                c1);
  out += buf;
  if (c1 != c1_requested) {
    std::snprintf(buf, sizeof(buf), " (rescaled from %.17g to partition the budget)", c1_requested);
    out += buf;
  }
  out += "\nrecenter_sizes N_m =";
  for (const std::int64_t n : recenter_sizes) {
    std::snprintf(buf, sizeof(buf), " %lld", static_cast<long long>(n));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "\ntotal_samples=%lld\n", static_cast<long long>(total_samples()));
  out += buf;
  return out;
}

std::string RunRecord::to_csv() const {
  std::string out = "epoch,iter,samples_used,err_linf\n";
  char line[160];
  for (const TracePoint& p : trace) {
    std::snprintf(line, sizeof(line), "%lld,%lld,%lld,%.17g\n", static_cast<long long>(p.epoch),
                  static_cast<long long>(p.iter), static_cast<long long>(p.samples_used), p.err_linf);
    out += line;
  }
  return out;
}

std::pair<QFunction, RunRecord> standard_q_learning(SeededSampler& sampler, std::int64_t n,
                                                    const QFunction& q0, const StepsizeRule& stepsize,
                                                    const SolverOptions& opts) {
  if (n < 1) throw validation_error("standard_q_learning requires n >= 1");
  const TabularMDP& mdp = sampler.mdp();
  check_shape(mdp, q0, "initial point");
  RunRecord rec;
  rec.seed = sampler.seed();
  check_init_contract(rec, opts, mdp, q0);
  const std::int64_t before = sampler.draws_consumed();
  QFunction q = q0;
  TransitionSample sample;
  QFunction t_q(mdp.num_states(), mdp.num_actions());
  for (std::int64_t k = 1; k <= n; ++k) {
    const double alpha = stepsize.alpha(k, mdp.gamma());
    sampler.draw_into(sample);
    empirical_bellman_into(sample, mdp, q, t_q);
    q.array() = (1.0 - alpha) * q.array() + alpha * t_q.array();
    push_trace(rec, opts, 0, k, sampler.draws_consumed(), q);
  }
  rec.samples_consumed = sampler.draws_consumed() - before;
  return {std::move(q), std::move(rec)};
}

QFunction vr_update(const QFunction& theta, double alpha, const QFunction& qbar,
                    const QFunction& tbar_qbar, const TransitionSample& sample, const TabularMDP& mdp) {
  if (!(alpha > 0.0) || alpha > 1.0) throw validation_error("vr_update requires alpha in (0, 1]");
  check_shape(mdp, theta, "vr_update iterate");
  check_shape(mdp, qbar, "vr_update anchor");
  check_shape(mdp, tbar_qbar, "vr_update re-centering term");
  QFunction out = theta;
  QFunction t_theta(mdp.num_states(), mdp.num_actions());
  QFunction t_qbar(mdp.num_states(), mdp.num_actions());
  vr_step_inplace(out, alpha, qbar, tbar_qbar, sample, mdp, t_theta, t_qbar);
  return out;
}

QFunction run_epoch(const QFunction& qbar, std::int64_t k_steps, std::int64_t n_m, SeededSampler& sampler,
                    const TabularMDP& mdp) {
  SolverOptions opts;
  std::int64_t iter = 0;
  return run_epoch_impl(qbar, k_steps, n_m, sampler, mdp, 1, iter, nullptr, opts);
}

EpochSchedule make_schedule(std::int64_t n, double gamma, double delta, std::int64_t d, double c1,
                            double base) {
  if (n < 1) throw validation_error("schedule budget must be positive");
  if (!(gamma > 0.0) || !(gamma < 1.0)) throw validation_error("gamma must lie in (0, 1)");
  if (!(delta > 0.0) || !(delta < 1.0)) throw validation_error("delta must lie in (0, 1)");
  if (d < 1) throw validation_error("dimension must be positive");
  if (!(c1 > 0.0) || !std::isfinite(c1)) throw validation_error("c1 must be positive and finite");
  if (!(base > 1.0) || !std::isfinite(base)) throw validation_error("growth base must exceed 1");

  const ScheduleShape shape = schedule_shape(n, gamma, delta, d, base);
  if (!feasible(shape, n)) throw schedule_error(n, minimal_feasible_budget(n, gamma, delta, d, base));

  // The N samples are partitioned between the M*K update steps and the
  // re-centering batches, so the batches absorb everything the steps do not
  // use: scale c1 to the largest value whose (post-ceil) total still fits.
  double lo = std::numeric_limits<double>::min();  // feasible: every N_m collapses to 1
  double hi = 1.0;
  while (total_with_c1(shape, hi) <= n) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (total_with_c1(shape, mid) <= n) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double c1_eff = lo;

  EpochSchedule sched;
  sched.num_epochs = shape.m;
  sched.epoch_length = shape.k;
  sched.delta = delta;
  sched.c1 = c1_eff;
  sched.c1_requested = c1;
  sched.base = base;
  sched.recenter_sizes.reserve(shape.coeff.size());
  for (const double c : shape.coeff) {
    sched.recenter_sizes.push_back(static_cast<std::int64_t>(std::ceil(c1_eff * c)));
  }
  return sched;
}

std::pair<QFunction, RunRecord> vr_q_learning(SeededSampler& sampler, const EpochSchedule& schedule,
                                              const QFunction& q0, const TabularMDP& mdp,
                                              const SolverOptions& opts) {
  if (schedule.num_epochs < 1) throw validation_error("schedule must contain at least one epoch");
  if (schedule.epoch_length < 1) throw validation_error("epoch length must be positive");
  if (schedule.recenter_sizes.size() != static_cast<std::size_t>(schedule.num_epochs)) {
    throw validation_error("schedule re-centering sizes must match the epoch count");
  }
  if (mdp.num_states() != sampler.mdp().num_states() || mdp.num_actions() != sampler.mdp().num_actions()) {
    throw dimension_error("sampler and MDP dimensions disagree");
  }
  check_shape(mdp, q0, "initial point");
  RunRecord rec;
  rec.seed = sampler.seed();
  check_init_contract(rec, opts, mdp, q0);
  const std::int64_t before = sampler.draws_consumed();
  QFunction qbar = q0;
  std::int64_t iter = 0;
  rec.epoch_anchors.reserve(schedule.recenter_sizes.size());
  for (std::int64_t m = 1; m <= schedule.num_epochs; ++m) {
    qbar = run_epoch_impl(qbar, schedule.epoch_length,
                          schedule.recenter_sizes[static_cast<std::size_t>(m - 1)], sampler, mdp, m, iter,
                          &rec, opts);
    rec.epoch_anchors.push_back(qbar);
  }
  rec.samples_consumed = sampler.draws_consumed() - before;
  return {std::move(qbar), std::move(rec)};
}

QFunction shifted_fixed_point(const TabularMDP& mdp, const QFunction& qbar, const QFunction& tbar_qbar,
                              double tol) {
  if (!(tol > 0.0)) throw validation_error("shifted_fixed_point requires tol > 0");
  check_shape(mdp, qbar, "shift anchor");
  check_shape(mdp, tbar_qbar, "shift target");
  const QFunction shift = tbar_qbar - bellman_optimality(mdp, qbar);
  QFunction q = qbar;
  double residual = kNaN;
  // gamma-contraction: the residual shrinks geometrically; the cap is generous.
  const std::int64_t max_iters =
      1000 + static_cast<std::int64_t>(std::ceil(400.0 / std::max(1e-12, 1.0 - mdp.gamma())));
  for (std::int64_t it = 0; it < max_iters; ++it) {
    QFunction next = bellman_optimality(mdp, q) + shift;
    residual = linf_distance(next, q);
    q = std::move(next);
    if (residual <= tol) return q;
  }
  throw convergence_error("shifted fixed-point iteration did not reach tolerance", residual);
}

}  // namespace vrql
