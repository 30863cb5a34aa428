#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vrql/mdp.hpp"
#include "vrql/sampling.hpp"

namespace vrql {

struct StepsizeRule {
  enum class Kind { rescaled_linear, polynomial };
  Kind kind = Kind::rescaled_linear;
  double omega = 1.0;  // exponent of the polynomial rule alpha_k = k^{-omega}

  // k is 1-based; the rescaled-linear rule is alpha_k = 1/(1+(1-gamma)k).
  double alpha(std::int64_t k, double gamma) const;

  static StepsizeRule rescaled();
  static StepsizeRule poly(double omega);
  // "rescaled" or "poly:<omega>".
  static StepsizeRule parse(const std::string& text);
  std::string describe() const;
};

struct EpochSchedule {
  std::int64_t num_epochs = 0;               // M
  std::int64_t epoch_length = 0;             // K, shared by every epoch
  std::vector<std::int64_t> recenter_sizes;  // N_m, length M
  double delta = 0.0;
  double c1 = 1.0;            // effective constant (after any feasibility rescale)
  double c1_requested = 1.0;  // constant as passed in
  double base = 4.0;          // epoch growth base b in N_m ~ b^m

  std::int64_t total_samples() const;  // M*K + sum of N_m
  std::string describe() const;
};

struct TracePoint {
  std::int64_t epoch = 0;  // 1-based epoch; 0 for standard Q-learning
  std::int64_t iter = 0;   // 1-based global stochastic-approximation step
  std::int64_t samples_used = 0;
  double err_linf = 0.0;  // distance to the reference Q*; NaN when no reference
};

struct RunRecord {
  std::vector<TracePoint> trace;      // populated only when a reference Q* is supplied
  std::vector<QFunction> epoch_anchors;  // VR-QL epoch outputs (Q-bar_2 .. Q-bar_{M+1})
  std::int64_t samples_consumed = 0;
  std::uint64_t seed = 0;
  bool init_contract_checked = false;
  bool init_contract_ok = true;

  std::string to_csv() const;  // epoch,iter,samples_used,err_linf
};

struct SolverOptions {
  const QFunction* qstar = nullptr;  // reference for error tracing
  bool record_trace = true;          // per-iteration points (requires qstar)
  bool enforce_init_contract = false;
};

// Q_{k+1} = (1-alpha_k) Q_k + alpha_k T_hat_k(Q_k), k = 1..n.
std::pair<QFunction, RunRecord> standard_q_learning(SeededSampler& sampler, std::int64_t n,
                                                    const QFunction& q0, const StepsizeRule& stepsize,
                                                    const SolverOptions& opts = {});

// One re-centered step: (1-alpha) theta + alpha (T_hat(theta) - T_hat(qbar) + tbar_qbar),
// both empirical applications sharing `sample`.
QFunction vr_update(const QFunction& theta, double alpha, const QFunction& qbar,
                    const QFunction& tbar_qbar, const TransitionSample& sample, const TabularMDP& mdp);

// Monte-Carlo re-centering with n_m draws, then k_steps re-centered updates with
// alpha_k = 1/(1+(1-gamma)k), k local to the epoch. Consumes exactly n_m + k_steps draws.
QFunction run_epoch(const QFunction& qbar, std::int64_t k_steps, std::int64_t n_m, SeededSampler& sampler,
                    const TabularMDP& mdp);

// M = max(1, floor(log_b( n(1-gamma)^2 / (8 ln((16 d/delta) ln n)) ))), K = floor(n/(2M)),
// N_m = ceil(c1 b^m / (1-gamma)^2 * log_b(16 M d/delta)), with growth base b = 4 by
// default. The budget is then partitioned: c1 is rescaled (in either direction) to the
// largest value whose post-ceil total M*K + sum N_m still fits within n, so the
// re-centering batches absorb whatever the update steps do not use. The requested
// constant is kept in c1_requested. If even N_m = 1 per epoch does not fit, the
// error carries the minimal feasible budget.
EpochSchedule make_schedule(std::int64_t n, double gamma, double delta, std::int64_t d, double c1 = 1.0,
                            double base = 4.0);

// Runs the M epochs of the schedule, threading each epoch's output into the next.
std::pair<QFunction, RunRecord> vr_q_learning(SeededSampler& sampler, const EpochSchedule& schedule,
                                              const QFunction& q0, const TabularMDP& mdp,
                                              const SolverOptions& opts = {});

// Fixed point of J(Q) = T(Q) - T(qbar) + tbar_qbar, solved by fixed-point iteration
// until the residual is at most tol.
QFunction shifted_fixed_point(const TabularMDP& mdp, const QFunction& qbar, const QFunction& tbar_qbar,
                              double tol);

}  // namespace vrql
