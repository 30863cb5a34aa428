#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "vrql/complexity.hpp"
#include "vrql/errors.hpp"
#include "vrql/family.hpp"
#include "vrql/mdp.hpp"
#include "vrql/sampling.hpp"
#include "vrql/solver.hpp"

using namespace vrql;

namespace {

TabularMDP scalar_mdp(double gamma, double reward, double noise) {
  std::vector<Eigen::MatrixXd> kernels(1);
  kernels[0] = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd r(1, 1);
  r << reward;
  return TabularMDP(gamma, kernels, r, noise);
}

}  // namespace

TEST_CASE("stepsize rules evaluate and parse") {
  StepsizeRule lin = StepsizeRule::rescaled();
  CHECK(lin.alpha(1, 0.9) == doctest::Approx(1.0 / 1.1).epsilon(1e-15));
  CHECK(lin.alpha(10, 0.5) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

  StepsizeRule constant = StepsizeRule::poly(0.0);
  CHECK(constant.alpha(1, 0.9) == 1.0);
  CHECK(constant.alpha(1000, 0.9) == 1.0);

  StepsizeRule root = StepsizeRule::poly(0.5);
  CHECK(root.alpha(4, 0.9) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK(StepsizeRule::parse("rescaled").kind == StepsizeRule::Kind::rescaled_linear);
  StepsizeRule parsed = StepsizeRule::parse("poly:0.75");
  CHECK(parsed.kind == StepsizeRule::Kind::polynomial);
  CHECK(parsed.omega == doctest::Approx(0.75));
  CHECK_THROWS_AS(StepsizeRule::parse("poly:"), validation_error);
  CHECK_THROWS_AS(StepsizeRule::parse("poly:abc"), validation_error);
  CHECK_THROWS_AS(StepsizeRule::parse("poly:0.5x"), validation_error);
  CHECK_THROWS_AS(StepsizeRule::parse("linear"), validation_error);
  CHECK_THROWS_AS(StepsizeRule::parse(""), validation_error);
  CHECK_THROWS_AS(StepsizeRule::parse("poly:-1"), validation_error);
  CHECK(StepsizeRule::parse(StepsizeRule::poly(0.5).describe()).omega == doctest::Approx(0.5));
}

TEST_CASE("schedule at the reference budget has the frozen shape") {
  EpochSchedule s = make_schedule(56889, 0.9, 0.1, 4);
  CHECK(s.num_epochs == 1);
  CHECK(s.epoch_length == 28444);
  REQUIRE(s.recenter_sizes.size() == 1);
  // The re-centering batches absorb the half of the budget the update steps
  // leave untouched: N_1 = 56889 - 28444.
  CHECK(s.recenter_sizes[0] == 28445);
  CHECK(s.total_samples() == 56889);
  CHECK(s.c1 > 15.0);
  CHECK(s.c1 < 15.5);
  CHECK(s.c1_requested == 1.0);
  CHECK(s.delta == 0.1);
  CHECK(s.base == 4.0);
}

TEST_CASE("schedule partitions the budget across a parameter sweep") {
  for (double gamma : {0.5, 0.8, 0.9, 0.95, 0.97}) {
    for (std::int64_t n : {5000, 50000, 500000, 5000000}) {
      EpochSchedule s = make_schedule(n, gamma, 0.1, 4);
      CHECK(s.total_samples() <= n);
      // Ceil granularity can strand at most one sample per epoch.
      CHECK(s.total_samples() >= n - s.num_epochs);
      CHECK(s.num_epochs >= 1);
      CHECK(s.epoch_length >= 1);
      REQUIRE(s.recenter_sizes.size() == static_cast<std::size_t>(s.num_epochs));
      for (std::size_t i = 0; i + 1 < s.recenter_sizes.size(); ++i)
        CHECK(s.recenter_sizes[i] <= s.recenter_sizes[i + 1]);
      for (std::int64_t nm : s.recenter_sizes) CHECK(nm >= 1);
    }
  }
}

TEST_CASE("epoch count grows by at most one when the budget doubles") {
  std::int64_t prev_m = -1;
  for (std::int64_t n = 4000; n <= 4096000; n *= 2) {
    EpochSchedule s = make_schedule(n, 0.9, 0.1, 4);
    if (prev_m >= 0) {
      CHECK(s.num_epochs >= prev_m);
      CHECK(s.num_epochs <= prev_m + 1);
    }
    prev_m = s.num_epochs;
  }
}

TEST_CASE("infeasible budgets raise a schedule error with the minimal feasible size") {
  try {
    make_schedule(1, 0.9, 0.1, 4);
    FAIL("expected schedule_error");
  } catch (const schedule_error& e) {
    CHECK(e.n == 1);
    CHECK(e.min_feasible_n >= 2);
    // The reported boundary really is the boundary.
    CHECK_NOTHROW(make_schedule(e.min_feasible_n, 0.9, 0.1, 4));
    CHECK_THROWS_AS(make_schedule(e.min_feasible_n - 1, 0.9, 0.1, 4), schedule_error);
  }
}

TEST_CASE("oversized recentering is rescaled to the largest feasible constant") {
  // At this budget the requested c1 = 1 wants N_1 = 1865 > n - K, so c1 is
  // scaled down until the epoch exactly fits.
  EpochSchedule s = make_schedule(2000, 0.9, 0.1, 4);
  CHECK(s.num_epochs == 1);
  CHECK(s.epoch_length == 1000);
  REQUIRE(s.recenter_sizes.size() == 1);
  CHECK(s.recenter_sizes[0] == 1000);
  CHECK(s.total_samples() == 2000);
  CHECK(s.c1 < 1.0);
  CHECK(s.c1_requested == 1.0);
}

TEST_CASE("schedule validates its arguments") {
  CHECK_THROWS_AS(make_schedule(1000, 0.0, 0.1, 4), validation_error);
  CHECK_THROWS_AS(make_schedule(1000, 1.0, 0.1, 4), validation_error);
  CHECK_THROWS_AS(make_schedule(1000, 0.9, 0.0, 4), validation_error);
  CHECK_THROWS_AS(make_schedule(1000, 0.9, 1.5, 4), validation_error);
  CHECK_THROWS_AS(make_schedule(1000, 0.9, 0.1, 0), validation_error);
  CHECK_THROWS_AS(make_schedule(1000, 0.9, 0.1, 4, 0.0), validation_error);
  CHECK_THROWS_AS(make_schedule(1000, 0.9, 0.1, 4, 1.0, 1.0), validation_error);
  CHECK_THROWS_AS(make_schedule(0, 0.9, 0.1, 4), validation_error);
}

TEST_CASE("alternative growth bases are honored") {
  EpochSchedule s = make_schedule(56889, 0.9, 0.1, 4, 1.0, 2.0);
  CHECK(s.base == 2.0);
  CHECK(s.num_epochs >= 1);
  CHECK(s.total_samples() <= 56889);
  if (s.recenter_sizes.size() >= 2) {
    // Consecutive re-centerings grow by roughly the base.
    double ratio = static_cast<double>(s.recenter_sizes[1]) /
                   static_cast<double>(s.recenter_sizes[0]);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.01));
  }
  CHECK(s.describe().find("base=2") != std::string::npos);
}

TEST_CASE("constant-stepsize q-learning on a noiseless instance is value iteration") {
  TabularMDP m = testutil::random_deterministic_mdp(5, 3, 0.9, 17);
  SeededSampler sampler(m, 3);
  QFunction q0 = QFunction::Zero(5, 3);
  auto [q, record] = standard_q_learning(sampler, 25, q0, StepsizeRule::poly(0.0));
  QFunction vi = testutil::value_iteration(m, 25);
  CHECK(linf_distance(q, vi) == 0.0);
  CHECK(record.samples_consumed == 25);
}

TEST_CASE("scalar q-learning follows its mean and variance recursions") {
  const double gamma = 0.5, reward = 1.0, sigma = 0.5;
  TabularMDP m = scalar_mdp(gamma, reward, sigma);
  const std::int64_t n = 5000;
  SeededSampler sampler(m, 4242);
  auto [q, record] = standard_q_learning(sampler, n, QFunction::Zero(1, 1),
                                         StepsizeRule::rescaled());

  // Exact recursions for the iterate's mean and variance.
  double mean = 0.0, var = 0.0;
  for (std::int64_t k = 1; k <= n; ++k) {
    double alpha = 1.0 / (1.0 + (1.0 - gamma) * static_cast<double>(k));
    double damp = 1.0 - alpha * (1.0 - gamma);
    mean = damp * mean + alpha * reward;
    var = damp * damp * var + alpha * alpha * sigma * sigma;
  }
  CHECK(std::abs(q(0, 0) - mean) <= 5.0 * std::sqrt(var));
  // And the iterate is near the fixed point r/(1-gamma) = 2.
  CHECK(std::abs(q(0, 0) - 2.0) <= std::abs(mean - 2.0) + 5.0 * std::sqrt(var));
  CHECK(record.samples_consumed == n);
}

TEST_CASE("standard q-learning traces against a reference") {
  TabularMDP m = two_state_family_mdp(0.9, 0.5);
  QFunction qstar = two_state_family_qstar(0.9, 0.5);
  SeededSampler sampler(m, 9);
  SolverOptions opts;
  opts.qstar = &qstar;
  auto [q, record] = standard_q_learning(sampler, 100, QFunction::Zero(2, 2),
                                         StepsizeRule::rescaled(), opts);
  REQUIRE(record.trace.size() == 100);
  CHECK(record.trace.front().epoch == 0);
  CHECK(record.trace.front().iter == 1);
  CHECK(record.trace.front().samples_used == 1);
  CHECK(record.trace.back().iter == 100);
  CHECK(record.trace.back().err_linf == doctest::Approx(linf_distance(q, qstar)).epsilon(1e-12));
  std::string csv = record.to_csv();
  CHECK(csv.rfind("epoch,iter,samples_used,err_linf\n", 0) == 0);
}

TEST_CASE("vr update with the anchor at the iterate reduces to the re-centered target") {
  TabularMDP m = testutil::random_mdp(3, 2, 0.9, 0.5, 55);
  QFunction qbar = testutil::random_q(3, 2, 2.0, 56);
  QFunction tbar = testutil::random_q(3, 2, 2.0, 57);
  SeededSampler sampler(m, 6);
  TransitionSample s = sampler.draw();
  // theta == qbar: the two empirical terms cancel exactly.
  QFunction out = vr_update(qbar, 0.25, qbar, tbar, s, m);
  QFunction expected = 0.75 * qbar + 0.25 * tbar;
  CHECK(linf_distance(out, expected) < 1e-14);
}

TEST_CASE("vr update matches the hand formula on a fixed sample") {
  TabularMDP m = testutil::random_mdp(2, 2, 0.8, 0.0, 60);
  QFunction theta = testutil::random_q(2, 2, 1.0, 61);
  QFunction qbar = testutil::random_q(2, 2, 1.0, 62);
  QFunction tbar = testutil::random_q(2, 2, 1.0, 63);
  TransitionSample s;
  s.next_state.resize(2, 2);
  s.next_state << 1, 0, 0, 1;
  s.reward.resize(2, 2);
  s.reward << 0.3, -0.2, 0.1, 0.8;
  const double alpha = 0.4;
  QFunction out = vr_update(theta, alpha, qbar, tbar, s, m);
  QFunction expected = (1.0 - alpha) * theta +
                       alpha * (empirical_bellman(s, m, theta) - empirical_bellman(s, m, qbar) + tbar);
  CHECK(linf_distance(out, expected) < 1e-14);
}

TEST_CASE("vr update validates the stepsize") {
  TabularMDP m = testutil::random_mdp(2, 2, 0.8, 0.0, 70);
  QFunction q = QFunction::Zero(2, 2);
  SeededSampler sampler(m, 2);
  TransitionSample s = sampler.draw();
  CHECK_THROWS_AS(vr_update(q, 0.0, q, q, s, m), validation_error);
  CHECK_THROWS_AS(vr_update(q, 1.5, q, q, s, m), validation_error);
  CHECK_NOTHROW(vr_update(q, 1.0, q, q, s, m));
}

TEST_CASE("an epoch with no iterations returns the anchor and pays for re-centering") {
  TabularMDP m = testutil::random_mdp(3, 2, 0.9, 0.3, 80);
  QFunction qbar = testutil::random_q(3, 2, 1.0, 81);
  SeededSampler sampler(m, 5);
  QFunction out = run_epoch(qbar, 0, 7, sampler, m);
  CHECK(linf_distance(out, qbar) == 0.0);
  CHECK(sampler.draws_consumed() == 7);
  CHECK_THROWS_AS(run_epoch(qbar, -1, 1, sampler, m), validation_error);
  CHECK_THROWS_AS(run_epoch(qbar, 1, 0, sampler, m), validation_error);
}

TEST_CASE("a noiseless epoch is exactly damped value iteration") {
  TabularMDP m = testutil::random_deterministic_mdp(4, 2, 0.9, 90);
  QFunction qbar = testutil::random_q(4, 2, 1.0, 91);
  const std::int64_t k_steps = 50;
  SeededSampler sampler(m, 11);
  QFunction out = run_epoch(qbar, k_steps, 3, sampler, m);
  CHECK(sampler.draws_consumed() == 53);

  // With deterministic transitions and zero noise, T_hat == T and the
  // variance-reduced step collapses to theta <- (1-a) theta + a T(theta).
  QFunction theta = qbar;
  for (std::int64_t k = 1; k <= k_steps; ++k) {
    double alpha = 1.0 / (1.0 + (1.0 - m.gamma()) * static_cast<double>(k));
    theta = (1.0 - alpha) * theta + alpha * bellman_optimality(m, theta);
  }
  CHECK(linf_distance(out, theta) < 1e-12);
}

TEST_CASE("an epoch stops at the sample budget") {
  TabularMDP m = testutil::random_mdp(2, 2, 0.9, 0.1, 100);
  QFunction qbar = QFunction::Zero(2, 2);
  SeededSampler sampler(m, 1, 10);
  CHECK_THROWS_AS(run_epoch(qbar, 8, 3, sampler, m), budget_error);
}

TEST_CASE("vr q-learning drives noiseless instances to machine-level accuracy") {
  // Unit-scale version of the exact-recovery contract: with K >= 50/(1-gamma)
  // per epoch and eight epochs, the final error collapses.
  for (double gamma : {0.8, 0.9}) {
    TabularMDP m = testutil::random_deterministic_mdp(5, 3, gamma, 7);
    QFunction qstar = solve_optimal_q(m);
    EpochSchedule s;
    s.num_epochs = 8;
    s.epoch_length = static_cast<std::int64_t>(std::ceil(50.0 / (1.0 - gamma)));
    s.recenter_sizes.assign(8, 1);
    s.delta = 0.1;
    SeededSampler sampler(m, 21);
    auto [q, record] = vr_q_learning(sampler, s, QFunction::Zero(5, 3), m);
    CHECK(linf_distance(q, qstar) <= 1e-6);
    CHECK(record.samples_consumed == s.total_samples());
  }
}

TEST_CASE("vr q-learning consumes exactly the scheduled samples") {
  TabularMDP m = two_state_family_mdp(0.9, 0.5);
  EpochSchedule s = make_schedule(8000, 0.9, 0.1, 4);
  SeededSampler sampler(m, 33);
  auto [q, record] = vr_q_learning(sampler, s, QFunction::Zero(2, 2), m);
  CHECK(record.samples_consumed == s.total_samples());
  CHECK(record.samples_consumed == sampler.draws_consumed());
  CHECK(q.allFinite());
}

TEST_CASE("vr q-learning is reproducible and seed-sensitive") {
  TabularMDP m = two_state_family_mdp(0.9, 0.5);
  EpochSchedule s = make_schedule(6000, 0.9, 0.1, 4);
  SeededSampler a(m, 77);
  SeededSampler b(m, 77);
  SeededSampler c(m, 78);
  QFunction qa = vr_q_learning(a, s, QFunction::Zero(2, 2), m).first;
  QFunction qb = vr_q_learning(b, s, QFunction::Zero(2, 2), m).first;
  QFunction qc = vr_q_learning(c, s, QFunction::Zero(2, 2), m).first;
  CHECK(linf_distance(qa, qb) == 0.0);
  CHECK(linf_distance(qa, qc) > 0.0);
}

TEST_CASE("vr q-learning trace walks the epochs in order") {
  TabularMDP m = two_state_family_mdp(0.8, 0.5);
  QFunction qstar = two_state_family_qstar(0.8, 0.5);
  EpochSchedule s;
  s.num_epochs = 3;
  s.epoch_length = 40;
  s.recenter_sizes = {2, 5, 9};
  s.delta = 0.1;
  SeededSampler sampler(m, 10);
  SolverOptions opts;
  opts.qstar = &qstar;
  auto [q, record] = vr_q_learning(sampler, s, QFunction::Zero(2, 2), m, opts);

  REQUIRE(record.trace.size() == 120);
  CHECK(record.trace.front().epoch == 1);
  CHECK(record.trace.back().epoch == 3);
  std::int64_t prev_samples = 0;
  std::int64_t prev_iter = 0;
  for (const TracePoint& pt : record.trace) {
    CHECK(pt.samples_used > prev_samples);
    CHECK(pt.iter == prev_iter + 1);
    prev_samples = pt.samples_used;
    prev_iter = pt.iter;
    CHECK(pt.err_linf >= 0.0);
  }
  // Per-epoch anchors are recorded for each epoch output.
  REQUIRE(record.epoch_anchors.size() == 3);
  CHECK(linf_distance(record.epoch_anchors.back(), q) == 0.0);
  // The first trace point sits after the first re-centering batch.
  CHECK(record.trace.front().samples_used == 3);
}

TEST_CASE("vr q-learning validates the schedule and dimensions") {
  TabularMDP m = two_state_family_mdp(0.9, 0.5);
  TabularMDP other = testutil::random_mdp(3, 2, 0.9, 0.0, 4);
  SeededSampler sampler(m, 1);
  EpochSchedule bad;
  bad.num_epochs = 0;
  CHECK_THROWS_AS(vr_q_learning(sampler, bad, QFunction::Zero(2, 2), m), validation_error);
  EpochSchedule s = make_schedule(5000, 0.9, 0.1, 4);
  CHECK_THROWS_AS(vr_q_learning(sampler, s, QFunction::Zero(2, 2), other), dimension_error);
}

TEST_CASE("initialization contract is checked only on request") {
  TabularMDP m = two_state_family_mdp(0.9, 0.5);
  EpochSchedule s = make_schedule(5000, 0.9, 0.1, 4);

  // Far initial point passes silently without a reference optimum...
  QFunction far = QFunction::Constant(2, 2, 1e6);
  SeededSampler a(m, 2);
  auto [q, record] = vr_q_learning(a, s, far, m);
  CHECK_FALSE(record.init_contract_checked);

  // ...enforcing without a reference is rejected outright...
  QFunction qstar = two_state_family_qstar(0.9, 0.5);
  SeededSampler b(m, 2);
  SolverOptions opts;
  opts.enforce_init_contract = true;
  CHECK_THROWS_AS(vr_q_learning(b, s, far, m, opts), validation_error);

  // ...and trips the contract when the reference shows the start is too far.
  opts.qstar = &qstar;
  SeededSampler b2(m, 2);
  CHECK_THROWS_AS(vr_q_learning(b2, s, far, m, opts), validation_error);

  // A compliant start records a checked, satisfied contract.  The all-zero
  // start is *not* compliant here: the optimum has sup-norm ~9.2 while the
  // contract radius is max|r|/sqrt(1-gamma) ~ 3.16.
  SeededSampler c(m, 2);
  auto [q2, record2] = vr_q_learning(c, s, qstar, m, opts);
  CHECK(record2.init_contract_checked);
  CHECK(record2.init_contract_ok);

  // Diagnostic mode: reference given, enforcement off -> violation is
  // recorded but the run proceeds.
  SolverOptions diag;
  diag.qstar = &qstar;
  SeededSampler d(m, 2);
  auto [q3, record3] = vr_q_learning(d, s, QFunction::Zero(2, 2), m, diag);
  CHECK(record3.init_contract_checked);
  CHECK_FALSE(record3.init_contract_ok);
}

TEST_CASE("shifted fixed point solves the re-centered equation") {
  TabularMDP m = testutil::random_mdp(4, 3, 0.9, 0.2, 120);
  QFunction qstar = solve_optimal_q(m);
  QFunction qbar = testutil::random_q(4, 3, 1.0, 121);

  // Exact re-centering: the shifted equation is the Bellman equation itself.
  QFunction t_qbar = bellman_optimality(m, qbar);
  QFunction fp = shifted_fixed_point(m, qbar, t_qbar, 1e-12);
  CHECK(linf_distance(fp, qstar) < 1e-9);

  // Constant re-centering offset c shifts the fixed point by c/(1-gamma).
  const double c = 0.7;
  QFunction t_shifted = t_qbar.array() + c;
  QFunction fp2 = shifted_fixed_point(m, qbar, t_shifted, 1e-12);
  QFunction expected = qstar.array() + c / (1.0 - m.gamma());
  CHECK(linf_distance(fp2, expected) < 1e-8);

  CHECK_THROWS_AS(shifted_fixed_point(m, qbar, t_qbar, 0.0), validation_error);
}

TEST_CASE("long epochs approach the shifted fixed point") {
  TabularMDP m = testutil::random_mdp(3, 2, 0.5, 0.3, 130);
  QFunction qbar = testutil::random_q(3, 2, 0.5, 131);
  const std::int64_t n_m = 400;

  // Recover the epoch's own re-centering estimate by replaying the stream.
  SeededSampler probe(m, 14);
  QFunction tbar = monte_carlo_bellman(probe, qbar, n_m);
  QFunction target = shifted_fixed_point(m, qbar, tbar, 1e-12);

  SeededSampler sampler(m, 14);
  QFunction out = run_epoch(qbar, 20000, n_m, sampler, m);
  CHECK(linf_distance(out, target) < 0.05);
}

TEST_CASE("an epoch halves the anchor error up to a sampling floor") {
  const TabularMDP m = two_state_family_mdp(0.9, 0.5);
  const QFunction qstar = two_state_family_qstar(0.9, 0.5);
  const EpochSchedule s = make_schedule(10000, 0.9, 0.1, m.dim());

  // Anchor a fixed distance from the optimum; the epoch output should land
  // within half that distance plus a generous Monte-Carlo floor. Measured
  // medians sit near 0.03, far inside the bound.
  const double err0 = 0.8;
  const QFunction qbar = qstar.array() + err0;
  std::vector<double> errs;
  for (int seed = 0; seed < 20; ++seed) {
    SeededSampler sampler(m, derive_seed(700, static_cast<std::uint64_t>(seed)));
    const QFunction out = run_epoch(qbar, s.epoch_length, s.recenter_sizes[0], sampler, m);
    errs.push_back(linf_distance(out, qstar));
  }
  std::sort(errs.begin(), errs.end());
  const double med = 0.5 * (errs[9] + errs[10]);
  CHECK(med <= err0 / 2 + 0.1);
  CHECK(med < err0);
}

TEST_CASE("epoch errors contract statistically under reference budgets") {
  struct Config {
    double gamma;
    std::uint64_t stream;
  };
  for (const Config cfg : {Config{0.9, 4200}, Config{0.95, 4300}}) {
    CAPTURE(cfg.gamma);
    const TabularMDP m = two_state_family_mdp(cfg.gamma, 0.5);
    const QFunction qstar = two_state_family_qstar(cfg.gamma, 0.5);
    const EpochSchedule s = make_schedule(scaling_budget(cfg.gamma), cfg.gamma, 0.1, m.dim());
    const double nu_inf = max_nu_over_optimal(m).first;

    // Each epoch should at least halve the incoming error, up to the
    // re-centering noise floor, in the vast majority of (seed, epoch) pairs.
    int pairs = 0;
    int contracting = 0;
    SolverOptions opts;
    opts.record_trace = false;
    const QFunction q0 = QFunction::Zero(m.num_states(), m.num_actions());
    for (int seed = 0; seed < 50; ++seed) {
      SeededSampler sampler(m, derive_seed(cfg.stream, static_cast<std::uint64_t>(seed)));
      const auto [q, rec] = vr_q_learning(sampler, s, q0, m, opts);
      double prev = linf_distance(q0, qstar);
      for (std::size_t e = 0; e < rec.epoch_anchors.size(); ++e) {
        const double cur = linf_distance(rec.epoch_anchors[e], qstar);
        const double floor_m =
            4.0 * nu_inf / std::sqrt(static_cast<double>(s.recenter_sizes[e]));
        ++pairs;
        if (cur <= prev / 2 + floor_m) ++contracting;
        prev = cur;
      }
    }
    CHECK(pairs == 50 * s.num_epochs);
    CHECK(contracting * 10 >= pairs * 8);
  }
}

TEST_CASE("re-centering collapses the update variance at the anchor") {
  // At theta = qbar the two empirical applications cancel and the update
  // target is the re-centering average itself, so across replications its
  // variance is the single-sample variance divided by the batch size.
  const std::int64_t n_m = 16;
  const int reps = 4000;
  for (int inst = 0; inst < 10; ++inst) {
    CAPTURE(inst);
    const TabularMDP m = testutil::random_mdp(3, 2, 0.85, 0.5, 900 + static_cast<std::uint64_t>(inst));
    const QFunction qbar = testutil::random_q(3, 2, 1.0, 950 + static_cast<std::uint64_t>(inst));

    QFunction vr_sum = QFunction::Zero(3, 2), vr_sq = QFunction::Zero(3, 2);
    QFunction ql_sum = QFunction::Zero(3, 2), ql_sq = QFunction::Zero(3, 2);
    for (int r = 0; r < reps; ++r) {
      SeededSampler sampler(m, derive_seed(1700 + static_cast<std::uint64_t>(inst),
                                           static_cast<std::uint64_t>(r)));
      const QFunction tbar = monte_carlo_bellman(sampler, qbar, n_m);
      const QFunction that = empirical_bellman(sampler.draw(), m, qbar);
      vr_sum += tbar;
      vr_sq.array() += tbar.array().square();
      ql_sum += that;
      ql_sq.array() += that.array().square();
    }
    const double dn = static_cast<double>(reps);
    const QFunction var_vr = (vr_sq.array() - vr_sum.array().square() / dn) / (dn - 1.0);
    const QFunction var_ql = (ql_sq.array() - ql_sum.array().square() / dn) / (dn - 1.0);
    for (Eigen::Index x = 0; x < 3; ++x) {
      for (Eigen::Index u = 0; u < 2; ++u) {
        const double ratio = var_vr(x, u) * static_cast<double>(n_m) / var_ql(x, u);
        CHECK(ratio > 0.8);
        CHECK(ratio < 1.25);
        CHECK(var_vr(x, u) < var_ql(x, u) / 4.0);
      }
    }
  }
}
