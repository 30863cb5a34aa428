#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "test_util.hpp"
#include "vrql/errors.hpp"
#include "vrql/mdp.hpp"
#include "vrql/sampling.hpp"

using namespace vrql;

TEST_CASE("derive_seed is deterministic and spreads indices") {
  CHECK(derive_seed(42, 0) == derive_seed(42, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(42, 0) != derive_seed(43, 0));
}

TEST_CASE("sampler is reproducible for a fixed seed") {
  TabularMDP m = testutil::random_mdp(4, 3, 0.9, 0.5, 7);
  SeededSampler a(m, 123);
  SeededSampler b(m, 123);
  for (int i = 0; i < 50; ++i) {
    TransitionSample sa = a.draw();
    TransitionSample sb = b.draw();
    CHECK((sa.next_state.array() == sb.next_state.array()).all());
    CHECK((sa.reward.array() == sb.reward.array()).all());
  }
  SeededSampler c(m, 124);
  TransitionSample sc = c.draw();
  SeededSampler d(m, 123);
  TransitionSample sd = d.draw();
  CHECK_FALSE(((sc.next_state.array() == sd.next_state.array()).all() &&
               (sc.reward.array() == sd.reward.array()).all()));
}

TEST_CASE("transition frequencies match the kernel") {
  // Two-state chain with known probabilities.
  std::vector<Eigen::MatrixXd> kernels(1);
  kernels[0].resize(2, 2);
  kernels[0] << 0.3, 0.7, 0.85, 0.15;
  Eigen::MatrixXd rewards = Eigen::MatrixXd::Zero(2, 1);
  TabularMDP m(0.9, kernels, rewards, 0.0);

  const int n = 200000;
  SeededSampler sampler(m, 555);
  int count00 = 0, count10 = 0;
  TransitionSample s;
  for (int i = 0; i < n; ++i) {
    sampler.draw_into(s);
    if (s.next_state(0, 0) == 0) ++count00;
    if (s.next_state(1, 0) == 0) ++count10;
  }
  // 5-sigma band around the binomial mean.
  auto band = [&](double p) { return 5.0 * std::sqrt(p * (1.0 - p) / n); };
  CHECK(std::abs(static_cast<double>(count00) / n - 0.3) < band(0.3));
  CHECK(std::abs(static_cast<double>(count10) / n - 0.85) < band(0.85));
}

TEST_CASE("reward noise has the right mean and variance") {
  std::vector<Eigen::MatrixXd> kernels(1);
  kernels[0] = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd rewards(1, 1);
  rewards << 2.5;
  const double sigma = 0.8;
  TabularMDP m(0.5, kernels, rewards, sigma);

  const int n = 100000;
  SeededSampler sampler(m, 999);
  double sum = 0.0, sum_sq = 0.0;
  TransitionSample s;
  for (int i = 0; i < n; ++i) {
    sampler.draw_into(s);
    sum += s.reward(0, 0);
    sum_sq += s.reward(0, 0) * s.reward(0, 0);
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean - 2.5) < 5.0 * sigma / std::sqrt(static_cast<double>(n)));
  // SE of the sample variance of a normal is sigma^2 sqrt(2/n).
  CHECK(std::abs(var - sigma * sigma) < 5.0 * sigma * sigma * std::sqrt(2.0 / n));
}

TEST_CASE("zero reward noise reproduces the mean table exactly") {
  TabularMDP m = testutil::random_mdp(3, 2, 0.8, 0.0, 17);
  SeededSampler sampler(m, 5);
  for (int i = 0; i < 10; ++i) {
    TransitionSample s = sampler.draw();
    CHECK((s.reward.array() == m.rewards().array()).all());
  }
}

TEST_CASE("budget is enforced exactly") {
  TabularMDP m = testutil::random_mdp(2, 2, 0.9, 0.1, 3);
  SeededSampler sampler(m, 1, 3);
  CHECK(sampler.budget().has_value());
  for (int i = 0; i < 3; ++i) CHECK_NOTHROW(sampler.draw());
  CHECK(sampler.draws_consumed() == 3);
  CHECK_THROWS_AS(sampler.draw(), budget_error);
  // The failed draw does not consume budget.
  CHECK(sampler.draws_consumed() == 3);
}

TEST_CASE("budget error carries the numbers") {
  TabularMDP m = testutil::random_mdp(2, 2, 0.9, 0.0, 3);
  SeededSampler sampler(m, 1, 2);
  sampler.draw();
  sampler.draw();
  try {
    sampler.draw();
    FAIL("expected budget_error");
  } catch (const budget_error& e) {
    CHECK(e.budget == 2);
    CHECK(e.consumed == 2);
  }
}

TEST_CASE("empirical bellman matches the single-sample formula") {
  TabularMDP m = testutil::random_mdp(3, 2, 0.9, 0.4, 8);
  QFunction q = testutil::random_q(3, 2, 2.0, 9);
  SeededSampler sampler(m, 77);
  TransitionSample s = sampler.draw();
  QFunction t = empirical_bellman(s, m, q);
  for (Eigen::Index x = 0; x < 3; ++x)
    for (Eigen::Index u = 0; u < 2; ++u) {
      double expected = s.reward(x, u) + m.gamma() * q.row(s.next_state(x, u)).maxCoeff();
      CHECK(t(x, u) == expected);
    }
}

TEST_CASE("empirical_bellman_into matches empirical_bellman") {
  TabularMDP m = testutil::random_mdp(4, 3, 0.85, 0.2, 12);
  QFunction q = testutil::random_q(4, 3, 1.0, 13);
  SeededSampler sampler(m, 21);
  TransitionSample s = sampler.draw();
  QFunction a = empirical_bellman(s, m, q);
  QFunction b(4, 3);
  empirical_bellman_into(s, m, q, b);
  CHECK(linf_distance(a, b) == 0.0);
}

TEST_CASE("empirical bellman is unbiased for the exact operator") {
  TabularMDP m = testutil::random_mdp(3, 2, 0.9, 0.6, 30);
  QFunction q = testutil::random_q(3, 2, 3.0, 31);
  QFunction exact = bellman_optimality(m, q);

  const int n = 200000;
  SeededSampler sampler(m, 1234);
  QFunction sum = QFunction::Zero(3, 2);
  QFunction sum_sq = QFunction::Zero(3, 2);
  TransitionSample s;
  QFunction t(3, 2);
  for (int i = 0; i < n; ++i) {
    sampler.draw_into(s);
    empirical_bellman_into(s, m, q, t);
    sum += t;
    sum_sq += t.cwiseProduct(t);
  }
  for (Eigen::Index x = 0; x < 3; ++x)
    for (Eigen::Index u = 0; u < 2; ++u) {
      double mean = sum(x, u) / n;
      double var = sum_sq(x, u) / n - mean * mean;
      double se = std::sqrt(var / n);
      CHECK(std::abs(mean - exact(x, u)) <= 5.0 * se + 1e-12);
    }
}

TEST_CASE("monte carlo bellman averages and consumes the stated draws") {
  TabularMDP m = testutil::random_mdp(3, 2, 0.9, 0.3, 44);
  QFunction q = testutil::random_q(3, 2, 2.0, 45);
  SeededSampler sampler(m, 90);
  QFunction avg = monte_carlo_bellman(sampler, q, 5000);
  CHECK(sampler.draws_consumed() == 5000);
  // Close to the exact operator at this sample size (loose 5-sigma-ish band).
  CHECK(linf_distance(avg, bellman_optimality(m, q)) < 0.2);
  CHECK_THROWS_AS(monte_carlo_bellman(sampler, q, 0), validation_error);
}

TEST_CASE("monte carlo average equals the running mean of single draws") {
  TabularMDP m = testutil::random_mdp(2, 2, 0.8, 0.5, 50);
  QFunction q = testutil::random_q(2, 2, 1.0, 51);
  const int n = 200;
  SeededSampler a(m, 7);
  QFunction mc = monte_carlo_bellman(a, q, n);
  SeededSampler b(m, 7);
  QFunction acc = QFunction::Zero(2, 2);
  for (int i = 0; i < n; ++i) acc += empirical_bellman(b.draw(), m, q);
  CHECK(linf_distance(mc, acc / n) < 1e-12);
}

TEST_CASE("apply_sampled_policy_transition evaluates the drawn next state at pi") {
  TabularMDP m = testutil::random_mdp(4, 2, 0.9, 0.0, 60);
  Policy pi{{1, 0, 1, 0}};
  QFunction q = testutil::random_q(4, 2, 2.0, 61);
  SeededSampler sampler(m, 8);
  TransitionSample s = sampler.draw();
  QFunction out = apply_sampled_policy_transition(s, pi, q);
  for (Eigen::Index x = 0; x < 4; ++x)
    for (Eigen::Index u = 0; u < 2; ++u) {
      Eigen::Index y = s.next_state(x, u);
      CHECK(out(x, u) == q(y, pi(y)));
    }
}

TEST_CASE("transition and reward streams are independent") {
  // With the same seed, the realized transitions are identical whether or not
  // rewards are noisy, because the streams are separate.
  TabularMDP noisy = testutil::random_mdp(3, 2, 0.9, 1.0, 70);
  TabularMDP quiet(noisy.gamma(), noisy.kernels(), noisy.rewards(), 0.0);
  SeededSampler a(noisy, 31);
  SeededSampler b(quiet, 31);
  for (int i = 0; i < 20; ++i) {
    TransitionSample sa = a.draw();
    TransitionSample sb = b.draw();
    CHECK((sa.next_state.array() == sb.next_state.array()).all());
  }
}
