#include "vrql/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vrql {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kEntryTol = 1e-12;

void require(bool ok, const std::string& message) {
  if (!ok) throw validation_error(message);
}

}  // namespace

TabularMDP::TabularMDP(double gamma, std::vector<Eigen::MatrixXd> transitions,
                       Eigen::MatrixXd rewards, double reward_noise)
    : gamma_(gamma), reward_noise_(reward_noise), transitions_(std::move(transitions)), rewards_(std::move(rewards)) {
  require(rewards_.rows() >= 1 && rewards_.cols() >= 1, "rewards table must be at least 1x1");
  require(std::isfinite(gamma_) && gamma_ > 0.0 && gamma_ < 1.0,
          "gamma must lie strictly inside (0, 1), got " + std::to_string(gamma_));
  require(std::isfinite(reward_noise_) && reward_noise_ >= 0.0, "reward_noise must be finite and nonnegative");
  require(rewards_.allFinite(), "rewards table must be finite");
  const Eigen::Index s = rewards_.rows();
  const Eigen::Index a = rewards_.cols();
  require(static_cast<Eigen::Index>(transitions_.size()) == a,
          "expected one transition kernel per action: " + std::to_string(a) + " kernels, got " +
              std::to_string(transitions_.size()));
  for (Eigen::Index u = 0; u < a; ++u) {
    Eigen::MatrixXd& p = transitions_[static_cast<std::size_t>(u)];
    require(p.rows() == s && p.cols() == s,
            "kernel for action " + std::to_string(u) + " must be " + std::to_string(s) + "x" + std::to_string(s));
    require(p.allFinite(), "kernel for action " + std::to_string(u) + " must be finite");
    for (Eigen::Index x = 0; x < s; ++x) {
      double row_sum = 0.0;
      for (Eigen::Index y = 0; y < s; ++y) {
        double v = p(x, y);
        require(v >= -kEntryTol, "kernel entry P_" + std::to_string(u) + "(" + std::to_string(y) + "|" +
                                     std::to_string(x) + ") is negative: " + std::to_string(v));
        if (v < 0.0) v = 0.0;
        p(x, y) = v;
        row_sum += v;
      }
      require(std::abs(row_sum - 1.0) <= kRowSumTol,
              "kernel row (action " + std::to_string(u) + ", state " + std::to_string(x) +
                  ") sums to " + std::to_string(row_sum) + ", expected 1 within 1e-12");
      p.row(x) /= row_sum;
    }
  }
}

TabularMDP TabularMDP::with_rewards(Eigen::MatrixXd rewards) const {
  require(rewards.rows() == rewards_.rows() && rewards.cols() == rewards_.cols(),
          "replacement rewards must be " + std::to_string(rewards_.rows()) + "x" +
              std::to_string(rewards_.cols()));
  require(rewards.allFinite(), "rewards table must be finite");
  TabularMDP out = *this;
  out.rewards_ = std::move(rewards);
  return out;
}

Eigen::VectorXd flatten(const QFunction& q) {
  Eigen::VectorXd v(q.size());
  for (Eigen::Index x = 0; x < q.rows(); ++x)
    for (Eigen::Index u = 0; u < q.cols(); ++u) v[flat_index(x, u, q.cols())] = q(x, u);
  return v;
}

QFunction unflatten(const Eigen::VectorXd& v, Eigen::Index num_states, Eigen::Index num_actions) {
  QFunction q(num_states, num_actions);
  for (Eigen::Index x = 0; x < num_states; ++x)
    for (Eigen::Index u = 0; u < num_actions; ++u) q(x, u) = v[flat_index(x, u, num_actions)];
  return q;
}

Eigen::VectorXd state_values(const QFunction& q) { return q.rowwise().maxCoeff(); }

void check_shape(const TabularMDP& mdp, const QFunction& q, const char* what) {
  if (q.rows() != mdp.num_states() || q.cols() != mdp.num_actions())
    throw dimension_error(std::string(what) + ": expected " + std::to_string(mdp.num_states()) + "x" +
                          std::to_string(mdp.num_actions()) + " table, got " + std::to_string(q.rows()) + "x" +
                          std::to_string(q.cols()));
}

void check_policy(const TabularMDP& mdp, const Policy& pi) {
  if (pi.num_states() != mdp.num_states())
    throw dimension_error("policy covers " + std::to_string(pi.num_states()) + " states, MDP has " +
                          std::to_string(mdp.num_states()));
  for (Eigen::Index x = 0; x < pi.num_states(); ++x)
    if (pi(x) < 0 || pi(x) >= mdp.num_actions())
      throw dimension_error("policy action out of range at state " + std::to_string(x));
}

QFunction bellman_optimality(const TabularMDP& mdp, const QFunction& q) {
  check_shape(mdp, q, "bellman_optimality");
  const Eigen::VectorXd v = state_values(q);
  QFunction out(mdp.num_states(), mdp.num_actions());
  for (Eigen::Index u = 0; u < mdp.num_actions(); ++u)
    out.col(u) = mdp.rewards().col(u) + mdp.gamma() * (mdp.kernel(u) * v);
  return out;
}

QFunction apply_policy_transition(const TabularMDP& mdp, const Policy& pi, const QFunction& q) {
  check_shape(mdp, q, "apply_policy_transition");
  check_policy(mdp, pi);
  Eigen::VectorXd w(mdp.num_states());
  for (Eigen::Index x = 0; x < mdp.num_states(); ++x) w[x] = q(x, pi(x));
  QFunction out(mdp.num_states(), mdp.num_actions());
  for (Eigen::Index u = 0; u < mdp.num_actions(); ++u) out.col(u) = mdp.kernel(u) * w;
  return out;
}

Policy greedy_policy(const QFunction& q, double tie_tol) {
  Policy pi;
  pi.action_of.resize(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index x = 0; x < q.rows(); ++x) {
    const double best = q.row(x).maxCoeff();
    Eigen::Index pick = 0;
    for (Eigen::Index u = 0; u < q.cols(); ++u) {
      if (q(x, u) >= best - tie_tol) {
        pick = u;
        break;
      }
    }
    pi.action_of[static_cast<std::size_t>(x)] = pick;
  }
  return pi;
}

Eigen::MatrixXd policy_transition_matrix(const TabularMDP& mdp, const Policy& pi) {
  check_policy(mdp, pi);
  const Eigen::Index d = mdp.dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index x = 0; x < mdp.num_states(); ++x)
    for (Eigen::Index u = 0; u < mdp.num_actions(); ++u)
      for (Eigen::Index y = 0; y < mdp.num_states(); ++y)
        m(flat_index(x, u, mdp.num_actions()), flat_index(y, pi(y), mdp.num_actions())) += mdp.kernel(u)(x, y);
  return m;
}

QFunction resolvent_apply(const TabularMDP& mdp, const Policy& pi, const QFunction& m) {
  check_shape(mdp, m, "resolvent_apply");
  const Eigen::Index d = mdp.dim();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) - mdp.gamma() * policy_transition_matrix(mdp, pi);
  Eigen::VectorXd sol = a.partialPivLu().solve(flatten(m));
  return unflatten(sol, mdp.num_states(), mdp.num_actions());
}

Eigen::MatrixXd resolvent_matrix(const TabularMDP& mdp, const Policy& pi) {
  const Eigen::Index d = mdp.dim();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) - mdp.gamma() * policy_transition_matrix(mdp, pi);
  return a.partialPivLu().inverse();
}

QFunction policy_q_value(const TabularMDP& mdp, const Policy& pi) {
  return resolvent_apply(mdp, pi, mdp.rewards());
}

QFunction solve_optimal_q(const TabularMDP& mdp, double tol) {
  // Howard policy iteration with exact evaluation; ties in the improvement
  // step go to the smallest action index, so the loop terminates once the
  // greedy policy reproduces itself.
  Policy pi = greedy_policy(mdp.rewards());
  QFunction q = policy_q_value(mdp, pi);
  const int max_rounds = 100000;
  for (int round = 0; round < max_rounds; ++round) {
    Policy next = greedy_policy(q);
    if (next == pi) break;
    pi = next;
    q = policy_q_value(mdp, pi);
  }
  const double residual = linf_distance(bellman_optimality(mdp, q), q);
  if (residual > tol) throw convergence_error("policy iteration did not reach tolerance", residual);
  return q;
}

double linf_distance(const QFunction& a, const QFunction& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw dimension_error("linf_distance: shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

double span_seminorm(const QFunction& q) {
  if (q.size() == 0) return 0.0;
  return q.maxCoeff() - q.minCoeff();
}

namespace {

nlohmann::json mdp_to_json(const TabularMDP& mdp) {
  nlohmann::json j;
  j["num_states"] = mdp.num_states();
  j["num_actions"] = mdp.num_actions();
  j["gamma"] = mdp.gamma();
  j["reward_noise"] = mdp.reward_noise();
  auto transitions = nlohmann::json::array();
  for (Eigen::Index u = 0; u < mdp.num_actions(); ++u) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index x = 0; x < mdp.num_states(); ++x) {
      auto row = nlohmann::json::array();
      for (Eigen::Index y = 0; y < mdp.num_states(); ++y) row.push_back(mdp.kernel(u)(x, y));
      rows.push_back(std::move(row));
    }
    transitions.push_back(std::move(rows));
  }
  j["transitions"] = std::move(transitions);
  auto rewards = nlohmann::json::array();
  for (Eigen::Index x = 0; x < mdp.num_states(); ++x) {
    auto row = nlohmann::json::array();
    for (Eigen::Index u = 0; u < mdp.num_actions(); ++u) row.push_back(mdp.rewards()(x, u));
    rewards.push_back(std::move(row));
  }
  j["rewards"] = std::move(rewards);
  return j;
}

TabularMDP mdp_from_json(const nlohmann::json& j) {
  for (const char* key : {"num_states", "num_actions", "gamma", "reward_noise", "transitions", "rewards"})
    require(j.contains(key), std::string("MDP file missing required key \"") + key + "\"");
  require(j["num_states"].is_number_integer() && j["num_actions"].is_number_integer(),
          "num_states and num_actions must be integers");
  const Eigen::Index s = j["num_states"].get<Eigen::Index>();
  const Eigen::Index a = j["num_actions"].get<Eigen::Index>();
  require(s >= 1 && a >= 1, "num_states and num_actions must be at least 1");
  require(j["transitions"].is_array() && static_cast<Eigen::Index>(j["transitions"].size()) == a,
          "transitions must be an array with one kernel per action");
  require(j["rewards"].is_array() && static_cast<Eigen::Index>(j["rewards"].size()) == s,
          "rewards must have one row per state");
  std::vector<Eigen::MatrixXd> kernels;
  kernels.reserve(static_cast<std::size_t>(a));
  for (Eigen::Index u = 0; u < a; ++u) {
    const auto& ju = j["transitions"][static_cast<std::size_t>(u)];
    require(ju.is_array() && static_cast<Eigen::Index>(ju.size()) == s,
            "transition kernel for action " + std::to_string(u) + " must have one row per state");
    Eigen::MatrixXd p(s, s);
    for (Eigen::Index x = 0; x < s; ++x) {
      const auto& row = ju[static_cast<std::size_t>(x)];
      require(row.is_array() && static_cast<Eigen::Index>(row.size()) == s,
              "transition row has wrong length (action " + std::to_string(u) + ", state " + std::to_string(x) + ")");
      for (Eigen::Index y = 0; y < s; ++y) {
        require(row[static_cast<std::size_t>(y)].is_number(), "transition entries must be numbers");
        p(x, y) = row[static_cast<std::size_t>(y)].get<double>();
      }
    }
    kernels.push_back(std::move(p));
  }
  Eigen::MatrixXd rewards(s, a);
  for (Eigen::Index x = 0; x < s; ++x) {
    const auto& row = j["rewards"][static_cast<std::size_t>(x)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == a,
            "reward row has wrong length at state " + std::to_string(x));
    for (Eigen::Index u = 0; u < a; ++u) {
      require(row[static_cast<std::size_t>(u)].is_number(), "reward entries must be numbers");
      rewards(x, u) = row[static_cast<std::size_t>(u)].get<double>();
    }
  }
  require(j["gamma"].is_number() && j["reward_noise"].is_number(), "gamma and reward_noise must be numbers");
  return TabularMDP(j["gamma"].get<double>(), std::move(kernels), std::move(rewards),
                    j["reward_noise"].get<double>());
}

}  // namespace

TabularMDP TabularMDP::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw validation_error("MDP file is not valid JSON");
  return mdp_from_json(j);
}

TabularMDP TabularMDP::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open MDP file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string TabularMDP::to_json_text() const { return mdp_to_json(*this).dump(2); }

void TabularMDP::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write MDP file: " + path);
  out << to_json_text() << "\n";
}

}  // namespace vrql
