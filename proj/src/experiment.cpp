#include "vrql/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "vrql/errors.hpp"
#include "vrql/family.hpp"
#include "vrql/sampling.hpp"

namespace vrql {

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw validation_error(std::string("config field '") + key + "' has the wrong type");
  }
}

// Trials are independent; distribute them over a small pool and surface the
// first worker exception, if any, after joining.
void parallel_trials(std::int64_t trials, const std::function<void(std::int64_t)>& body) {
  const unsigned hw = std::thread::hardware_concurrency();
  const std::int64_t workers = std::min<std::int64_t>(trials, std::max(1u, hw));
  if (workers <= 1) {
    for (std::int64_t t = 0; t < trials; ++t) body(t);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::int64_t t = next.fetch_add(1);
        if (t >= trials) return;
        try {
          body(t);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double parse_double_field(const std::string& field, const std::string& line) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || field.empty()) {
    throw validation_error("malformed CSV number '" + field + "' in line: " + line);
  }
  return v;
}

std::int64_t parse_int_field(const std::string& field, const std::string& line) {
  char* end = nullptr;
  const long long v = std::strtoll(field.c_str(), &end, 10);
  if (end != field.c_str() + field.size() || field.empty()) {
    throw validation_error("malformed CSV integer '" + field + "' in line: " + line);
  }
  return v;
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw validation_error("config must be a JSON object");
  static const char* known[] = {"lambda", "gamma_grid", "trials",   "budget_rule",
                                "budgets", "delta",      "seed",     "c1",
                                "base",    "rows_out",   "svg_out",  "trace_out"};
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw validation_error("unknown config field '" + item.key() + "'");
  }
  ExperimentConfig c;
  read_field(j, "lambda", c.lambda);
  read_field(j, "gamma_grid", c.gamma_grid);
  read_field(j, "trials", c.trials);
  read_field(j, "budget_rule", c.budget_rule);
  read_field(j, "budgets", c.budgets);
  read_field(j, "delta", c.delta);
  read_field(j, "seed", c.seed);
  read_field(j, "c1", c.c1);
  read_field(j, "base", c.base);
  read_field(j, "rows_out", c.rows_out);
  read_field(j, "svg_out", c.svg_out);
  read_field(j, "trace_out", c.trace_out);
  c.validate();
  return c;
}

std::string ExperimentConfig::to_json_text() const {
  nlohmann::json j;
  j["lambda"] = lambda;
  j["gamma_grid"] = gamma_grid;
  j["trials"] = trials;
  j["budget_rule"] = budget_rule;
  if (budget_rule == "explicit") j["budgets"] = budgets;
  j["delta"] = delta;
  j["seed"] = seed;
  j["c1"] = c1;
  j["base"] = base;
  j["rows_out"] = rows_out;
  j["svg_out"] = svg_out;
  j["trace_out"] = trace_out;
  return j.dump(2);
}

void ExperimentConfig::validate() const {
  if (gamma_grid.empty()) throw validation_error("gamma_grid must be non-empty");
  if (!std::is_sorted(gamma_grid.begin(), gamma_grid.end())) {
    throw validation_error("gamma_grid must be sorted ascending");
  }
  for (const double g : gamma_grid) {
    if (!(g > 0.25) || !(g < 1.0)) throw validation_error("gamma_grid entries must lie in (1/4, 1)");
  }
  if (trials < 1) throw validation_error("trials must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw validation_error("lambda must be non-negative");
  if (!(delta > 0.0) || !(delta < 1.0)) throw validation_error("delta must lie in (0, 1)");
  if (!(c1 > 0.0) || !std::isfinite(c1)) throw validation_error("c1 must be positive and finite");
  if (!(base > 1.0) || !std::isfinite(base)) throw validation_error("base must exceed 1");
  if (budget_rule == "default") {
    // formula budgets; an explicit list is ignored only if absent
    if (!budgets.empty()) throw validation_error("budgets requires budget_rule == 'explicit'");
  } else if (budget_rule == "explicit") {
    if (budgets.size() != gamma_grid.size()) {
      throw validation_error("budgets must match gamma_grid in length");
    }
    for (const std::int64_t n : budgets) {
      if (n < 1) throw validation_error("budgets entries must be positive");
    }
  } else {
    throw validation_error("budget_rule must be 'default' or 'explicit'");
  }
}

std::int64_t ExperimentConfig::budget_for(std::size_t grid_index) const {
  if (grid_index >= gamma_grid.size()) throw validation_error("grid index out of range");
  if (budget_rule == "explicit") return budgets[grid_index];
  return scaling_budget(gamma_grid[grid_index]);
}

ExperimentResult scaling_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  for (std::size_t gi = 0; gi < config.gamma_grid.size(); ++gi) {
    const double gamma = config.gamma_grid[gi];
    const std::int64_t n = config.budget_for(gi);
    const TabularMDP mdp = two_state_family_mdp(gamma, config.lambda);
    const QFunction qstar = two_state_family_qstar(gamma, config.lambda);

    // Burn-in phase reaching the initialization condition: 1/(1-gamma)^3
    // samples of the same algorithm, carved out of the trial budget.
    std::int64_t n_warm = static_cast<std::int64_t>(std::ceil(1.0 / std::pow(1.0 - gamma, 3)));
    n_warm = std::min(n_warm, n / 2);
    EpochSchedule warm_schedule;
    bool warm = n_warm >= 2;
    if (warm) {
      try {
        warm_schedule = make_schedule(n_warm, gamma, config.delta, mdp.dim(), config.c1, config.base);
      } catch (const schedule_error&) {
        warm = false;
      }
    }
    if (!warm) n_warm = 0;

    EpochSchedule schedule;
    try {
      schedule = make_schedule(n - n_warm, gamma, config.delta, mdp.dim(), config.c1, config.base);
    } catch (const schedule_error&) {
      result.infeasible += config.trials;
      continue;
    }
    const QFunction q0 = QFunction::Zero(mdp.num_states(), mdp.num_actions());
    std::vector<double> errs(static_cast<std::size_t>(config.trials), 0.0);
    parallel_trials(config.trials, [&](std::int64_t t) {
      const std::uint64_t trial_seed =
          derive_seed(config.seed, static_cast<std::uint64_t>(gi) * static_cast<std::uint64_t>(config.trials) +
                                       static_cast<std::uint64_t>(t));
      SeededSampler sampler(mdp, trial_seed, n);
      QFunction start = q0;
      if (warm) start = vr_q_learning(sampler, warm_schedule, start, mdp).first;
      const QFunction q = vr_q_learning(sampler, schedule, start, mdp).first;
      errs[static_cast<std::size_t>(t)] = linf_distance(q, qstar);
    });
    const double log_complexity = std::log(1.0 / (1.0 - gamma));
    for (std::int64_t t = 0; t < config.trials; ++t) {
      const double err = errs[static_cast<std::size_t>(t)];
      if (!std::isfinite(err)) throw error("non-finite error recorded in a scaling trial");
      if (err == 0.0) {
        ++result.zero_error;
        continue;
      }
      result.rows.push_back({gamma, n, t, err, log_complexity, std::log(err)});
    }
  }
  return result;
}

TraceResult epoch_trace_experiment(const ExperimentConfig& config) {
  config.validate();
  TraceResult out;
  out.gamma = config.gamma_grid.front();
  out.n = config.budget_for(0);
  const TabularMDP mdp = two_state_family_mdp(out.gamma, config.lambda);
  const QFunction qstar = two_state_family_qstar(out.gamma, config.lambda);
  out.schedule = make_schedule(out.n, out.gamma, config.delta, mdp.dim(), config.c1, config.base);
  SeededSampler sampler(mdp, derive_seed(config.seed, 0), out.n);
  SolverOptions opts;
  opts.qstar = &qstar;
  opts.record_trace = true;
  const QFunction q0 = QFunction::Zero(mdp.num_states(), mdp.num_actions());
  auto [q, record] = vr_q_learning(sampler, out.schedule, q0, mdp, opts);
  out.record = std::move(record);
  out.final_err = linf_distance(q, qstar);
  return out;
}

FitResult fit_loglog_slope(const std::vector<ExperimentRow>& rows) {
  std::map<double, std::pair<double, std::int64_t>> by_gamma;  // gamma -> (sum log_err, count)
  std::map<double, double> x_of;
  for (const ExperimentRow& r : rows) {
    if (!std::isfinite(r.log_err) || !std::isfinite(r.log_complexity)) continue;
    auto& acc = by_gamma[r.gamma];
    acc.first += r.log_err;
    acc.second += 1;
    x_of[r.gamma] = r.log_complexity;
  }
  if (by_gamma.size() < 2) {
    throw validation_error("slope fit needs at least two distinct gamma values");
  }
  std::vector<double> xs, ys;
  xs.reserve(by_gamma.size());
  ys.reserve(by_gamma.size());
  for (const auto& [gamma, acc] : by_gamma) {
    xs.push_back(x_of[gamma]);
    ys.push_back(acc.first / static_cast<double>(acc.second));
  }
  const std::size_t m = xs.size();
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= static_cast<double>(m);
  ybar /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  if (sxx <= 0.0) throw validation_error("slope fit is degenerate: no variation in log complexity");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  if (m > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double resid = ys[i] - (fit.intercept + fit.slope * xs[i]);
      rss += resid * resid;
    }
    fit.slope_stderr = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
  }
  return fit;
}

std::string rows_to_csv(const std::vector<ExperimentRow>& rows) {
  std::string out = "gamma,n,trial,err_linf,log_complexity,log_err\n";
  char line[240];
  for (const ExperimentRow& r : rows) {
    std::snprintf(line, sizeof(line), "%.17g,%lld,%lld,%.17g,%.17g,%.17g\n", r.gamma,
                  static_cast<long long>(r.n), static_cast<long long>(r.trial), r.err_linf,
                  r.log_complexity, r.log_err);
    out += line;
  }
  return out;
}

std::vector<ExperimentRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "gamma,n,trial,err_linf,log_complexity,log_err") {
    throw validation_error("rows CSV must start with the header gamma,n,trial,err_linf,log_complexity,log_err");
  }
  std::vector<ExperimentRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw validation_error("rows CSV line does not have 6 fields: " + line);
    ExperimentRow r;
    r.gamma = parse_double_field(fields[0], line);
    r.n = parse_int_field(fields[1], line);
    r.trial = parse_int_field(fields[2], line);
    r.err_linf = parse_double_field(fields[3], line);
    r.log_complexity = parse_double_field(fields[4], line);
    r.log_err = parse_double_field(fields[5], line);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace vrql
