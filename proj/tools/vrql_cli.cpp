#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "vrql/complexity.hpp"
#include "vrql/errors.hpp"
#include "vrql/experiment.hpp"
#include "vrql/family.hpp"
#include "vrql/lowerbound.hpp"
#include "vrql/mdp.hpp"
#include "vrql/sampling.hpp"
#include "vrql/solver.hpp"
#include "vrql/svg.hpp"

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vrql::validation_error("cannot open output file: " + path);
  out << content;
  out.flush();
  if (!out) throw vrql::validation_error("failed writing output file: " + path);
}

// Writes to the path when given, otherwise to stdout; guarantees a trailing newline.
void emit(const std::string& out_path, std::string content) {
  if (content.empty() || content.back() != '\n') content += '\n';
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_file(out_path, content);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw vrql::validation_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json num_or_inf(double v) {
  if (std::isnan(v)) return nlohmann::json("nan");
  if (std::isinf(v)) return nlohmann::json(v > 0 ? "inf" : "-inf");
  return nlohmann::json(v);
}

nlohmann::json matrix_json(const vrql::QFunction& q) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index x = 0; x < q.rows(); ++x) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index u = 0; u < q.cols(); ++u) row.push_back(q(x, u));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json policy_json(const vrql::Policy& pi) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Eigen::Index a : pi.action_of) arr.push_back(static_cast<std::int64_t>(a));
  return arr;
}

nlohmann::json schedule_json(const vrql::EpochSchedule& s) {
  nlohmann::json j;
  j["num_epochs"] = s.num_epochs;
  j["epoch_length"] = s.epoch_length;
  j["recenter_sizes"] = s.recenter_sizes;
  j["delta"] = s.delta;
  j["c1"] = s.c1;
  j["c1_requested"] = s.c1_requested;
  j["base"] = s.base;
  j["total_samples"] = s.total_samples();
  return j;
}

struct SolveArgs {
  std::string mdp_path;
  std::string out;
};

void run_solve(const SolveArgs& a) {
  const vrql::TabularMDP mdp = vrql::TabularMDP::load(a.mdp_path);
  const vrql::QFunction qstar = vrql::solve_optimal_q(mdp);
  nlohmann::json j;
  j["qstar"] = matrix_json(qstar);
  j["policy"] = policy_json(vrql::greedy_policy(qstar));
  j["gap"] = num_or_inf(vrql::optimality_gap(mdp));
  j["n_zero"] = num_or_inf(vrql::min_sample_size(mdp));
  emit(a.out, j.dump(2));
}

struct ComplexityArgs {
  std::string mdp_path;
  std::string format = "json";
  std::string out;
};

void run_complexity(const ComplexityArgs& a) {
  const vrql::TabularMDP mdp = vrql::TabularMDP::load(a.mdp_path);
  const vrql::ComplexityReport rep = vrql::complexity_report(mdp);
  emit(a.out, a.format == "csv" ? rep.to_csv() : rep.to_json_text());
}

struct RunQlArgs {
  std::string mdp_path;
  std::int64_t budget = 0;
  std::uint64_t seed = 0;
  std::string stepsize = "rescaled";
  std::string trace;
  std::string out;
};

void run_run_ql(const RunQlArgs& a) {
  const vrql::TabularMDP mdp = vrql::TabularMDP::load(a.mdp_path);
  const vrql::QFunction qstar = vrql::solve_optimal_q(mdp);
  const vrql::StepsizeRule rule = vrql::StepsizeRule::parse(a.stepsize);
  vrql::SeededSampler sampler(mdp, a.seed, a.budget);
  vrql::SolverOptions opts;
  opts.qstar = &qstar;
  opts.record_trace = !a.trace.empty();
  const vrql::QFunction q0 = vrql::QFunction::Zero(mdp.num_states(), mdp.num_actions());
  auto [q, record] = vrql::standard_q_learning(sampler, a.budget, q0, rule, opts);
  if (!a.trace.empty()) write_file(a.trace, record.to_csv());
  nlohmann::json j;
  j["final_err"] = vrql::linf_distance(q, qstar);
  j["samples_consumed"] = record.samples_consumed;
  j["seed"] = record.seed;
  j["stepsize"] = rule.describe();
  j["final_q"] = matrix_json(q);
  emit(a.out, j.dump(2));
}

struct RunVrqlArgs {
  std::string mdp_path;
  std::int64_t budget = 0;
  std::uint64_t seed = 0;
  double delta = 0.1;
  double c1 = 1.0;
  double base = 4.0;
  double warm_start = 0.0;
  std::string trace;
  std::string out;
};

void run_run_vrql(const RunVrqlArgs& a) {
  if (!(a.warm_start >= 0.0) || a.warm_start >= 1.0) {
    throw vrql::validation_error("--warm-start must lie in [0, 1)");
  }
  const vrql::TabularMDP mdp = vrql::TabularMDP::load(a.mdp_path);
  const vrql::QFunction qstar = vrql::solve_optimal_q(mdp);
  vrql::SeededSampler sampler(mdp, a.seed, a.budget);
  vrql::QFunction q0 = vrql::QFunction::Zero(mdp.num_states(), mdp.num_actions());
  nlohmann::json j;
  if (a.warm_start > 0.0) {
    const std::int64_t n_warm = static_cast<std::int64_t>(std::floor(a.warm_start * static_cast<double>(a.budget)));
    const vrql::EpochSchedule warm =
        vrql::make_schedule(n_warm, mdp.gamma(), a.delta, mdp.dim(), a.c1, a.base);
    q0 = vrql::vr_q_learning(sampler, warm, q0, mdp).first;
    j["warm_schedule"] = schedule_json(warm);
    std::cerr << "warm-start schedule:\n" << warm.describe();
  }
  const std::int64_t remaining = a.budget - sampler.draws_consumed();
  const vrql::EpochSchedule schedule =
      vrql::make_schedule(remaining, mdp.gamma(), a.delta, mdp.dim(), a.c1, a.base);
  std::cerr << "schedule:\n" << schedule.describe();
  vrql::SolverOptions opts;
  opts.qstar = &qstar;
  opts.record_trace = !a.trace.empty();
  auto [q, record] = vrql::vr_q_learning(sampler, schedule, q0, mdp, opts);
  if (!a.trace.empty()) write_file(a.trace, record.to_csv());
  j["final_err"] = vrql::linf_distance(q, qstar);
  j["samples_consumed"] = sampler.draws_consumed();
  j["seed"] = record.seed;
  j["warm_start"] = a.warm_start;
  j["schedule"] = schedule_json(schedule);
  j["final_q"] = matrix_json(q);
  emit(a.out, j.dump(2));
}

nlohmann::json audit_json(const vrql::AuditReport& rep) {
  return nlohmann::json::parse(rep.to_json_text());
}

struct LowerboundArgs {
  std::string mdp_path;
  std::int64_t n = 0;
  double c = 0.125;
  std::string format = "json";
  std::string out;
};

void run_lowerbound(const LowerboundArgs& a) {
  const vrql::TabularMDP mdp = vrql::TabularMDP::load(a.mdp_path);
  bool have_trans = false, have_rew = false;
  vrql::AuditReport trans, rew;
  std::string trans_skip, rew_skip;
  try {
    trans = vrql::audit_transition_perturbation(mdp, a.n);
    have_trans = true;
  } catch (const vrql::degenerate_error& e) {
    trans_skip = e.what();
  }
  try {
    rew = vrql::audit_reward_perturbation(mdp, a.n);
    have_rew = true;
  } catch (const vrql::degenerate_error& e) {
    rew_skip = e.what();
  }

  if (a.format == "csv") {
    std::string csv = "construction,clause,measured,threshold,pass\n";
    char line[240];
    const auto add = [&csv, &line](const char* kind, const vrql::AuditReport& rep) {
      for (const vrql::AuditClause& c : rep.clauses) {
        std::snprintf(line, sizeof(line), "%s,%s,%.17g,%.17g,%d\n", kind, c.name.c_str(), c.measured,
                      c.threshold, c.pass ? 1 : 0);
        csv += line;
      }
    };
    if (have_trans) add("transitions", trans);
    if (have_rew) add("rewards", rew);
    emit(a.out, csv);
    return;
  }

  nlohmann::json j;
  j["n"] = a.n;
  j["transitions"] = have_trans ? audit_json(trans) : nlohmann::json{{"skipped", trans_skip}};
  j["rewards"] = have_rew ? audit_json(rew) : nlohmann::json{{"skipped", rew_skip}};
  try {
    j["minimax_bound"] = vrql::local_minimax_bound(mdp, a.n, a.c);
    j["minimax_constant"] = a.c;
  } catch (const vrql::validation_error& e) {
    j["minimax_bound"] = nlohmann::json{{"skipped", e.what()}};
  }
  emit(a.out, j.dump(2));
}

struct Example1Args {
  double gamma = 0.0;
  double lambda = 0.5;
  std::string out;
};

void run_example1(const Example1Args& a) {
  const vrql::TabularMDP mdp = vrql::two_state_family_mdp(a.gamma, a.lambda);
  const vrql::QFunction qstar = vrql::two_state_family_qstar(a.gamma, a.lambda);
  nlohmann::json j;
  j["p"] = (4.0 * a.gamma - 1.0) / (3.0 * a.gamma);
  j["tau"] = 1.0 - std::pow(1.0 - a.gamma, a.lambda);
  j["qstar"] = matrix_json(qstar);
  j["scaling_budget"] = vrql::scaling_budget(a.gamma);
  if (a.out.empty()) {
    j["mdp"] = nlohmann::json::parse(mdp.to_json_text());
    emit("", j.dump(2));
  } else {
    mdp.save(a.out);
    j["mdp_file"] = a.out;
    emit("", j.dump(2));
  }
}

struct ExperimentArgs {
  std::string config_path;
  std::string mode = "scaling";
  std::string out;
  std::string svg;
  std::int64_t trials = -1;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

void run_experiment(const ExperimentArgs& a) {
  vrql::ExperimentConfig config = vrql::ExperimentConfig::load(a.config_path);
  if (a.trials > 0) config.trials = a.trials;
  if (a.seed_set) config.seed = a.seed;
  if (!a.out.empty()) (a.mode == "trace" ? config.trace_out : config.rows_out) = a.out;
  if (!a.svg.empty()) config.svg_out = a.svg;
  config.validate();

  if (a.mode == "trace") {
    const vrql::TraceResult tr = vrql::epoch_trace_experiment(config);
    std::cerr << "schedule:\n" << tr.schedule.describe();
    if (!config.trace_out.empty()) write_file(config.trace_out, tr.record.to_csv());
    if (!config.svg_out.empty()) write_file(config.svg_out, vrql::render_trace_svg(tr.record));
    nlohmann::json j;
    j["gamma"] = tr.gamma;
    j["n"] = tr.n;
    j["final_err"] = tr.final_err;
    j["samples_consumed"] = tr.record.samples_consumed;
    j["schedule"] = schedule_json(tr.schedule);
    j["trace_points"] = tr.record.trace.size();
    if (!config.trace_out.empty()) j["trace_file"] = config.trace_out;
    if (!config.svg_out.empty()) j["svg_file"] = config.svg_out;
    emit("", j.dump(2));
    return;
  }

  const vrql::ExperimentResult result = vrql::scaling_experiment(config);
  if (!config.rows_out.empty()) write_file(config.rows_out, vrql::rows_to_csv(result.rows));
  if (!config.svg_out.empty() && !result.rows.empty()) {
    write_file(config.svg_out, vrql::render_scaling_svg(result.rows, config.lambda));
  }
  nlohmann::json j;
  j["rows"] = result.rows.size();
  j["infeasible"] = result.infeasible;
  j["zero_error"] = result.zero_error;
  try {
    const vrql::FitResult fit = vrql::fit_loglog_slope(result.rows);
    j["fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"slope_stderr", fit.slope_stderr}};
  } catch (const vrql::validation_error& e) {
    j["fit"] = nlohmann::json{{"skipped", e.what()}};
  }
  if (!config.rows_out.empty()) j["rows_file"] = config.rows_out;
  if (!config.svg_out.empty()) j["svg_file"] = config.svg_out;
  emit("", j.dump(2));
}

struct FitArgs {
  std::string rows_path;
  std::string out;
};

void run_fit(const FitArgs& a) {
  const std::vector<vrql::ExperimentRow> rows = vrql::rows_from_csv(read_file(a.rows_path));
  const vrql::FitResult fit = vrql::fit_loglog_slope(rows);
  nlohmann::json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["slope_stderr"] = fit.slope_stderr;
  j["rows"] = rows.size();
  emit(a.out, j.dump(2));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular-MDP toolkit: variance-reduced Q-learning, instance complexity, lower-bound constructions"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  CLI::App* solve = app.add_subcommand("solve", "Solve an MDP file for Q*, the greedy policy, the optimality gap, and the minimal sample size");
  solve->add_option("mdp", solve_args.mdp_path, "MDP JSON file")->required();
  solve->add_option("--out", solve_args.out, "output path (default stdout)");

  ComplexityArgs cx_args;
  CLI::App* cx = app.add_subcommand("complexity", "Report the instance complexity tables (nu, rho, sigma, phi^2)");
  cx->add_option("mdp", cx_args.mdp_path, "MDP JSON file")->required();
  cx->add_option("--format", cx_args.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  cx->add_option("--out", cx_args.out, "output path (default stdout)");

  RunQlArgs ql_args;
  CLI::App* ql = app.add_subcommand("run-ql", "Run standard Q-learning at a sample budget");
  ql->add_option("mdp", ql_args.mdp_path, "MDP JSON file")->required();
  ql->add_option("--budget", ql_args.budget, "number of generative samples")->required()->check(CLI::PositiveNumber);
  ql->add_option("--seed", ql_args.seed, "RNG seed");
  ql->add_option("--stepsize", ql_args.stepsize, "rescaled or poly:<omega>");
  ql->add_option("--trace", ql_args.trace, "per-iteration trace CSV path");
  ql->add_option("--out", ql_args.out, "summary output path (default stdout)");

  RunVrqlArgs vr_args;
  CLI::App* vr = app.add_subcommand("run-vrql", "Run variance-reduced Q-learning at a sample budget");
  vr->add_option("mdp", vr_args.mdp_path, "MDP JSON file")->required();
  vr->add_option("--budget", vr_args.budget, "number of generative samples")->required()->check(CLI::PositiveNumber);
  vr->add_option("--seed", vr_args.seed, "RNG seed");
  vr->add_option("--delta", vr_args.delta, "schedule failure probability");
  vr->add_option("--c1", vr_args.c1, "re-centering size constant");
  vr->add_option("--base", vr_args.base, "epoch growth base");
  vr->add_option("--warm-start", vr_args.warm_start, "fraction of the budget spent on a warm-start phase");
  vr->add_option("--trace", vr_args.trace, "per-iteration trace CSV path");
  vr->add_option("--out", vr_args.out, "summary output path (default stdout)");

  LowerboundArgs lb_args;
  CLI::App* lb = app.add_subcommand("lowerbound", "Audit the hardest-alternative constructions at sample size n");
  lb->add_option("mdp", lb_args.mdp_path, "MDP JSON file")->required();
  lb->add_option("--n", lb_args.n, "construction sample size")->required()->check(CLI::PositiveNumber);
  lb->add_option("--c", lb_args.c, "bound constant");
  lb->add_option("--format", lb_args.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  lb->add_option("--out", lb_args.out, "output path (default stdout)");

  Example1Args ex_args;
  CLI::App* ex = app.add_subcommand("example1", "Emit the built-in two-state family instance and its closed forms");
  ex->add_option("--gamma", ex_args.gamma, "discount factor in (1/4, 1)")->required();
  ex->add_option("--lambda", ex_args.lambda, "reward exponent (>= 0)");
  ex->add_option("--out", ex_args.out, "MDP file path (omitted: MDP inlined in stdout JSON)");

  ExperimentArgs exp_args;
  CLI::App* exp = app.add_subcommand("experiment", "Run the scaling or trace experiment from a JSON config");
  exp->add_option("--config", exp_args.config_path, "experiment config JSON file")->required();
  exp->add_option("--mode", exp_args.mode, "scaling or trace")->check(CLI::IsMember({"scaling", "trace"}));
  exp->add_option("--out", exp_args.out, "rows CSV path (scaling) or trace CSV path (trace); overrides config");
  exp->add_option("--svg", exp_args.svg, "SVG plot path; overrides config");
  exp->add_option("--trials", exp_args.trials, "override config trial count")->check(CLI::PositiveNumber);
  CLI::Option* seed_opt = exp->add_option("--seed", exp_args.seed, "override config seed");

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "OLS slope of a rows CSV");
  fit->add_option("rows", fit_args.rows_path, "rows CSV file")->required();
  fit->add_option("--out", fit_args.out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
    exp_args.seed_set = seed_opt->count() > 0;
    if (*solve) run_solve(solve_args);
    if (*cx) run_complexity(cx_args);
    if (*ql) run_run_ql(ql_args);
    if (*vr) run_run_vrql(vr_args);
    if (*lb) run_lowerbound(lb_args);
    if (*ex) run_example1(ex_args);
    if (*exp) run_experiment(exp_args);
    if (*fit) run_fit(fit_args);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const vrql::budget_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const vrql::schedule_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const vrql::convergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const vrql::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
