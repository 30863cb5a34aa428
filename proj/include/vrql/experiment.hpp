#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vrql/mdp.hpp"
#include "vrql/solver.hpp"

namespace vrql {

struct ExperimentConfig {
  double lambda = 0.5;
  std::vector<double> gamma_grid;
  std::int64_t trials = 100;
  std::string budget_rule = "default";  // "default": N = ceil((32*16/9)/(1-gamma)^3); or "explicit"
  std::vector<std::int64_t> budgets;    // per-grid-entry budgets when budget_rule == "explicit"
  double delta = 0.1;
  std::uint64_t seed = 0;
  double c1 = 1.0;
  double base = 4.0;
  std::string rows_out;   // scaling rows CSV path ("" = not written)
  std::string svg_out;    // scaling plot path ("" = not written)
  std::string trace_out;  // trace CSV path ("" = not written)

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  void validate() const;
  std::int64_t budget_for(std::size_t grid_index) const;
};

struct ExperimentRow {
  double gamma = 0.0;
  std::int64_t n = 0;
  std::int64_t trial = 0;
  double err_linf = 0.0;
  double log_complexity = 0.0;  // ln(1/(1-gamma))
  double log_err = 0.0;         // ln(err_linf)
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;  // strictly positive finite errors only
  std::int64_t infeasible = 0;      // trials skipped because no schedule fits the budget
  std::int64_t zero_error = 0;      // trials whose error was exactly zero (excluded from fits)
};

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

struct TraceResult {
  double gamma = 0.0;
  std::int64_t n = 0;
  EpochSchedule schedule;
  RunRecord record;
  double final_err = 0.0;
};

// For each grid gamma and trial: run VR-QL on the two-state family from q0 = 0
// at the configured budget and record the final error against the closed-form
// optimum. Trials run concurrently with per-trial derived seeds; output order
// is independent of the thread count.
ExperimentResult scaling_experiment(const ExperimentConfig& config);

// Single run at the first grid gamma with per-iteration error tracing.
TraceResult epoch_trace_experiment(const ExperimentConfig& config);

// OLS of mean-per-gamma log error against log discount complexity.
FitResult fit_loglog_slope(const std::vector<ExperimentRow>& rows);

std::string rows_to_csv(const std::vector<ExperimentRow>& rows);
std::vector<ExperimentRow> rows_from_csv(const std::string& text);

}  // namespace vrql
