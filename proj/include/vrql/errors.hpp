#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vrql {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed inputs: bad kernels, bad gamma, unreadable or invalid files.
struct validation_error : error {
  using error::error;
};

// Shape disagreement between an MDP and a table or policy.
struct dimension_error : error {
  using error::error;
};

// A construction that is undefined for the given instance, e.g. a reward
// perturbation with reward_noise == 0.
struct degenerate_error : error {
  using error::error;
};

// Optimal policy set larger than the enumeration cap.
struct enumeration_overflow_error : error {
  enumeration_overflow_error(std::size_t set_size_, std::size_t cap_)
      : error("optimal policy set of size " + std::to_string(set_size_) +
              " exceeds enumeration cap " + std::to_string(cap_)),
        set_size(set_size_),
        cap(cap_) {}
  std::size_t set_size;
  std::size_t cap;
};

// Sample budget exhausted mid-run.
struct budget_error : error {
  budget_error(std::int64_t budget_, std::int64_t consumed_)
      : error("sample budget exhausted: budget " + std::to_string(budget_) +
              ", consumed " + std::to_string(consumed_)),
        budget(budget_),
        consumed(consumed_) {}
  std::int64_t budget;
  std::int64_t consumed;
};

// No valid epoch schedule at the requested budget.
struct schedule_error : error {
  schedule_error(std::int64_t n_, std::int64_t min_feasible_n_)
      : error("no valid epoch schedule for budget " + std::to_string(n_) +
              "; minimal feasible budget is " + std::to_string(min_feasible_n_)),
        n(n_),
        min_feasible_n(min_feasible_n_) {}
  std::int64_t n;
  std::int64_t min_feasible_n;
};

// Iterative solve failed to reach tolerance.
struct convergence_error : error {
  convergence_error(const std::string& what_, double residual_)
      : error(what_ + " (residual " + std::to_string(residual_) + ")"),
        residual(residual_) {}
  double residual;
};

}  // namespace vrql
