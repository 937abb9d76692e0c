#pragma once

// Shared pieces of the optimizers: vectors, evaluation accounting, stopping rules, reports.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aafwi/errors.hpp"
#include "aafwi/io.hpp"

namespace aafwi {

using Vec = Eigen::VectorXd;

/// J and its gradient. `value` is the cheap path (no adjoint); `value_grad` fills the gradient.
struct Problem {
  std::function<double(const Vec&)> value;
  std::function<double(const Vec&, Vec&)> value_grad;
};

struct EvalCounter {
  long grad_evals = 0;
  long obj_evals = 0;

  /// Objective-only evaluations cost half a gradient (one forward, no adjoint).
  double equivalents() const { return static_cast<double>(grad_evals) + 0.5 * static_cast<double>(obj_evals); }
};

/// Thrown when an evaluation would take the cost past the budget.
struct BudgetExhausted : std::runtime_error {
  BudgetExhausted() : std::runtime_error("evaluation budget exhausted") {}
};

/// Counts every evaluation and enforces the gradient-equivalent budget: an evaluation that would
/// push the total past the budget is refused, so the reported cost never exceeds it.
class CountedProblem {
 public:
  explicit CountedProblem(Problem p, double budget = std::numeric_limits<double>::infinity())
      : problem_(std::move(p)), budget_(budget) {
    if (!problem_.value || !problem_.value_grad) throw std::invalid_argument("CountedProblem: missing callbacks");
    if (!(budget_ > 0.0)) throw std::invalid_argument("CountedProblem: budget must be positive");
  }

  double value(const Vec& p) {
    check(0.5);
    ++counter_.obj_evals;
    return problem_.value(p);
  }

  double value_grad(const Vec& p, Vec& g) {
    check(1.0);
    ++counter_.grad_evals;
    return problem_.value_grad(p, g);
  }

  const EvalCounter& counter() const { return counter_; }
  double budget() const { return budget_; }
  bool affordable(double cost) const { return counter_.equivalents() + cost <= budget_; }

 private:
  void check(double cost) const {
    if (!affordable(cost)) throw BudgetExhausted();
  }

  Problem problem_;
  double budget_;
  EvalCounter counter_;
};

struct StopCriteria {
  int max_iterations = 100;
  double budget = std::numeric_limits<double>::infinity();  // gradient-equivalents
  double gtol = 0.0;                                          // stop when ||grad|| <= gtol
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  long grad_evals = 0;
  long obj_evals = 0;
  double step = 0.0;
};

struct OptimizerReport {
  std::string method;
  std::vector<IterationRecord> records;

  void add(int iteration, double objective, double grad_norm, const EvalCounter& c, double step) {
    if (!records.empty() && (c.grad_evals < records.back().grad_evals || c.obj_evals < records.back().obj_evals))
      throw InvalidState("OptimizerReport: counters went backwards");
    records.push_back({iteration, objective, grad_norm, c.grad_evals, c.obj_evals, step});
  }

  std::string csv() const {
    std::string out = "iteration,objective,grad_norm,grad_evals,obj_evals,step\n";
    char buf[160];
    for (const auto& r : records) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%ld,%ld,%.17g\n", r.iteration, r.objective, r.grad_norm,
                    r.grad_evals, r.obj_evals, r.step);
      out += buf;
    }
    return out;
  }

  void write_csv(const std::filesystem::path& path) const { io::write_atomic(path, csv()); }
};

enum class StopReason { max_iterations, budget, converged, line_search_failed };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::budget: return "budget";
    case StopReason::converged: return "converged";
    case StopReason::line_search_failed: return "line_search_failed";
  }
  return "?";
}

struct OptimizerResult {
  Vec p;
  double objective = std::numeric_limits<double>::quiet_NaN();
  Vec gradient;
  OptimizerReport report;
  StopReason reason = StopReason::max_iterations;
  EvalCounter counter;
};

/// Default fixed step: the first update moves the model by 1% of its dynamic range.
/// Zero at a stationary point.
inline double default_step(const Vec& p0, const Vec& g0) {
  const double gmax = g0.lpNorm<Eigen::Infinity>();
  if (!std::isfinite(gmax)) throw std::invalid_argument("default_step: gradient is not finite");
  if (gmax == 0.0) return 0.0;
  double range = p0.size() ? p0.maxCoeff() - p0.minCoeff() : 0.0;
  if (!(range > 0.0)) range = p0.size() ? p0.lpNorm<Eigen::Infinity>() : 0.0;
  if (!(range > 0.0)) range = 1.0;
  return 0.01 * range / gmax;
}

/// Per-iteration callback for snapshots; receives iteration number and current iterate.
using IterationObserver = std::function<void(int, const Vec&)>;

}  // namespace aafwi
