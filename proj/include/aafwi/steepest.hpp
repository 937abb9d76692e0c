#pragma once

// Steepest descent, with a fixed step (the Picard iteration of p -> p - eta g) or with
// backtracking along -g.

#include <cmath>
#include <stdexcept>

#include "aafwi/line_search.hpp"
#include "aafwi/optim.hpp"

namespace aafwi {

struct SteepestOptions {
  double eta = 0.0;  // fixed step, or the first trial step with line search; 0: default_step
  bool line_search = true;
  LineSearchOptions ls{};
};

/// Next initial trial step: keep the first-order change s <g, d> of the previous iteration,
/// doubled if the accepted step still failed the curvature test.
inline double next_initial_step(double step, double prev_slope, double slope, bool curvature_ok) {
  double s = step * prev_slope / slope;
  if (!curvature_ok) s *= 2.0;
  return std::isfinite(s) && s > 0.0 ? s : step;
}

inline OptimizerResult steepest_descent(const Problem& problem, const Vec& p0, const SteepestOptions& opt,
                                        const StopCriteria& stop, const IterationObserver& observe = {}) {
  if (opt.eta < 0.0) throw std::invalid_argument("steepest_descent: eta must be non-negative");
  CountedProblem P(problem, stop.budget);
  OptimizerResult res;
  res.report.method = "sd";
  res.p = p0;
  try {
    Vec g;
    double J = P.value_grad(res.p, g);
    if (!std::isfinite(J)) throw StabilityError("steepest_descent: objective is not finite at the starting point");
    res.objective = J;
    res.gradient = g;
    const double eta = opt.eta > 0.0 ? opt.eta : default_step(res.p, g);
    res.report.add(0, J, g.norm(), P.counter(), 0.0);
    if (observe) observe(0, res.p);
    double s0 = eta;
    for (int k = 0; k < stop.max_iterations; ++k) {
      if (g.norm() <= stop.gtol) {
        res.reason = StopReason::converged;
        break;
      }
      const Vec d = -g;
      const double slope = g.dot(d);
      double step = eta;
      if (opt.line_search) {
        const auto ls = backtracking_line_search(P, res.p, J, g, d, s0, opt.ls);
        if (!ls.ok) {
          res.reason = StopReason::line_search_failed;
          break;
        }
        step = ls.step;
      }
      Vec next = res.p + step * d;
      Vec gn;
      const double Jn = P.value_grad(next, gn);
      if (!std::isfinite(Jn)) throw StabilityError("steepest_descent: objective is not finite");
      const double slope_new = gn.dot(d);
      s0 = next_initial_step(step, slope, gn.dot(-gn), curvature(slope, slope_new, opt.ls.c2));
      res.p = std::move(next);
      J = Jn;
      g = std::move(gn);
      res.objective = J;
      res.gradient = g;
      res.report.add(k + 1, J, g.norm(), P.counter(), step);
      if (observe) observe(k + 1, res.p);
    }
    if (res.reason == StopReason::max_iterations && g.norm() <= stop.gtol) res.reason = StopReason::converged;
  } catch (const BudgetExhausted&) {
    res.reason = StopReason::budget;
  }
  res.counter = P.counter();
  return res;
}

}  // namespace aafwi
