#pragma once

// Nonlinear conjugate gradients, Polak-Ribiere+ with automatic restart.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aafwi/line_search.hpp"
#include "aafwi/optim.hpp"
#include "aafwi/steepest.hpp"

namespace aafwi {

/// max(0, <g, g - g_prev> / <g_prev, g_prev>)
inline double pr_plus_beta(const Vec& g, const Vec& g_prev) {
  const double den = g_prev.squaredNorm();
  if (!(den > 0.0)) return 0.0;
  return std::max(0.0, g.dot(g - g_prev) / den);
}

struct NcgOptions {
  double eta = 0.0;  // first trial step; 0: default_step
  LineSearchOptions ls{};
};

inline OptimizerResult ncg(const Problem& problem, const Vec& p0, const NcgOptions& opt, const StopCriteria& stop,
                           const IterationObserver& observe = {}) {
  if (opt.eta < 0.0) throw std::invalid_argument("ncg: eta must be non-negative");
  CountedProblem P(problem, stop.budget);
  OptimizerResult res;
  res.report.method = "ncg";
  res.p = p0;
  try {
    Vec g;
    double J = P.value_grad(res.p, g);
    if (!std::isfinite(J)) throw StabilityError("ncg: objective is not finite at the starting point");
    res.objective = J;
    res.gradient = g;
    const double eta = opt.eta > 0.0 ? opt.eta : default_step(res.p, g);
    res.report.add(0, J, g.norm(), P.counter(), 0.0);
    if (observe) observe(0, res.p);
    Vec d = -g, g_prev;
    double s0 = eta;
    for (int k = 0; k < stop.max_iterations; ++k) {
      if (g.norm() <= stop.gtol) {
        res.reason = StopReason::converged;
        break;
      }
      bool restart = true;
      if (k > 0) {
        const double beta = pr_plus_beta(g, g_prev);
        d = -g + beta * d;
        restart = beta == 0.0;
        if (!(g.dot(d) < 0.0)) {
          d = -g;
          restart = true;
        }
      }
      auto ls = backtracking_line_search(P, res.p, J, g, d, s0, opt.ls);
      if (!ls.ok && !restart) {
        d = -g;
        ls = backtracking_line_search(P, res.p, J, g, d, s0, opt.ls);
      }
      if (!ls.ok) {
        res.reason = StopReason::line_search_failed;
        break;
      }
      Vec next = res.p + ls.step * d;
      Vec gn;
      const double Jn = P.value_grad(next, gn);
      if (!std::isfinite(Jn)) throw StabilityError("ncg: objective is not finite");
      const double slope = g.dot(d);
      const bool curv = curvature(slope, gn.dot(d), opt.ls.c2);
      g_prev = std::move(g);
      g = std::move(gn);
      res.p = std::move(next);
      J = Jn;
      res.objective = J;
      res.gradient = g;
      res.report.add(k + 1, J, g.norm(), P.counter(), ls.step);
      if (observe) observe(k + 1, res.p);
      // Slope of the next direction is not known yet; -|g|^2 is the restart slope.
      s0 = next_initial_step(ls.step, slope, -g.squaredNorm(), curv);
    }
    if (res.reason == StopReason::max_iterations && g.norm() <= stop.gtol) res.reason = StopReason::converged;
  } catch (const BudgetExhausted&) {
    res.reason = StopReason::budget;
  }
  res.counter = P.counter();
  return res;
}

}  // namespace aafwi
