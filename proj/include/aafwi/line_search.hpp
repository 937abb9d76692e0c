#pragma once

// Backtracking (Armijo) line search along a descent direction.

#include <cmath>
#include <functional>
#include <stdexcept>

#include "aafwi/optim.hpp"

namespace aafwi {

struct LineSearchOptions {
  double c1 = 1e-4;
  double c2 = 0.9;
  double shrink = 0.5;
  int max_backtracks = 10;  // trials, including the first
};

struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double value = 0.0;  // J at the accepted point (J(p) when nothing was accepted)
  int trials = 0;
};

/// Armijo test for an already computed trial value.
inline bool armijo(double f0, double slope, double step, double trial, double c1) {
  return std::isfinite(trial) && trial <= f0 + c1 * step * slope;
}

/// Curvature test, usable once the gradient at the accepted point is known.
inline bool curvature(double slope0, double slope_new, double c2) { return slope_new >= c2 * slope0; }

/// Tries s0, s0*shrink, ... and returns the first step meeting the Armijo condition.
/// Each trial is one objective-only evaluation of `value_at(step)`.
inline LineSearchResult backtracking_line_search(const std::function<double(double)>& value_at, double f0,
                                                 double slope, double s0, const LineSearchOptions& opt = {}) {
  if (!(slope < 0.0)) throw std::invalid_argument("backtracking_line_search: direction is not a descent direction");
  if (!(s0 > 0.0)) throw std::invalid_argument("backtracking_line_search: initial step must be positive");
  if (!(opt.shrink > 0.0 && opt.shrink < 1.0) || opt.max_backtracks < 1)
    throw std::invalid_argument("backtracking_line_search: bad options");
  LineSearchResult r;
  r.value = f0;
  double s = s0;
  for (int i = 0; i < opt.max_backtracks; ++i) {
    const double v = value_at(s);
    ++r.trials;
    if (armijo(f0, slope, s, v, opt.c1)) {
      r.ok = true;
      r.step = s;
      r.value = v;
      return r;
    }
    s *= opt.shrink;
  }
  return r;
}

/// Vector form on a counted problem: searches along p + s d.
inline LineSearchResult backtracking_line_search(CountedProblem& problem, const Vec& p, double f0, const Vec& g,
                                                 const Vec& d, double s0, const LineSearchOptions& opt = {}) {
  return backtracking_line_search([&](double s) { return problem.value(p + s * d); }, f0, g.dot(d), s0, opt);
}

}  // namespace aafwi
