#pragma once

// Limited-memory BFGS: two-loop recursion with initial scaling <s,y>/<y,y>, Armijo backtracking.

#include <cmath>
#include <deque>
#include <stdexcept>

#include "aafwi/line_search.hpp"
#include "aafwi/optim.hpp"

namespace aafwi {

class LBFGSHistory {
 public:
  explicit LBFGSHistory(int memory) : memory_(memory) {
    if (memory < 1) throw std::invalid_argument("LBFGSHistory: memory must be at least 1");
  }

  int memory() const { return memory_; }
  int size() const { return static_cast<int>(s_.size()); }
  bool empty() const { return s_.empty(); }
  void clear() {
    s_.clear();
    y_.clear();
    rho_.clear();
  }

  /// Stores (s, y) when <s, y> > 0; returns whether the pair was kept.
  bool push(const Vec& s, const Vec& y) {
    const double sy = s.dot(y);
    if (!(sy > 0.0) || !std::isfinite(sy)) return false;
    if (size() == memory_) {
      s_.pop_front();
      y_.pop_front();
      rho_.pop_front();
    }
    s_.push_back(s);
    y_.push_back(y);
    rho_.push_back(1.0 / sy);
    return true;
  }

  /// Initial inverse-Hessian scale from the newest pair (1 when empty).
  double scale() const {
    if (empty()) return 1.0;
    return s_.back().dot(y_.back()) / y_.back().squaredNorm();
  }

  /// H v by the two-loop recursion.
  Vec apply(const Vec& v) const {
    const int m = size();
    Vec q = v;
    std::vector<double> a(static_cast<std::size_t>(m));
    for (int i = m - 1; i >= 0; --i) {
      const auto k = static_cast<std::size_t>(i);
      a[k] = rho_[k] * s_[k].dot(q);
      q -= a[k] * y_[k];
    }
    q *= scale();
    for (int i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double b = rho_[k] * y_[k].dot(q);
      q += (a[k] - b) * s_[k];
    }
    return q;
  }

 private:
  int memory_;
  std::deque<Vec> s_, y_;
  std::deque<double> rho_;
};

struct LbfgsOptions {
  int memory = 5;
  double eta = 0.0;  // first trial step along -g with an empty history; 0: default_step
  LineSearchOptions ls{};
};

inline OptimizerResult lbfgs(const Problem& problem, const Vec& p0, const LbfgsOptions& opt, const StopCriteria& stop,
                             const IterationObserver& observe = {}) {
  if (opt.eta < 0.0) throw std::invalid_argument("lbfgs: eta must be non-negative");
  LBFGSHistory hist(opt.memory);
  CountedProblem P(problem, stop.budget);
  OptimizerResult res;
  res.report.method = "lbfgs";
  res.p = p0;
  try {
    Vec g;
    double J = P.value_grad(res.p, g);
    if (!std::isfinite(J)) throw StabilityError("lbfgs: objective is not finite at the starting point");
    res.objective = J;
    res.gradient = g;
    const double eta = opt.eta > 0.0 ? opt.eta : default_step(res.p, g);
    res.report.add(0, J, g.norm(), P.counter(), 0.0);
    if (observe) observe(0, res.p);
    for (int k = 0; k < stop.max_iterations; ++k) {
      if (g.norm() <= stop.gtol) {
        res.reason = StopReason::converged;
        break;
      }
      Vec d = -hist.apply(g);
      if (!(g.dot(d) < 0.0)) {
        hist.clear();
        d = -g;
      }
      auto ls = backtracking_line_search(P, res.p, J, g, d, hist.empty() ? eta : 1.0, opt.ls);
      if (!ls.ok && !hist.empty()) {
        hist.clear();
        d = -g;
        ls = backtracking_line_search(P, res.p, J, g, d, eta, opt.ls);
      }
      if (!ls.ok) {
        res.reason = StopReason::line_search_failed;
        break;
      }
      Vec next = res.p + ls.step * d;
      Vec gn;
      const double Jn = P.value_grad(next, gn);
      if (!std::isfinite(Jn)) throw StabilityError("lbfgs: objective is not finite");
      hist.push(next - res.p, gn - g);
      res.p = std::move(next);
      J = Jn;
      g = std::move(gn);
      res.objective = J;
      res.gradient = g;
      res.report.add(k + 1, J, g.norm(), P.counter(), ls.step);
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
