#pragma once

// Anderson acceleration of a fixed-point map G, and the gradient-descent driver that
// blends the accelerated iterate with the plain descent step under a line search.
//
//   f_i = G(p_i) - p_i,  A = [f_1 - f_0, ..., f_k - f_{k-1}]
//   gamma = argmin ||A gamma - f_k||,  alpha_0 = gamma_0, alpha_i = gamma_i - gamma_{i-1},
//   alpha_M = 1 - gamma_{M-1}
//   p_{k+1} = (p_k - P gamma) + beta (f_k - A gamma),   P = [p_1 - p_0, ...]

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>

#include "aafwi/errors.hpp"
#include "aafwi/line_search.hpp"
#include "aafwi/optim.hpp"
#include "aafwi/qr_window.hpp"

namespace aafwi {

using FixedPointOperator = std::function<Vec(const Vec&)>;

inline Vec picard_step(const FixedPointOperator& G, const Vec& p) { return G(p); }

/// The gradient-descent map p -> p - eta grad J(p).
inline FixedPointOperator gradient_descent_map(std::function<Vec(const Vec&)> gradient, double eta) {
  return [gradient = std::move(gradient), eta](const Vec& p) -> Vec { return p - eta * gradient(p); };
}

struct WeightSolution {
  Vec gamma;
  Vec alpha;
  double residual_norm = 0.0;  // ||A gamma - f_k|| = ||sum alpha_i f_i||
};

/// Iterates, residuals and the QR factors of their difference matrix.
class AAWindow {
 public:
  AAWindow(Eigen::Index n, int memory, double rank_tol = 1e-12) : n_(n), memory_(memory), rank_tol_(rank_tol) {
    if (n < 1) throw std::invalid_argument("AAWindow: dimension must be positive");
    if (memory < 0) throw std::invalid_argument("AAWindow: memory must be non-negative");
    const auto cap = std::min<Eigen::Index>(memory, n);
    if (cap > 0) qr_ = QRWindow(n, cap);
  }

  int memory() const { return memory_; }
  int size() const { return static_cast<int>(dp_.size()); }  // M_k
  bool empty() const { return dp_.empty(); }
  bool has_anchor() const { return has_anchor_; }
  int rank_drops() const { return rank_drops_; }

  const Vec& p() const { return p_; }
  const Vec& f() const { return f_; }
  const QRWindow& qr() const { return qr_; }
  const std::deque<Vec>& dp() const { return dp_; }
  const std::deque<Vec>& df() const { return df_; }

  /// Records the newest iterate p_k and its residual f_k = G(p_k) - p_k.
  void push(const Vec& p, const Vec& f) {
    if (p.size() != n_ || f.size() != n_) throw std::invalid_argument("AAWindow::push: dimension mismatch");
    if (has_anchor_ && qr_.capacity() > 0) {
      if (qr_.full()) drop_oldest();
      dp_.push_back(p - p_);
      df_.push_back(f - f_);
      qr_.append(df_.back());
      while (!qr_.empty() && qr_.min_diagonal_ratio() < rank_tol_) {
        drop_oldest();
        ++rank_drops_;
      }
    }
    p_ = p;
    f_ = f;
    has_anchor_ = true;
  }

  /// Forgets all differences; the latest iterate stays as the anchor for the next push.
  void clear() {
    dp_.clear();
    df_.clear();
    if (qr_.capacity() > 0) qr_.clear();
  }

  /// Dense copy of A_k (tests and diagnostics).
  Eigen::MatrixXd A() const {
    Eigen::MatrixXd a(n_, size());
    for (int j = 0; j < size(); ++j) a.col(j) = df_[static_cast<std::size_t>(j)];
    return a;
  }
  Eigen::MatrixXd P() const {
    Eigen::MatrixXd a(n_, size());
    for (int j = 0; j < size(); ++j) a.col(j) = dp_[static_cast<std::size_t>(j)];
    return a;
  }

 private:
  void drop_oldest() {
    dp_.pop_front();
    df_.pop_front();
    qr_.drop_first();
  }

  Eigen::Index n_;
  int memory_;
  double rank_tol_;
  QRWindow qr_;
  std::deque<Vec> dp_, df_;
  Vec p_, f_;
  bool has_anchor_ = false;
  int rank_drops_ = 0;
};

/// Least-squares weights from the maintained QR factors.
inline WeightSolution aa_weights(const AAWindow& w) {
  if (w.empty()) throw InvalidState("aa_weights: window is empty");
  WeightSolution s;
  s.gamma = w.qr().solve(w.f());
  const Eigen::Index m = s.gamma.size();
  s.alpha.resize(m + 1);
  s.alpha(0) = s.gamma(0);
  for (Eigen::Index i = 1; i < m; ++i) s.alpha(i) = s.gamma(i) - s.gamma(i - 1);
  s.alpha(m) = 1.0 - s.gamma(m - 1);
  Vec r = -w.f();
  for (Eigen::Index j = 0; j < m; ++j) r += s.gamma(j) * w.df()[static_cast<std::size_t>(j)];
  s.residual_norm = r.norm();
  return s;
}

/// Next iterate from the window. beta = 1 gives G(p_k) - sum gamma_i [G(p_{i+1}) - G(p_i)].
inline Vec aa_step(const AAWindow& w, const WeightSolution& s, double beta = 1.0) {
  if (!w.has_anchor()) throw InvalidState("aa_step: window has no iterate");
  Vec avg_p = w.p();
  Vec avg_f = w.f();
  for (int j = 0; j < w.size() && j < s.gamma.size(); ++j) {
    avg_p -= s.gamma(j) * w.dp()[static_cast<std::size_t>(j)];
    avg_f -= s.gamma(j) * w.df()[static_cast<std::size_t>(j)];
  }
  return avg_p + beta * avg_f;
}

/// Plain Anderson iteration (no objective): returns p_{k+1} and updates the window.
/// With memory 0 this is the Picard step.
inline Vec aa_fixed_point_step(AAWindow& w, const FixedPointOperator& G, const Vec& p, double beta = 1.0,
                               WeightSolution* out = nullptr) {
  const Vec gp = G(p);
  w.push(p, gp - p);
  if (w.empty()) return gp;
  const auto s = aa_weights(w);
  if (out) *out = s;
  return aa_step(w, s, beta);
}

struct AndersonOptions {
  int memory = 5;
  double eta = 0.0;  // 0: default_step
  double beta = 1.0;
  bool line_search = true;
  LineSearchOptions ls{};
  double rank_tol = 1e-12;
  /// Sees every weight solve together with the current residual f_k.
  std::function<void(const WeightSolution&, const Vec&)> on_weights;
};

/// Anderson-accelerated gradient descent.
///   p_bar = p_k - eta g_k;  p_tilde from the window;  p_{k+1} = lambda p_tilde + (1 - lambda) p_bar
/// lambda backtracks from 1 by halving until J(p_{k+1}) <= J(p_k) + c1 min(0, <g_k, p_{k+1} - p_k>).
/// If no lambda passes, p_{k+1} = p_bar and the window is cleared.
inline OptimizerResult anderson_gd(const Problem& problem, const Vec& p0, const AndersonOptions& opt,
                                   const StopCriteria& stop, const IterationObserver& observe = {}) {
  if (opt.memory < 0) throw std::invalid_argument("anderson_gd: memory must be non-negative");
  if (opt.eta < 0.0) throw std::invalid_argument("anderson_gd: eta must be non-negative");
  CountedProblem P(problem, stop.budget);
  OptimizerResult res;
  res.report.method = "aa";
  res.p = p0;
  AAWindow window(p0.size(), opt.memory, opt.rank_tol);
  double eta = opt.eta;
  try {
    Vec g;
    double J = P.value_grad(res.p, g);
    if (!std::isfinite(J)) throw StabilityError("anderson_gd: objective is not finite at the starting point");
    res.objective = J;
    res.gradient = g;
    if (eta == 0.0) eta = default_step(res.p, g);
    res.report.add(0, J, g.norm(), P.counter(), 0.0);
    if (observe) observe(0, res.p);
    window.push(res.p, -eta * g);
    res.reason = StopReason::max_iterations;
    for (int k = 0; k < stop.max_iterations; ++k) {
      if (g.norm() <= stop.gtol) {
        res.reason = StopReason::converged;
        break;
      }
      const Vec& p = res.p;
      Vec pbar = p - eta * g;
      Vec next = pbar;
      double lambda = 0.0;
      if (!window.empty()) {
        const auto ws = aa_weights(window);
        if (opt.on_weights) opt.on_weights(ws, window.f());
        const Vec ptilde = aa_step(window, ws, opt.beta);
        if (opt.line_search) {
          bool accepted = false;
          double lam = 1.0;
          for (int t = 0; t < opt.ls.max_backtracks; ++t, lam *= opt.ls.shrink) {
            Vec trial = lam * ptilde + (1.0 - lam) * pbar;
            const double v = P.value(trial);
            const double bound = J + opt.ls.c1 * std::min(0.0, g.dot(trial - p));
            if (std::isfinite(v) && v <= bound) {
              next = std::move(trial);
              lambda = lam;
              accepted = true;
              break;
            }
          }
          if (!accepted) window.clear();
        } else {
          next = ptilde;
          lambda = 1.0;
        }
      }
      Vec gn;
      const double Jn = P.value_grad(next, gn);
      if (!std::isfinite(Jn)) throw StabilityError("anderson_gd: objective is not finite");
      res.p = std::move(next);
      res.gradient = gn;
      res.objective = Jn;
      J = Jn;
      g = std::move(gn);
      window.push(res.p, -eta * g);
      res.report.add(k + 1, J, g.norm(), P.counter(), lambda);
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
