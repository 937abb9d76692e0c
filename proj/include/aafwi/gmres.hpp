#pragma once

// Restarted GMRES(M) over an abstract operator, and the LSRTM normal equations
// L^T L m_r = L^T d_r solved with it.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aafwi/gradient.hpp"
#include "aafwi/io.hpp"
#include "aafwi/optim.hpp"

namespace aafwi {

struct LinearOperator {
  Eigen::Index n = 0;
  std::function<Vec(const Vec&)> apply;

  Vec operator()(const Vec& x) const {
    if (x.size() != n) throw std::invalid_argument("LinearOperator: dimension mismatch");
    return apply(x);
  }
};

struct GmresRecord {
  int outer_iter = 0;
  int inner_iter = 0;
  double residual_norm = 0.0;
  double grad_equivalents = 0.0;
};

struct GmresOptions {
  int restart = 3;                // M
  int max_outer = 100;
  int max_iterations = 1 << 30;   // total inner iterations
  double tol = 0.0;               // stop when ||r|| <= tol ||b||
  double cost_per_apply = 1.0;    // gradient-equivalents charged per operator action
  double initial_cost = 0.0;      // charged before the first action (e.g. forming b)
};

struct GmresResult {
  Vec x;
  std::vector<GmresRecord> history;
  int iterations = 0;
  bool converged = false;

  std::string csv() const {
    std::string out = "outer_iter,inner_iter,residual_norm,grad_equivalents\n";
    char buf[128];
    for (const auto& r : history) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", r.outer_iter, r.inner_iter, r.residual_norm,
                    r.grad_equivalents);
      out += buf;
    }
    return out;
  }
  void write_csv(const std::filesystem::path& path) const { io::write_atomic(path, csv()); }
};

/// GMRES(M): Arnoldi with modified Gram-Schmidt (second pass when the first leaves more than
/// 1e-8 of the vector in the basis), Givens rotations on the Hessenberg matrix. Each window
/// ends with x_M taken as the next starting guess. The residual at a restart is carried over
/// from the small least-squares problem rather than recomputed, so one operator action is
/// spent per inner iteration (plus one at the start when x0 != 0 and r0 is not supplied).
inline GmresResult gmres_restarted(const LinearOperator& A, const Vec& b, const Vec& x0, const GmresOptions& opt,
                                   const Vec* r0 = nullptr) {
  if (b.size() != A.n || x0.size() != A.n) throw std::invalid_argument("gmres_restarted: dimension mismatch");
  if (opt.restart < 1) throw std::invalid_argument("gmres_restarted: restart must be at least 1");
  if (opt.tol < 0.0) throw std::invalid_argument("gmres_restarted: tol must be non-negative");
  const Eigen::Index n = A.n;
  const int m = static_cast<int>(std::min<Eigen::Index>(opt.restart, n));
  GmresResult res;
  res.x = x0;
  double cost = opt.initial_cost;
  Vec r = b;
  if (r0) {
    if (r0->size() != A.n) throw std::invalid_argument("gmres_restarted: r0 dimension mismatch");
    r = *r0;
  } else if (x0.squaredNorm() > 0.0) {
    r -= A(x0);
    cost += opt.cost_per_apply;
  }
  const double bnorm = b.norm();
  const double target = opt.tol * bnorm;
  double beta = r.norm();
  res.history.push_back({0, 0, beta, cost});
  if (beta == 0.0 || beta <= target) {
    res.converged = true;
    return res;
  }

  Eigen::MatrixXd V(n, m + 1), H = Eigen::MatrixXd::Zero(m + 1, m);
  std::vector<Eigen::JacobiRotation<double>> rot(static_cast<std::size_t>(m));
  for (int outer = 0; outer < opt.max_outer && res.iterations < opt.max_iterations; ++outer) {
    V.col(0) = r / beta;
    H.setZero();
    Vec g = Vec::Zero(m + 1);
    g(0) = beta;
    int j = 0;
    bool breakdown = false;
    for (; j < m && res.iterations < opt.max_iterations; ++j) {
      Vec w = A(V.col(j));
      cost += opt.cost_per_apply;
      ++res.iterations;
      const double wnorm0 = w.norm();
      for (int i = 0; i <= j; ++i) {
        const double h = V.col(i).dot(w);
        H(i, j) += h;
        w -= h * V.col(i);
      }
      double worst = 0.0;
      for (int i = 0; i <= j; ++i) worst = std::max(worst, std::abs(V.col(i).dot(w)));
      if (worst > 1e-8 * w.norm()) {
        for (int i = 0; i <= j; ++i) {
          const double h = V.col(i).dot(w);
          H(i, j) += h;
          w -= h * V.col(i);
        }
      }
      const double hnext = w.norm();
      H(j + 1, j) = hnext;
      breakdown = !(hnext > 1e-14 * wnorm0);
      if (!breakdown) V.col(j + 1) = w / hnext;
      for (int i = 0; i < j; ++i) H.col(j).applyOnTheLeft(i, i + 1, rot[static_cast<std::size_t>(i)].adjoint());
      rot[static_cast<std::size_t>(j)].makeGivens(H(j, j), H(j + 1, j));
      H.col(j).applyOnTheLeft(j, j + 1, rot[static_cast<std::size_t>(j)].adjoint());
      H(j + 1, j) = 0.0;
      g.applyOnTheLeft(j, j + 1, rot[static_cast<std::size_t>(j)].adjoint());
      const double rn = std::abs(g(j + 1));
      res.history.push_back({outer, j + 1, rn, cost});
      if (breakdown || rn <= target) {
        ++j;
        break;
      }
    }
    // x += V_j y with H_j y = g_j (upper triangular after the rotations)
    const Vec y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    res.x += V.leftCols(j) * y;
    beta = std::abs(g(j));
    if (breakdown || beta <= target || beta == 0.0) {
      res.converged = true;
      return res;
    }
    // r = V_{j+1} (g_0 e_1 - H y) expressed through the rotated g: only component j survives.
    Vec e = Vec::Zero(j + 1);
    e(j) = g(j);
    for (int i = j - 1; i >= 0; --i) e.applyOnTheLeft(i, i + 1, rot[static_cast<std::size_t>(i)]);
    r = V.leftCols(j + 1) * e;
    beta = r.norm();
  }
  return res;
}

/// A^L = L^T L, one Born and one adjoint sweep per action.
inline LinearOperator lsrtm_normal_operator(BornOperator& op) {
  LinearOperator A;
  A.n = static_cast<Eigen::Index>(op.model_size());
  A.apply = [&op](const Vec& x) -> Vec {
    const auto d = op.apply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    const auto img = op.adjoint(d);
    return Eigen::Map<const Vec>(img.data(), static_cast<Eigen::Index>(img.size()));
  };
  return A;
}

struct LsrtmGmresOptions {
  int restart = 3;
  int iterations = 20;
  bool zero_start = false;  // default start is the scaled RTM image
  double tol = 0.0;
};

struct LsrtmGmresResult {
  Field reflectivity;
  Field rtm_image;
  GmresResult solve;
};

/// Forms m_RTM = L^T d_r (charged as one gradient-equivalent) and runs GMRES(M) on A^L m_r = m_RTM.
/// The start is c m_RTM with c = <A b, b> / |A b|^2, the multiple of the image that best fits the
/// normal equations (m_RTM itself carries the units of L^T L and is off by orders of magnitude).
inline LsrtmGmresResult lsrtm_gmres(BornOperator& op, const GatherSet& data, const LsrtmGmresOptions& opt) {
  LsrtmGmresResult out;
  out.rtm_image = op.adjoint(data);
  const auto A = lsrtm_normal_operator(op);
  const Vec b = Eigen::Map<const Vec>(out.rtm_image.data(), A.n);
  GmresOptions g;
  g.restart = opt.restart;
  g.max_iterations = opt.iterations;
  g.max_outer = opt.iterations;
  g.tol = opt.tol;
  g.initial_cost = 1.0;
  if (opt.zero_start || b.squaredNorm() == 0.0) {
    out.solve = gmres_restarted(A, b, Vec::Zero(A.n), g);
  } else {
    const Vec Ab = A(b);
    const double c = Ab.squaredNorm() > 0.0 ? Ab.dot(b) / Ab.squaredNorm() : 0.0;
    const Vec r0 = b - c * Ab;
    g.initial_cost += g.cost_per_apply;
    out.solve = gmres_restarted(A, b, c * b, g, &r0);
  }
  out.reflectivity.assign(out.solve.x.data(), out.solve.x.data() + out.solve.x.size());
  return out;
}

}  // namespace aafwi
