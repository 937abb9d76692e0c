#pragma once

// Thin QR factorization A = Q R of a sliding set of columns.
// Append: modified Gram-Schmidt with a second pass when cancellation is detected.
// Drop first: delete column 0 of R, then Givens rotations restore triangularity.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "aafwi/errors.hpp"

namespace aafwi {

class QRWindow {
 public:
  QRWindow() = default;
  QRWindow(Eigen::Index rows, Eigen::Index capacity) : Q_(rows, capacity), R_(capacity, capacity) {
    if (rows < 1 || capacity < 1) throw std::invalid_argument("QRWindow: rows and capacity must be positive");
    if (capacity > rows) throw std::invalid_argument("QRWindow: more columns than rows");
    Q_.setZero();
    R_.setZero();
  }

  Eigen::Index rows() const { return Q_.rows(); }
  Eigen::Index cols() const { return k_; }
  Eigen::Index capacity() const { return R_.cols(); }
  bool empty() const { return k_ == 0; }
  bool full() const { return k_ == capacity(); }

  auto Q() const { return Q_.leftCols(k_); }
  auto R() const { return R_.topLeftCorner(k_, k_).template triangularView<Eigen::Upper>(); }
  Eigen::MatrixXd R_dense() const { return Eigen::MatrixXd(R()); }
  Eigen::MatrixXd reconstruct() const { return Q() * R_dense(); }

  /// Frobenius norm of the stored matrix (orthogonal invariance: equals ||R||_F).
  double norm() const { return R_.topLeftCorner(k_, k_).norm(); }

  void append(const Eigen::Ref<const Eigen::VectorXd>& a) {
    if (a.size() != rows()) throw std::invalid_argument("QRWindow::append: column length mismatch");
    if (full()) throw InvalidState("QRWindow::append: window is full");
    const double anorm = a.norm();
    Eigen::VectorXd q = a;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(k_);
    orthogonalize(q, r);
    double rnorm = q.norm();
    if (!(rnorm > 1e-14 * anorm)) {
      // a lies in span(Q): keep Q orthonormal with any direction orthogonal to it.
      const Eigen::VectorXd residual = q;
      q = complement();
      rnorm = residual.dot(q);
      if (rnorm < 0.0) {
        q = -q;
        rnorm = -rnorm;
      }
    } else {
      q /= rnorm;
    }
    Q_.col(k_) = q;
    R_.col(k_).head(k_) = r;
    R_(k_, k_) = rnorm;
    ++k_;
  }

  void drop_first() {
    if (empty()) throw InvalidState("QRWindow::drop_first: window is empty");
    const Eigen::Index k = k_;
    // Shift columns of R left; the result is upper Hessenberg.
    for (Eigen::Index j = 0; j + 1 < k; ++j) R_.col(j).head(k) = R_.col(j + 1).head(k);
    R_.col(k - 1).setZero();
    for (Eigen::Index j = 0; j + 1 < k; ++j) {
      Eigen::JacobiRotation<double> G;
      G.makeGivens(R_(j, j), R_(j + 1, j));
      R_.block(0, j, k, k - j).applyOnTheLeft(j, j + 1, G.adjoint());
      Q_.leftCols(k).applyOnTheRight(j, j + 1, G);
      R_(j + 1, j) = 0.0;
    }
    R_.row(k - 1).setZero();
    Q_.col(k - 1).setZero();
    --k_;
  }

  void clear() {
    Q_.leftCols(k_).setZero();
    R_.topLeftCorner(k_, k_).setZero();
    k_ = 0;
  }

  /// Least-squares coefficients argmin ||A g - f||.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& f) const {
    if (empty()) throw InvalidState("QRWindow::solve: window is empty");
    if (f.size() != rows()) throw std::invalid_argument("QRWindow::solve: length mismatch");
    const Eigen::VectorXd c = Q().transpose() * f;
    return R().solve(c);
  }

  /// Smallest |R_ii| relative to ||A||_F, and its position.
  double min_diagonal_ratio(Eigen::Index* where = nullptr) const {
    const double n = norm();
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < k_; ++i) {
      const double r = n > 0.0 ? std::abs(R_(i, i)) / n : 0.0;
      if (r < best) {
        best = r;
        if (where) *where = i;
      }
    }
    return best;
  }

 private:
  void orthogonalize(Eigen::VectorXd& q, Eigen::VectorXd& r) const {
    for (int pass = 0; pass < 2; ++pass) {
      const double before = q.norm();
      for (Eigen::Index j = 0; j < k_; ++j) {
        const double c = Q_.col(j).dot(q);
        q -= c * Q_.col(j);
        r(j) += c;
      }
      // Second pass only when the first one cancelled most of the vector.
      if (pass == 0 && q.norm() > 0.5 * before) break;
    }
  }

  // Unit vector orthogonal to the current Q, built from the best-suited coordinate axis.
  Eigen::VectorXd complement() const {
    Eigen::VectorXd best;
    double best_norm = -1.0;
    for (Eigen::Index i = 0; i < rows(); ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(rows());
      e(i) = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index j = 0; j < k_; ++j) e -= Q_.col(j).dot(e) * Q_.col(j);
      const double n = e.norm();
      if (n > best_norm) {
        best_norm = n;
        best = e / n;
      }
      if (best_norm > 0.5) break;
    }
    return best;
  }

  Eigen::MatrixXd Q_;
  Eigen::MatrixXd R_;
  Eigen::Index k_ = 0;
};

}  // namespace aafwi
