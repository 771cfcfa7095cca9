#pragma once

// Symmetric banded matrices and their Cholesky factorization.
//
// Storage keeps the lower triangle by diagonal: element (j + d, j) lives at
// bands_[d * n + j] for d = 0..w. Factorization costs O(n w^2), each solve
// O(n w).

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "pspline/basis.hpp"
#include "pspline/errors.hpp"

namespace pspline {

class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(int size, int bandwidth)
      : size_(size), bandwidth_(bandwidth),
        bands_(static_cast<std::size_t>(size) * static_cast<std::size_t>(bandwidth + 1), 0.0) {
    if (size < 0 || bandwidth < 0) throw InputError("BandedMatrix: negative dimension");
  }

  int size() const noexcept { return size_; }
  int bandwidth() const noexcept { return bandwidth_; }

  /// Symmetric read access; zero outside the band.
  double operator()(int i, int j) const {
    if (i < j) std::swap(i, j);
    const int d = i - j;
    if (d > bandwidth_) return 0.0;
    return bands_[static_cast<std::size_t>(d) * static_cast<std::size_t>(size_) + static_cast<std::size_t>(j)];
  }

  /// Lower-triangle element (i, j), i >= j, i - j <= bandwidth.
  double& lower(int i, int j) {
    return bands_[static_cast<std::size_t>(i - j) * static_cast<std::size_t>(size_) + static_cast<std::size_t>(j)];
  }

  /// Copy of this matrix with a wider band.
  BandedMatrix widened(int bandwidth) const {
    BandedMatrix out(size_, std::max(bandwidth, bandwidth_));
    for (int d = 0; d <= bandwidth_; ++d)
      for (int j = 0; j + d < size_; ++j) out.lower(j + d, j) = (*this)(j + d, j);
    return out;
  }

  Matrix dense() const {
    Matrix m = Matrix::Zero(size_, size_);
    for (int d = 0; d <= bandwidth_; ++d)
      for (int j = 0; j + d < size_; ++j) {
        const double v = (*this)(j + d, j);
        m(j + d, j) = v;
        m(j, j + d) = v;
      }
    return m;
  }

  /// Banded copy of the lower band of a symmetric dense matrix.
  static BandedMatrix from_dense(const Matrix& a, int bandwidth) {
    if (a.rows() != a.cols()) throw InputError("from_dense: matrix is not square");
    BandedMatrix out(static_cast<int>(a.rows()), bandwidth);
    for (int d = 0; d <= bandwidth; ++d)
      for (int j = 0; j + d < out.size_; ++j) out.lower(j + d, j) = a(j + d, j);
    return out;
  }

  Vector multiply(const Vector& x) const {
    Vector y = Vector::Zero(size_);
    for (int j = 0; j < size_; ++j) y[j] += (*this)(j, j) * x[j];
    for (int d = 1; d <= bandwidth_; ++d)
      for (int j = 0; j + d < size_; ++j) {
        const double v = (*this)(j + d, j);
        y[j + d] += v * x[j];
        y[j] += v * x[j + d];
      }
    return y;
  }

 private:
  int size_ = 0;
  int bandwidth_ = 0;
  std::vector<double> bands_;
};

/// X'X for a B-spline design; bandwidth p.
inline BandedMatrix gram_banded(const DesignMatrix& x) {
  const int w = x.width() - 1;
  BandedMatrix g(x.cols(), w);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto v = x.row_values(i);
    const int c0 = x.first_col(i);
    for (int a = 0; a < x.width(); ++a)
      for (int b = 0; b <= a; ++b)
        g.lower(c0 + a, c0 + b) += v[static_cast<std::size_t>(a)] * v[static_cast<std::size_t>(b)];
  }
  return g;
}

/// Cholesky factor L of a symmetric positive definite banded matrix, A = L L'.
class BandCholesky {
 public:
  explicit BandCholesky(const BandedMatrix& a) : factor_(a) {
    const int n = a.size();
    const int w = a.bandwidth();
    for (int j = 0; j < n; ++j) {
      double diag = factor_(j, j);
      for (int k = std::max(0, j - w); k < j; ++k) {
        const double l = factor_(j, k);
        diag -= l * l;
      }
      if (!(diag > 0.0)) throw NotPositiveDefinite(static_cast<std::size_t>(j), diag);
      const double ljj = std::sqrt(diag);
      factor_.lower(j, j) = ljj;
      for (int i = j + 1; i <= std::min(n - 1, j + w); ++i) {
        double s = factor_(i, j);
        for (int k = std::max(0, i - w); k < j; ++k) s -= factor_(i, k) * factor_(j, k);
        factor_.lower(i, j) = s / ljj;
      }
    }
  }

  int size() const noexcept { return factor_.size(); }

  /// Solves A x = b.
  Vector solve(const Vector& b) const {
    const int n = factor_.size();
    const int w = factor_.bandwidth();
    if (b.size() != n) throw InputError("BandCholesky::solve: size mismatch");
    Vector x = b;
    for (int i = 0; i < n; ++i) {
      double s = x[i];
      for (int k = std::max(0, i - w); k < i; ++k) s -= factor_(i, k) * x[k];
      x[i] = s / factor_(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = x[i];
      for (int k = i + 1; k <= std::min(n - 1, i + w); ++k) s -= factor_(k, i) * x[k];
      x[i] = s / factor_(i, i);
    }
    return x;
  }

  Matrix solve(const Matrix& b) const {
    Matrix x(b.rows(), b.cols());
    for (Eigen::Index c = 0; c < b.cols(); ++c) x.col(c) = solve(Vector(b.col(c)));
    return x;
  }

  /// The lower factor, stored in band form.
  const BandedMatrix& lower() const noexcept { return factor_; }

 private:
  BandedMatrix factor_;
};

inline Vector band_cholesky_solve(const BandedMatrix& a, const Vector& rhs) {
  return BandCholesky(a).solve(rhs);
}

inline Matrix band_cholesky_solve(const BandedMatrix& a, const Matrix& rhs) {
  return BandCholesky(a).solve(rhs);
}

}  // namespace pspline
