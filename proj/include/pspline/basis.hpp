#pragma once

// Equidistant B-spline bases on the unit interval.
//
// Basis functions are indexed k = -p+1, ..., K and built by the Cox–de Boor
// recursion with half-open base intervals (kappa_{k-1}, kappa_k]. B_k has
// support (kappa_{k-1}, kappa_{k+p}]; the evaluation domain is (0, 1].

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pspline/errors.hpp"
#include "pspline/quadrature.hpp"

namespace pspline {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Degree, number of knot intervals and the extended knot sequence
/// kappa_k = k/K for k = -p, ..., K+p.
class SplineConfig {
 public:
  SplineConfig(int degree, int num_intervals) : degree_(degree), num_intervals_(num_intervals) {
    if (degree < 0) throw InputError("spline degree must be non-negative");
    if (num_intervals < 1) throw InputError("number of knot intervals must be positive");
    knots_.reserve(static_cast<std::size_t>(num_intervals + 2 * degree + 1));
    for (int k = -degree; k <= num_intervals + degree; ++k)
      knots_.push_back(static_cast<double>(k) / static_cast<double>(num_intervals));
  }

  int degree() const noexcept { return degree_; }
  int num_intervals() const noexcept { return num_intervals_; }
  /// K + p.
  int num_basis() const noexcept { return num_intervals_ + degree_; }
  int first_index() const noexcept { return -degree_ + 1; }
  int last_index() const noexcept { return num_intervals_; }

  std::span<const double> knots() const noexcept { return knots_; }
  /// kappa_k for k in [-p, K+p].
  double knot(int k) const { return knots_[static_cast<std::size_t>(k + degree_)]; }

  /// Column of basis index k in a design matrix.
  int column_of(int index) const noexcept { return index + degree_ - 1; }
  int index_of(int column) const noexcept { return column - degree_ + 1; }

  bool operator==(const SplineConfig& other) const noexcept {
    return degree_ == other.degree_ && num_intervals_ == other.num_intervals_;
  }

 private:
  int degree_;
  int num_intervals_;
  std::vector<double> knots_;
};

inline SplineConfig make_knots(int degree, int num_intervals) {
  return SplineConfig(degree, num_intervals);
}

inline void check_index(const SplineConfig& cfg, int index) {
  if (index < cfg.first_index() || index > cfg.last_index())
    throw InputError("basis index " + std::to_string(index) + " outside [" +
                     std::to_string(cfg.first_index()) + ", " +
                     std::to_string(cfg.last_index()) + "]");
}

inline void check_point(double x) {
  if (!(x > 0.0 && x <= 1.0))
    throw InputError("evaluation point " + std::to_string(x) + " outside (0, 1]");
}

namespace detail {

// 0/0 := 0; uniform knots never hit it but the recursion stays total.
inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline double cox_de_boor(const SplineConfig& cfg, int index, int degree, double x) {
  if (degree == 0) return (cfg.knot(index - 1) < x && x <= cfg.knot(index)) ? 1.0 : 0.0;
  const double left = ratio(x - cfg.knot(index - 1),
                            cfg.knot(index + degree - 1) - cfg.knot(index - 1));
  const double right = ratio(cfg.knot(index + degree) - x,
                             cfg.knot(index + degree) - cfg.knot(index));
  double value = 0.0;
  if (left != 0.0) value += left * cox_de_boor(cfg, index, degree - 1, x);
  if (right != 0.0) value += right * cox_de_boor(cfg, index + 1, degree - 1, x);
  return value;
}

}  // namespace detail

/// B_k(x) by direct recursion. Zero outside (kappa_{k-1}, kappa_{k+p}].
inline double bspline_eval(const SplineConfig& cfg, int index, double x) {
  check_index(cfg, index);
  check_point(x);
  if (!(cfg.knot(index - 1) < x && x <= cfg.knot(index + cfg.degree()))) return 0.0;
  return detail::cox_de_boor(cfg, index, cfg.degree(), x);
}

/// Knot interval j in [1, K] with kappa_{j-1} < x <= kappa_j.
inline int knot_interval(const SplineConfig& cfg, double x) {
  const int K = cfg.num_intervals();
  int j = static_cast<int>(std::ceil(x * K));
  j = std::clamp(j, 1, K);
  while (j > 1 && x <= cfg.knot(j - 1)) --j;
  while (j < K && x > cfg.knot(j)) ++j;
  return j;
}

/// Evaluates the p+1 basis functions that can be nonzero at x into `out`
/// (size p+1) and returns the design-matrix column of the first one.
inline int local_basis(const SplineConfig& cfg, double x, std::span<double> out) {
  check_point(x);
  const int p = cfg.degree();
  const int j = knot_interval(cfg, x);
  // out[r] holds B_{j-d+r}^{[d]} after processing degree d.
  std::fill(out.begin(), out.end(), 0.0);
  out[0] = 1.0;
  for (int d = 1; d <= p; ++d) {
    // Iterate r from high to low so out[r-1] still holds degree d-1 values.
    for (int r = d; r >= 0; --r) {
      const int k = j - d + r;
      double value = 0.0;
      if (r >= 1) {
        // B_k^{[d-1]} sits at out[r-1] in the degree d-1 layout.
        value += detail::ratio(x - cfg.knot(k - 1), cfg.knot(k + d - 1) - cfg.knot(k - 1)) *
                 out[r - 1];
      }
      if (r <= d - 1) {
        // B_{k+1}^{[d-1]} sits at out[r].
        value += detail::ratio(cfg.knot(k + d) - x, cfg.knot(k + d) - cfg.knot(k)) * out[r];
      }
      out[r] = value;
    }
  }
  return cfg.column_of(j - p);
}

/// B(x) = (B_{-p+1}(x), ..., B_K(x)) as a dense vector.
inline Vector basis_vector(const SplineConfig& cfg, double x) {
  Vector b = Vector::Zero(cfg.num_basis());
  std::vector<double> local(static_cast<std::size_t>(cfg.degree() + 1));
  const int first = local_basis(cfg, x, local);
  for (int r = 0; r <= cfg.degree(); ++r) b[first + r] = local[static_cast<std::size_t>(r)];
  return b;
}

/// n x (K+p) matrix of basis values, stored row-wise as the p+1 contiguous
/// entries that can be nonzero.
class DesignMatrix {
 public:
  DesignMatrix(SplineConfig cfg, std::vector<double> points)
      : cfg_(std::move(cfg)), points_(std::move(points)) {
    const std::size_t width = static_cast<std::size_t>(cfg_.degree() + 1);
    first_col_.resize(points_.size());
    values_.resize(points_.size() * width);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      first_col_[i] = local_basis(cfg_, points_[i], std::span<double>(values_.data() + i * width, width));
    }
  }

  const SplineConfig& config() const noexcept { return cfg_; }
  std::size_t rows() const noexcept { return points_.size(); }
  int cols() const noexcept { return cfg_.num_basis(); }
  /// Nonzeros per row.
  int width() const noexcept { return cfg_.degree() + 1; }
  std::span<const double> covariate() const noexcept { return points_; }

  int first_col(std::size_t row) const { return first_col_[row]; }
  std::span<const double> row_values(std::size_t row) const {
    const std::size_t w = static_cast<std::size_t>(width());
    return {values_.data() + row * w, w};
  }

  double operator()(std::size_t row, int col) const {
    const int offset = col - first_col_[row];
    if (offset < 0 || offset >= width()) return 0.0;
    return values_[row * static_cast<std::size_t>(width()) + static_cast<std::size_t>(offset)];
  }

  /// X b.
  Vector multiply(const Vector& b) const {
    Vector out(static_cast<Eigen::Index>(rows()));
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto v = row_values(i);
      const int c0 = first_col_[i];
      double s = 0.0;
      for (int r = 0; r < width(); ++r) s += v[static_cast<std::size_t>(r)] * b[c0 + r];
      out[static_cast<Eigen::Index>(i)] = s;
    }
    return out;
  }

  /// X' v.
  Vector transpose_multiply(const Vector& v) const {
    Vector out = Vector::Zero(cols());
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto vals = row_values(i);
      const int c0 = first_col_[i];
      const double vi = v[static_cast<Eigen::Index>(i)];
      for (int r = 0; r < width(); ++r) out[c0 + r] += vals[static_cast<std::size_t>(r)] * vi;
    }
    return out;
  }

  /// X' diag(d) X as a dense q x q matrix (used for small cross products).
  Matrix weighted_gram(const Vector& d) const {
    Matrix g = Matrix::Zero(cols(), cols());
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto vals = row_values(i);
      const int c0 = first_col_[i];
      const double di = d[static_cast<Eigen::Index>(i)];
      for (int a = 0; a < width(); ++a)
        for (int b = 0; b < width(); ++b)
          g(c0 + a, c0 + b) += vals[static_cast<std::size_t>(a)] * vals[static_cast<std::size_t>(b)] * di;
    }
    return g;
  }

  /// X' Z for another design on the same rows (the cross Gram X1'X2).
  Matrix cross_gram(const DesignMatrix& other) const {
    if (other.rows() != rows()) throw InputError("cross_gram: row count mismatch");
    Matrix g = Matrix::Zero(cols(), other.cols());
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto va = row_values(i);
      const auto vb = other.row_values(i);
      const int ca = first_col_[i];
      const int cb = other.first_col(i);
      for (int a = 0; a < width(); ++a)
        for (int b = 0; b < other.width(); ++b)
          g(ca + a, cb + b) += va[static_cast<std::size_t>(a)] * vb[static_cast<std::size_t>(b)];
    }
    return g;
  }

  /// Sum of rows: X' 1.
  Vector column_sums() const { return transpose_multiply(Vector::Ones(static_cast<Eigen::Index>(rows()))); }

  Matrix dense() const {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows()), cols());
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto vals = row_values(i);
      for (int r = 0; r < width(); ++r)
        m(static_cast<Eigen::Index>(i), first_col_[i] + r) = vals[static_cast<std::size_t>(r)];
    }
    return m;
  }

 private:
  SplineConfig cfg_;
  std::vector<double> points_;
  std::vector<int> first_col_;
  std::vector<double> values_;
};

inline DesignMatrix design_matrix(const SplineConfig& cfg, std::span<const double> points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i] > 0.0 && points[i] <= 1.0))
      throw InputError("design point " + std::to_string(i) + " = " + std::to_string(points[i]) +
                       " outside (0, 1]");
  }
  return DesignMatrix(cfg, std::vector<double>(points.begin(), points.end()));
}

/// Integral of B_k over [0, 1], by Gauss–Legendre on each knot interval.
inline double basis_integral(const SplineConfig& cfg, int index) {
  check_index(cfg, index);
  const int p = cfg.degree();
  const GaussLegendre rule((p + 2) / 2 + 1);
  double total = 0.0;
  // Support (kappa_{k-1}, kappa_{k+p}] clipped to [0, 1].
  for (int j = std::max(index, 1); j <= std::min(index + p, cfg.num_intervals()); ++j) {
    total += rule.integrate([&](double x) { return detail::cox_de_boor(cfg, index, p, x); },
                            cfg.knot(j - 1), cfg.knot(j));
  }
  return total;
}

/// Maps an exact zero to the smallest positive double; other values pass through.
inline double clamp_to_domain(double x) {
  return x == 0.0 ? std::nextafter(0.0, 1.0) : x;
}

}  // namespace pspline
