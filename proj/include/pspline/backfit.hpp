#pragma once

// Penalized additive B-spline regression with two components, fitted by
// backfitting (block Gauss–Seidel on the two coefficient blocks).
//
// The stacked normal equations
//   [ Lambda_1   X1'X2    ] [b1]   [X1'y]
//   [ X2'X1      Lambda_2 ] [b2] = [X2'y],   Lambda_j = Xj'Xj + lambda_j Q_m,
// are singular along (1, ..., 1, -1, ..., -1) for every lambda: both bases sum
// to one and Q_m annihilates constants, so a constant can move freely between
// the components. Backfitting started from b2 = 0 keeps sum_i f2(x_i2) = 0 at
// every stage; joint_solve imposes the same condition, which makes the two
// routes directly comparable.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "pspline/banded.hpp"
#include "pspline/basis.hpp"
#include "pspline/penalty.hpp"
#include "pspline/symmetric_eigen.hpp"

namespace pspline {

/// Knot count and smoothing parameter rules used throughout the numerical
/// studies: K = round(2 n^{2/5}), lambda = 2 n^{2/5} K^{-1/2}.
inline int default_num_intervals(std::size_t n) {
  return std::max(1, static_cast<int>(std::lround(2.0 * std::pow(static_cast<double>(n), 0.4))));
}

inline double default_lambda(std::size_t n, int num_intervals) {
  return 2.0 * std::pow(static_cast<double>(n), 0.4) / std::sqrt(static_cast<double>(num_intervals));
}

struct AdditiveDesign {
  Vector y;
  DesignMatrix x1;
  std::optional<DesignMatrix> x2;  ///< empty for a univariate fit
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  PenaltyMatrix penalty;

  std::size_t n() const { return x1.rows(); }
  int basis_size() const { return x1.cols(); }
  bool additive() const { return x2.has_value(); }
  const DesignMatrix& component(int j) const {
    if (j == 1) return x1;
    if (j == 2 && x2) return *x2;
    throw InputError("component index must be 1 or 2 (2 only for additive designs)");
  }
  double lambda(int j) const { return j == 1 ? lambda1 : lambda2; }
};

inline void validate(const AdditiveDesign& d) {
  if (static_cast<std::size_t>(d.y.size()) != d.x1.rows())
    throw InputError("response length does not match design rows");
  if (d.penalty.size() != d.x1.cols()) throw InputError("penalty size does not match basis size");
  if (d.x2) {
    if (d.x2->rows() != d.x1.rows()) throw InputError("X1 and X2 have different row counts");
    if (d.x2->cols() != d.x1.cols()) throw InputError("X1 and X2 have different basis sizes");
  }
  if (!(d.lambda1 >= 0.0) || !(d.lambda2 >= 0.0)) throw InputError("smoothing parameters must be >= 0");
}

/// Builds and validates a design from raw covariates.
inline AdditiveDesign make_additive_design(Vector y, const SplineConfig& cfg, std::span<const double> x1,
                                           std::optional<std::span<const double>> x2, double lambda1,
                                           double lambda2, int diff_order) {
  AdditiveDesign d{std::move(y), design_matrix(cfg, x1), std::nullopt, lambda1, lambda2,
                   PenaltyMatrix(diff_order, cfg.num_basis())};
  if (x2) d.x2 = design_matrix(cfg, *x2);
  validate(d);
  return d;
}

/// L(b1, b2) = |y - X1 b1 - X2 b2|^2 + sum_j lambda_j b_j' Q b_j.
inline double criterion(const AdditiveDesign& d, const Vector& b1, const Vector& b2) {
  Vector r = d.y - d.x1.multiply(b1);
  double pen = d.lambda1 * b1.dot(d.penalty.multiply(b1));
  if (d.x2) {
    r -= d.x2->multiply(b2);
    pen += d.lambda2 * b2.dot(d.penalty.multiply(b2));
  }
  return r.squaredNorm() + pen;
}

struct CoefficientPair {
  Vector b1;
  Vector b2;  ///< size 0 for a univariate design
};

struct BackfitOptions {
  double tol = 1e-10;
  int max_stages = 100;
  bool keep_history = false;
};

struct BackfitResult {
  Vector b1;
  Vector b2;
  int stages = 0;
  bool converged = false;
  /// Sup-norm of the stacked normal-equation residual at exit.
  double residual_norm = 0.0;
  std::vector<CoefficientPair> history;
};

/// What a Backfitter does when some Lambda_j is singular (for instance a
/// basis function without data and lambda_j = 0).
enum class SingularPolicy { Throw, MinimumNorm };

/// Solves Lambda_j t = c by banded Cholesky, or by a minimum-norm least
/// squares fallback when permitted and the matrix is singular.
class ComponentSolver {
 public:
  ComponentSolver(const BandedMatrix& a, SingularPolicy policy) {
    try {
      chol_.emplace(a);
    } catch (const NotPositiveDefinite&) {
      if (policy == SingularPolicy::Throw) throw;
      cod_.emplace(a.dense());
      cod_->setThreshold(1e-12);
    }
  }

  bool singular() const noexcept { return !chol_; }
  Vector solve(const Vector& c) const { return chol_ ? chol_->solve(c) : Vector(cod_->solve(c)); }

 private:
  std::optional<BandCholesky> chol_;
  std::optional<Eigen::CompleteOrthogonalDecomposition<Matrix>> cod_;
};

/// Factorizations and cross products shared by every stage of a fit.
/// Holds a reference to the design, which must outlive it.
class Backfitter {
 public:
  explicit Backfitter(const AdditiveDesign& design, SingularPolicy policy = SingularPolicy::Throw)
      : design_(design),
        lambda1_(penalized_gram(gram_banded(design.x1), design.lambda1, design.penalty)),
        chol1_(lambda1_, policy) {
    validate(design);
    if (design.x2) {
      lambda2_ = penalized_gram(gram_banded(*design.x2), design.lambda2, design.penalty);
      chol2_.emplace(*lambda2_, policy);
    }
  }

  const AdditiveDesign& design() const noexcept { return design_; }
  const BandedMatrix& lambda(int j) const { return j == 1 ? lambda1_ : *lambda2_; }
  const ComponentSolver& factor(int j) const { return j == 1 ? chol1_ : *chol2_; }
  /// True when either Lambda_j needed the minimum-norm fallback.
  bool singular() const noexcept { return chol1_.singular() || (chol2_ && chol2_->singular()); }

  /// One sweep: b1 = Lambda1^{-1} X1'(y - X2 b2_prev), b2 = Lambda2^{-1} X2'(y - X1 b1).
  CoefficientPair stage(const Vector& y, const Vector& b2_prev) const {
    CoefficientPair out;
    if (!design_.x2) {
      out.b1 = chol1_.solve(design_.x1.transpose_multiply(y));
      out.b2 = Vector();
      return out;
    }
    out.b1 = chol1_.solve(design_.x1.transpose_multiply(y - design_.x2->multiply(b2_prev)));
    out.b2 = chol2_->solve(design_.x2->transpose_multiply(y - design_.x1.multiply(out.b1)));
    return out;
  }

  CoefficientPair stage(const Vector& b2_prev) const { return stage(design_.y, b2_prev); }

  /// Exactly `stages` sweeps from b2_init.
  CoefficientPair run_stages(const Vector& y, const Vector& b2_init, int stages) const {
    CoefficientPair cur{Vector::Zero(design_.basis_size()), b2_init};
    for (int s = 0; s < stages; ++s) cur = stage(y, cur.b2);
    return cur;
  }

  BackfitResult run(const Vector& y, const Vector& b2_init, const BackfitOptions& opts) const {
    BackfitResult res;
    Vector b1 = Vector::Zero(design_.basis_size());
    Vector b2 = design_.x2 ? b2_init : Vector();
    for (int s = 1; s <= opts.max_stages; ++s) {
      CoefficientPair next = stage(y, b2);
      double change = (next.b1 - b1).lpNorm<Eigen::Infinity>();
      if (design_.x2) change = std::max(change, (next.b2 - b2).lpNorm<Eigen::Infinity>());
      b1 = std::move(next.b1);
      b2 = std::move(next.b2);
      res.stages = s;
      if (opts.keep_history) res.history.push_back({b1, b2});
      // A univariate fit is exact after one solve. Otherwise a small step
      // must also leave a small normal-equation residual.
      if (!design_.x2) {
        res.converged = true;
        break;
      }
      if (change <= opts.tol && normal_residual(y, b1, b2) <= residual_tolerance(y, opts.tol)) {
        res.converged = true;
        break;
      }
    }
    res.residual_norm = normal_residual(y, b1, b2);
    res.b1 = std::move(b1);
    res.b2 = std::move(b2);
    return res;
  }

  BackfitResult run(const Vector& b2_init, const BackfitOptions& opts) const {
    return run(design_.y, b2_init, opts);
  }

  /// tol, raised to a few ulps of |X'y| when round-off alone exceeds it.
  double residual_tolerance(const Vector& y, double tol) const {
    double scale = design_.x1.transpose_multiply(y.cwiseAbs()).lpNorm<Eigen::Infinity>();
    if (design_.x2) scale = std::max(scale, design_.x2->transpose_multiply(y.cwiseAbs()).lpNorm<Eigen::Infinity>());
    return std::max(tol, 64.0 * std::numeric_limits<double>::epsilon() * scale);
  }

  /// max of |Lambda1 b1 + X1'X2 b2 - X1'y|_inf and |X2'X1 b1 + Lambda2 b2 - X2'y|_inf.
  double normal_residual(const Vector& y, const Vector& b1, const Vector& b2) const {
    if (!design_.x2) return (lambda1_.multiply(b1) - design_.x1.transpose_multiply(y)).lpNorm<Eigen::Infinity>();
    const Vector f1 = design_.x1.multiply(b1);
    const Vector f2 = design_.x2->multiply(b2);
    const Vector r1 = lambda1_.multiply(b1) + design_.x1.transpose_multiply(f2) - design_.x1.transpose_multiply(y);
    const Vector r2 = design_.x2->transpose_multiply(f1) + lambda2_->multiply(b2) - design_.x2->transpose_multiply(y);
    return std::max(r1.lpNorm<Eigen::Infinity>(), r2.lpNorm<Eigen::Infinity>());
  }

  /// Weight vector w with c1'b1 + c2'b2 = w'y after `stages` sweeps from
  /// b2 = 0, by reverse accumulation through the sweeps.
  Vector stage_adjoint(const Vector& c1, const Vector& c2, int stages) const {
    const auto n = static_cast<Eigen::Index>(design_.n());
    Vector w = Vector::Zero(n);
    if (!design_.x2) {
      if (stages >= 1) w = design_.x1.multiply(chol1_.solve(c1));
      return w;
    }
    const DesignMatrix& x1 = design_.x1;
    const DesignMatrix& x2 = *design_.x2;
    Vector adj1 = c1;
    Vector adj2 = c2;
    for (int s = stages; s >= 1; --s) {
      // b2^(s) = Lambda2^{-1} X2'(y - X1 b1^(s))
      const Vector t2 = chol2_->solve(adj2);
      const Vector u2 = x2.multiply(t2);
      w += u2;
      adj1 -= x1.transpose_multiply(u2);
      // b1^(s) = Lambda1^{-1} X1'(y - X2 b2^(s-1))
      const Vector t1 = chol1_.solve(adj1);
      const Vector u1 = x1.multiply(t1);
      w += u1;
      adj2 = -x2.transpose_multiply(u1);
      adj1.setZero();
    }
    return w;
  }

 private:
  const AdditiveDesign& design_;
  BandedMatrix lambda1_;
  ComponentSolver chol1_;
  std::optional<BandedMatrix> lambda2_;
  std::optional<ComponentSolver> chol2_;
};

inline CoefficientPair backfit_stage(const AdditiveDesign& design, const Vector& b2_prev) {
  return Backfitter(design).stage(b2_prev);
}

inline BackfitResult backfit(const AdditiveDesign& design, const Vector& b2_init, double tol = 1e-10,
                             int max_stages = 100) {
  return Backfitter(design).run(b2_init, BackfitOptions{tol, max_stages, false});
}

inline BackfitResult backfit(const AdditiveDesign& design) {
  return backfit(design, Vector::Zero(design.basis_size()));
}

/// The stacked normal-equation matrix H = [[X1'X1, X1'X2], [X2'X1, X2'X2]]
/// + diag(lambda1 Q, lambda2 Q), dense.
inline Matrix stacked_hessian(const AdditiveDesign& d) {
  const int q = d.basis_size();
  if (!d.x2) return penalized_gram(gram_banded(d.x1), d.lambda1, d.penalty).dense();
  Matrix h(2 * q, 2 * q);
  h.topLeftCorner(q, q) = penalized_gram(gram_banded(d.x1), d.lambda1, d.penalty).dense();
  h.bottomRightCorner(q, q) = penalized_gram(gram_banded(*d.x2), d.lambda2, d.penalty).dense();
  const Matrix cross = d.x1.cross_gram(*d.x2);
  h.topRightCorner(q, q) = cross;
  h.bottomLeftCorner(q, q) = cross.transpose();
  return h;
}

/// Dense Cholesky of the stacked system with the identifiability condition
/// sum_i f2(x_i2) = 0 added as the rank-one term l l'/n, l = (0, X2'1).
/// On the solution set of the normal equations this selects the point that
/// backfitting from b2 = 0 converges to.
class StackedSystem {
 public:
  explicit StackedSystem(const AdditiveDesign& d) : q_(d.basis_size()), additive_(d.additive()) {
    Matrix m = stacked_hessian(d);
    if (additive_) {
      Vector l = Vector::Zero(2 * q_);
      l.tail(q_) = d.x2->column_sums();
      m += l * l.transpose() / static_cast<double>(d.n());
    }
    llt_.compute(m);
    const double max_diag = m.diagonal().maxCoeff();
    if (llt_.info() != Eigen::Success) throw SingularSystem("stacked normal equations are not positive definite");
    const Matrix l_factor = llt_.matrixL();
    const double min_pivot = l_factor.diagonal().array().square().minCoeff();
    if (!(min_pivot > 1e-13 * max_diag))
      throw SingularSystem("stacked normal equations are numerically singular (min pivot " +
                           std::to_string(min_pivot) + ")");
  }

  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
  int basis_size() const noexcept { return q_; }

 private:
  int q_;
  bool additive_;
  Eigen::LLT<Matrix> llt_;
};

/// Direct solution of the estimating equations; the oracle for backfit.
inline CoefficientPair joint_solve(const AdditiveDesign& d) {
  validate(d);
  const StackedSystem sys(d);
  const int q = d.basis_size();
  if (!d.x2) return {sys.solve(d.x1.transpose_multiply(d.y)), Vector()};
  Vector rhs(2 * q);
  rhs.head(q) = d.x1.transpose_multiply(d.y);
  rhs.tail(q) = d.x2->transpose_multiply(d.y);
  const Vector b = sys.solve(rhs);
  return {b.head(q), b.tail(q)};
}

/// Marginal penalized spline estimate B(x)' Lambda^{-1} X'y.
inline double univariate_penalized(const DesignMatrix& x, const Vector& y, double lambda,
                                   const PenaltyMatrix& penalty, double at) {
  const BandedMatrix lam = penalized_gram(gram_banded(x), lambda, penalty);
  const Vector b = band_cholesky_solve(lam, x.transpose_multiply(y));
  return basis_vector(x.config(), at).dot(b);
}

/// Coefficients of the marginal penalized fit.
inline Vector univariate_coefficients(const DesignMatrix& x, const Vector& y, double lambda,
                                      const PenaltyMatrix& penalty) {
  return band_cholesky_solve(penalized_gram(gram_banded(x), lambda, penalty), x.transpose_multiply(y));
}

/// One-stage estimates (f01(x1), f02(x2)):
/// f01 = B(x1)' Lambda1^{-1} X1'y and f02 = B(x2)' Lambda2^{-1} X2'(y - X1 Lambda1^{-1} X1'y).
inline std::pair<double, double> one_stage_pair(const AdditiveDesign& d, double x1, double x2) {
  if (!d.x2) throw InputError("one_stage_pair needs an additive design");
  const Backfitter fitter(d);
  const CoefficientPair c = fitter.stage(Vector::Zero(d.basis_size()));
  const SplineConfig& cfg = d.x1.config();
  return {basis_vector(cfg, x1).dot(c.b1), basis_vector(cfg, x2).dot(c.b2)};
}

struct Prediction {
  double f1 = 0.0;
  double f2 = 0.0;
  double yhat = 0.0;
};

inline Prediction predict(const BackfitResult& r, const SplineConfig& cfg, double x1, double x2) {
  Prediction p;
  p.f1 = basis_vector(cfg, x1).dot(r.b1);
  p.f2 = r.b2.size() > 0 ? basis_vector(cfg, x2).dot(r.b2) : 0.0;
  p.yhat = p.f1 + p.f2;
  return p;
}

/// f_j(x) minus the sample mean of f_j over the design points.
inline double center_component(const BackfitResult& r, const AdditiveDesign& d, int j, double x) {
  const DesignMatrix& xj = d.component(j);
  const Vector& b = j == 1 ? r.b1 : r.b2;
  const double mean = xj.multiply(b).mean();
  return basis_vector(xj.config(), x).dot(b) - mean;
}

struct HessianReport {
  bool is_pd = false;
  bool cholesky_ok = false;
  double min_eig = 0.0;
  double max_eig = 0.0;
  /// Unit vector proportional to (1, ..., 1, -1, ..., -1).
  Vector null_direction;
  /// |H u| for that unit vector.
  double null_direction_residual = 0.0;
  /// Smallest eigenvalue of H on the orthogonal complement of null_direction.
  double identifiable_min_eig = 0.0;
};

/// Positive-definiteness diagnostic of H(L) = H1 + H2 (the Hessian up to the
/// factor 2). `is_pd` requires a successful Cholesky and
/// min_eig > rel_tol * max_eig.
inline HessianReport hessian_check(const AdditiveDesign& d, double rel_tol = 1e-10) {
  validate(d);
  HessianReport rep;
  const Matrix h = stacked_hessian(d);
  const auto eig = jacobi_eigen(h);
  rep.min_eig = eig.values[0];
  rep.max_eig = eig.values[eig.values.size() - 1];
  Eigen::LLT<Matrix> llt(h);
  rep.cholesky_ok = llt.info() == Eigen::Success;
  rep.is_pd = rep.cholesky_ok && rep.min_eig > rel_tol * rep.max_eig;

  const int q = d.basis_size();
  if (d.x2) {
    rep.null_direction = Vector::Ones(2 * q);
    rep.null_direction.tail(q).setConstant(-1.0);
    rep.null_direction /= rep.null_direction.norm();
    rep.null_direction_residual = (h * rep.null_direction).norm();
    const Matrix shifted = h + rep.max_eig * rep.null_direction * rep.null_direction.transpose();
    rep.identifiable_min_eig = jacobi_eigen(shifted).values[0];
  } else {
    rep.identifiable_min_eig = rep.min_eig;
  }
  return rep;
}

/// The two parts of H(L): H1 = [X1 X2]'[X1 X2] and H2 = diag(lambda1 Q, lambda2 Q).
inline std::pair<Matrix, Matrix> hessian_parts(const AdditiveDesign& d) {
  AdditiveDesign unpenalized = d;
  unpenalized.lambda1 = unpenalized.lambda2 = 0.0;
  const Matrix h1 = stacked_hessian(unpenalized);
  Matrix h2 = Matrix::Zero(h1.rows(), h1.cols());
  const int q = d.basis_size();
  h2.topLeftCorner(q, q) = d.lambda1 * d.penalty.dense();
  if (d.x2) h2.bottomRightCorner(q, q) = d.lambda2 * d.penalty.dense();
  return {h1, h2};
}

}  // namespace pspline
