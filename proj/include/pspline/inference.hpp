#pragma once

// Pointwise inference for the backfitting estimator: linear-smoother weights,
// exact finite-sample covariance, plug-in asymptotic bias and variance, the
// residual variance estimate, and normal-theory confidence intervals.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <variant>

#include <Eigen/Dense>

#include "pspline/backfit.hpp"
#include "pspline/quadrature.hpp"

namespace pspline {

/// f1(x1) = w1.y and f2(x2) = w2.y for a fixed design and tuning.
struct SmootherWeights {
  Vector w1;
  Vector w2;  ///< size 0 for a univariate design
};

enum class WeightMode { Limit, Stage };

struct WeightSpec {
  WeightMode mode = WeightMode::Limit;
  int stages = 10;  ///< used when mode == Stage

  static WeightSpec limit() { return {WeightMode::Limit, 0}; }
  static WeightSpec stage(int l) { return {WeightMode::Stage, l}; }
};

/// Weights of the linear functional c1'b1 + c2'b2 of the chosen estimator.
inline Vector functional_weights(const Backfitter& fitter, const Vector& c1, const Vector& c2,
                                 const WeightSpec& spec) {
  const AdditiveDesign& d = fitter.design();
  if (spec.mode == WeightMode::Stage) return fitter.stage_adjoint(c1, c2, spec.stages);
  const StackedSystem sys(d);
  const int q = d.basis_size();
  if (!d.x2) return d.x1.multiply(sys.solve(c1));
  Vector c(2 * q);
  c.head(q) = c1;
  c.tail(q) = c2;
  const Vector t = sys.solve(c);
  return d.x1.multiply(t.head(q)) + d.x2->multiply(t.tail(q));
}

inline SmootherWeights smoother_weights(const Backfitter& fitter, double x1, double x2, const WeightSpec& spec) {
  const AdditiveDesign& d = fitter.design();
  const SplineConfig& cfg = d.x1.config();
  const int q = d.basis_size();
  const Vector zero = Vector::Zero(q);
  SmootherWeights w;
  w.w1 = functional_weights(fitter, basis_vector(cfg, x1), zero, spec);
  if (d.x2) w.w2 = functional_weights(fitter, zero, basis_vector(cfg, x2), spec);
  return w;
}

inline SmootherWeights smoother_weights(const AdditiveDesign& d, double x1, double x2, const WeightSpec& spec) {
  return smoother_weights(Backfitter(d), x1, x2, spec);
}

/// Weights of the centered component f_j(x) - mean_i f_j(x_ij).
inline Vector centered_weights(const Backfitter& fitter, int j, double x, const WeightSpec& spec) {
  const AdditiveDesign& d = fitter.design();
  const DesignMatrix& xj = d.component(j);
  const Vector c = basis_vector(xj.config(), x) - xj.column_sums() / static_cast<double>(d.n());
  const Vector zero = Vector::Zero(d.basis_size());
  return j == 1 ? functional_weights(fitter, c, zero, spec) : functional_weights(fitter, zero, c, spec);
}

/// Noise variance: one value for every observation, or one per observation.
using NoiseVariance = std::variant<double, Vector>;

namespace detail {

inline Vector noise_vector(const NoiseVariance& noise, Eigen::Index n) {
  Vector s = std::holds_alternative<double>(noise) ? Vector::Constant(n, std::get<double>(noise))
                                                   : std::get<Vector>(noise);
  if (s.size() != n) throw InputError("noise variance vector has the wrong length");
  if ((s.array() < 0.0).any() || !s.allFinite()) throw InputError("noise variance must be non-negative");
  return s;
}

}  // namespace detail

/// V = W diag(sigma^2) W' for the 2 x n weight matrix W. For a univariate
/// design only the (0, 0) entry is populated.
inline Eigen::Matrix2d exact_covariance(const SmootherWeights& w, const NoiseVariance& noise) {
  const Vector s = detail::noise_vector(noise, w.w1.size());
  Eigen::Matrix2d v = Eigen::Matrix2d::Zero();
  v(0, 0) = (w.w1.array().square() * s.array()).sum();
  if (w.w2.size() == w.w1.size()) {
    v(1, 1) = (w.w2.array().square() * s.array()).sum();
    v(0, 1) = v(1, 0) = (w.w1.array() * w.w2.array() * s.array()).sum();
  }
  return v;
}

inline double weighted_variance(const Vector& w, const NoiseVariance& noise) {
  const Vector s = detail::noise_vector(noise, w.size());
  return (w.array().square() * s.array()).sum();
}

/// Mean squared residual of the fitted additive model.
inline double sigma2_hat(const AdditiveDesign& d, const BackfitResult& r) {
  Vector res = d.y - d.x1.multiply(r.b1);
  if (d.x2) res -= d.x2->multiply(r.b2);
  return res.squaredNorm() / static_cast<double>(d.n());
}

/// Standard normal quantile: Acklam's rational approximation followed by
/// one Halley step against erfc.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("normal_quantile: probability must be in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct IntervalEstimate {
  double estimate = 0.0;
  double variance = 0.0;
  double level = 0.95;
  double lower = 0.0;
  double upper = 0.0;
};

/// estimate +/- z_{alpha/2} sqrt(variance), alpha = 1 - level.
inline IntervalEstimate confidence_interval(double estimate, double variance, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0, 1)");
  if (!(variance >= 0.0)) throw InputError("variance must be non-negative");
  const double z = normal_quantile(1.0 - 0.5 * (1.0 - level));
  const double half = z * std::sqrt(variance);
  return {estimate, variance, level, estimate - half, estimate + half};
}

namespace detail {

inline BandCholesky empirical_gram_factor(const DesignMatrix& x) {
  BandedMatrix g = gram_banded(x);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (int dgl = 0; dgl <= g.bandwidth(); ++dgl)
    for (int c = 0; c + dgl < g.size(); ++c) g.lower(c + dgl, c) *= inv_n;
  try {
    return BandCholesky(g);
  } catch (const NotPositiveDefinite&) {
    throw SingularSystem("empirical Gram matrix n^{-1} X'X is singular");
  }
}

}  // namespace detail

/// Plug-in V_j(x) = n^{-1} B(x)' G^{-1} Sigma G^{-1} B(x) with G = n^{-1} X'X and
/// Sigma = n^{-1} X' diag(sigma^2) X.
inline double asymptotic_variance(const AdditiveDesign& d, const SplineConfig& cfg, int j, double x,
                                  const NoiseVariance& noise) {
  const DesignMatrix& xj = d.component(j);
  if (!(cfg == xj.config())) throw InputError("asymptotic_variance: basis does not match the design");
  const double n = static_cast<double>(d.n());
  const BandCholesky g = detail::empirical_gram_factor(xj);
  const Vector s = detail::noise_vector(noise, static_cast<Eigen::Index>(d.n()));
  const Vector u = g.solve(basis_vector(cfg, x));
  // u' Sigma u = n^{-1} sum_i sigma_i^2 (x_i' u)^2
  const Vector xu = xj.multiply(u);
  const double quad = (xu.array().square() * s.array()).sum() / n;
  return quad / n;
}

/// Coefficients of the least-squares projection of f onto the spline space
/// over a 2000-point midpoint grid.
inline Vector projection_coefficients(const SplineConfig& cfg, const std::function<double(double)>& f,
                                      int grid = 2000) {
  std::vector<double> pts(static_cast<std::size_t>(grid));
  Vector values(grid);
  for (int i = 0; i < grid; ++i) {
    pts[static_cast<std::size_t>(i)] = (i + 0.5) / grid;
    values[i] = f(pts[static_cast<std::size_t>(i)]);
  }
  const DesignMatrix xg = design_matrix(cfg, pts);
  return band_cholesky_solve(gram_banded(xg), xg.transpose_multiply(values));
}

/// Plug-in b_j(x) = -(lambda/n) B(x)' G^{-1} Q b*, with b* the grid L2
/// projection of the true function.
inline double asymptotic_bias(const AdditiveDesign& d, const SplineConfig& cfg, int j, double x, double lambda,
                              const std::function<double(double)>& true_fn) {
  const DesignMatrix& xj = d.component(j);
  if (!(cfg == xj.config())) throw InputError("asymptotic_bias: basis does not match the design");
  if (lambda == 0.0) return 0.0;
  const Vector bstar = projection_coefficients(cfg, true_fn);
  const BandCholesky g = detail::empirical_gram_factor(xj);
  const double n = static_cast<double>(d.n());
  return -(lambda / n) * basis_vector(cfg, x).dot(g.solve(d.penalty.multiply(bstar)));
}

/// Covariate law and noise variance of the data-generating process.
struct PopulationSpec {
  std::function<double(double)> density1;
  std::function<double(double)> density2;
  std::function<double(double, double)> joint_density;
  std::function<double(double, double)> noise_variance;

  static PopulationSpec uniform(double sigma2) {
    return {[](double) { return 1.0; }, [](double) { return 1.0; }, [](double, double) { return 1.0; },
            [sigma2](double, double) { return sigma2; }};
  }
};

/// Checks that both marginals integrate to one (to 1e-6) by 64-panel Gauss–Legendre.
inline void check_population(const PopulationSpec& spec) {
  const GaussLegendre rule(8);
  for (const auto* f : {&spec.density1, &spec.density2}) {
    double total = 0.0;
    for (int k = 0; k < 64; ++k)
      total += rule.integrate([&](double x) {
        const double v = (*f)(x);
        if (v < 0.0) throw InputError("density is negative");
        return v;
      }, k / 64.0, (k + 1) / 64.0);
    if (std::abs(total - 1.0) > 1e-6) throw InputError("marginal density does not integrate to 1");
  }
}

enum class PopulationMatrix { G1, G2, Sigma1, Sigma2 };

/// G_k = int B_i B_j q_k and Sigma_k = int int sigma^2 B_i(x_k) B_j(x_k) q,
/// by 8-node Gauss–Legendre on every knot interval.
inline Matrix population_G(const SplineConfig& cfg, const PopulationSpec& spec, PopulationMatrix which) {
  const int q = cfg.num_basis();
  const int p = cfg.degree();
  const int K = cfg.num_intervals();
  const GaussLegendre rule(8);
  Matrix g = Matrix::Zero(q, q);
  std::vector<double> local(static_cast<std::size_t>(p + 1));
  const bool sigma = which == PopulationMatrix::Sigma1 || which == PopulationMatrix::Sigma2;
  const int axis = (which == PopulationMatrix::G1 || which == PopulationMatrix::Sigma1) ? 1 : 2;

  // Weight at coordinate x on the chosen axis.
  auto weight = [&](double x) {
    if (!sigma) return axis == 1 ? spec.density1(x) : spec.density2(x);
    double total = 0.0;
    for (int k = 1; k <= K; ++k) {
      total += rule.integrate([&](double other) {
        const double x1 = axis == 1 ? x : other;
        const double x2 = axis == 1 ? other : x;
        return spec.noise_variance(x1, x2) * spec.joint_density(x1, x2);
      }, cfg.knot(k - 1), cfg.knot(k));
    }
    return total;
  };

  for (int k = 1; k <= K; ++k) {
    const double a = cfg.knot(k - 1), b = cfg.knot(k);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t t = 0; t < rule.nodes.size(); ++t) {
      const double x = mid + half * rule.nodes[t];
      const double wt = half * rule.weights[t] * weight(x);
      const int first = local_basis(cfg, x, local);
      for (int r = 0; r <= p; ++r)
        for (int s = 0; s <= p; ++s)
          g(first + r, first + s) += wt * local[static_cast<std::size_t>(r)] * local[static_cast<std::size_t>(s)];
    }
  }
  return g;
}

/// Empirical G_jn = n^{-1} Xj'Xj, dense.
inline Matrix empirical_G(const DesignMatrix& x) {
  return gram_banded(x).dense() / static_cast<double>(x.rows());
}

/// max |eigenvalue| of K (G_n - G).
inline double gram_deviation_eigenvalue(const DesignMatrix& x, const Matrix& population) {
  const double K = x.config().num_intervals();
  return max_abs_eigenvalue(K * (empirical_G(x) - population));
}

}  // namespace pspline
