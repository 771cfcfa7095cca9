#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "pspline/basis.hpp"
#include "pspline/quadrature.hpp"

using namespace pspline;

TEST(Knots, CubicFiveIntervals) {
  const auto cfg = make_knots(3, 5);
  ASSERT_EQ(cfg.knots().size(), 12u);  // K + 2p + 1
  EXPECT_NEAR(cfg.knots().front(), -0.6, 1e-15);
  EXPECT_NEAR(cfg.knots()[1], -0.4, 1e-15);
  EXPECT_NEAR(cfg.knots()[10], 1.4, 1e-15);
  EXPECT_NEAR(cfg.knots().back(), 1.6, 1e-15);
}

TEST(Knots, PiecewiseConstantHasNoExtension) {
  const auto cfg = make_knots(0, 2);
  ASSERT_EQ(cfg.knots().size(), 3u);
  EXPECT_EQ(cfg.knots()[0], 0.0);
  EXPECT_EQ(cfg.knots()[1], 0.5);
  EXPECT_EQ(cfg.knots()[2], 1.0);
}

TEST(Knots, QuadraticTenIntervals) {
  const auto cfg = make_knots(2, 10);
  ASSERT_EQ(cfg.knots().size(), 15u);
  EXPECT_EQ(cfg.knot(0), 0.0);
  EXPECT_EQ(cfg.knot(10), 1.0);
  for (std::size_t i = 1; i < cfg.knots().size(); ++i)
    EXPECT_NEAR(cfg.knots()[i] - cfg.knots()[i - 1], 0.1, 1e-14);
  EXPECT_EQ(cfg.num_basis(), 12);
  EXPECT_EQ(cfg.first_index(), -1);
  EXPECT_EQ(cfg.last_index(), 10);
}

TEST(Knots, RejectsBadArguments) {
  EXPECT_THROW(make_knots(3, 0), InputError);
  EXPECT_THROW(make_knots(-1, 4), InputError);
}

TEST(Eval, DegreeZeroIsIndicatorOfHalfOpenInterval) {
  const auto cfg = make_knots(0, 4);
  for (int k = 1; k <= 4; ++k) {
    const double lo = (k - 1) / 4.0, hi = k / 4.0;
    EXPECT_EQ(bspline_eval(cfg, k, 0.5 * (lo + hi)), 1.0);
    EXPECT_EQ(bspline_eval(cfg, k, hi), 1.0);
    if (k > 1) EXPECT_EQ(bspline_eval(cfg, k, lo), 0.0);
  }
}

TEST(Eval, HatFunctionPeak) {
  const auto cfg = make_knots(1, 4);
  EXPECT_DOUBLE_EQ(bspline_eval(cfg, 0, cfg.knot(0) + 1e-300), 1.0);
  EXPECT_DOUBLE_EQ(bspline_eval(cfg, 1, 0.25), 1.0);
  EXPECT_DOUBLE_EQ(bspline_eval(cfg, 1, 0.125), 0.5);
}

TEST(Eval, CubicValuesAtKnots) {
  const auto cfg = make_knots(3, 8);
  for (int k = 1; k + 3 <= 8; ++k) {
    EXPECT_NEAR(bspline_eval(cfg, k, cfg.knot(k + 1)), 2.0 / 3.0, 1e-12) << k;
    EXPECT_NEAR(bspline_eval(cfg, k, cfg.knot(k)), 1.0 / 6.0, 1e-12) << k;
    EXPECT_NEAR(bspline_eval(cfg, k, cfg.knot(k + 2)), 1.0 / 6.0, 1e-12) << k;
  }
}

TEST(Eval, RejectsIndexOutOfRange) {
  const auto cfg = make_knots(3, 5);
  EXPECT_THROW(bspline_eval(cfg, -3, 0.5), InputError);
  EXPECT_THROW(bspline_eval(cfg, 6, 0.5), InputError);
}

TEST(Eval, MatchesTableOracle) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int p = 0; p <= 4; ++p)
    for (int K : {1, 2, 3, 7, 16, 40}) {
      const auto cfg = make_knots(p, K);
      for (int r = 0; r < 200; ++r) {
        double x = u(gen);
        if (r < 5) x = static_cast<double>(r + 1) / 5.0;  // include knots
        if (x == 0.0) continue;
        const auto ref = oracle::bspline_table(p, K, x);
        const Vector v = basis_vector(cfg, x);
        for (int c = 0; c < cfg.num_basis(); ++c) {
          EXPECT_NEAR(v[c], ref[static_cast<std::size_t>(c)], 1e-13) << "p=" << p << " K=" << K << " x=" << x;
          EXPECT_NEAR(bspline_eval(cfg, cfg.index_of(c), x), ref[static_cast<std::size_t>(c)], 1e-13);
        }
      }
    }
}

TEST(Eval, LocalSupportAndNonNegativity) {
  const auto cfg = make_knots(3, 6);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < 2000; ++r) {
    const double x = u(gen);
    if (x == 0.0) continue;
    for (int k = cfg.first_index(); k <= cfg.last_index(); ++k) {
      const double v = bspline_eval(cfg, k, x);
      const bool inside = cfg.knot(k - 1) < x && x <= cfg.knot(k + 3);
      EXPECT_GE(v, 0.0);
      if (!inside) EXPECT_EQ(v, 0.0);
      else EXPECT_GT(v, 0.0);
    }
  }
}

TEST(Design, IndicatorBasis) {
  const std::vector<double> pts{0.25, 0.75};
  const auto X = design_matrix(make_knots(0, 2), pts).dense();
  EXPECT_EQ(X(0, 0), 1.0);
  EXPECT_EQ(X(0, 1), 0.0);
  EXPECT_EQ(X(1, 0), 0.0);
  EXPECT_EQ(X(1, 1), 1.0);
}

TEST(Design, RowsSumToOne) {
  const auto pts = oracle::uniform_points(100, 11);
  const auto X = design_matrix(make_knots(3, 10), pts);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double s = 0.0;
    for (double v : X.row_values(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Design, LinearBasisAtKnot) {
  const std::vector<double> pts{1.0 / 3.0, 2.0 / 3.0, 1.0};
  const auto X = design_matrix(make_knots(1, 3), pts).dense();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int ones = 0;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      if (X(i, c) == 1.0) ++ones;
      else EXPECT_NEAR(X(i, c), 0.0, 1e-15);
    }
    EXPECT_EQ(ones, 1);
  }
}

TEST(Design, RowStructureMatchesDenseOracle) {
  const auto pts = oracle::uniform_points(300, 5);
  for (int p = 0; p <= 3; ++p) {
    const auto X = design_matrix(make_knots(p, 9), pts);
    const auto ref = oracle::design(p, 9, pts);
    EXPECT_LE((X.dense() - ref).cwiseAbs().maxCoeff(), 1e-13);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      EXPECT_EQ(static_cast<int>(X.row_values(i).size()), p + 1);
      for (double v : X.row_values(i)) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    }
  }
}

TEST(Design, ProductsAgreeWithDense) {
  const auto pts = oracle::uniform_points(80, 9);
  const auto X = design_matrix(make_knots(3, 7), pts);
  const Matrix D = X.dense();
  const Vector b = Vector::LinSpaced(X.cols(), -1.0, 2.0);
  const Vector v = Vector::LinSpaced(80, 0.5, -0.5);
  EXPECT_LE((X.multiply(b) - D * b).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((X.transpose_multiply(v) - D.transpose() * v).cwiseAbs().maxCoeff(), 1e-13);
  const auto pts2 = oracle::uniform_points(80, 10);
  const auto X2 = design_matrix(make_knots(3, 7), pts2);
  EXPECT_LE((X.cross_gram(X2) - D.transpose() * X2.dense()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Design, RejectsPointsOutsideDomain) {
  const auto cfg = make_knots(3, 4);
  EXPECT_THROW(design_matrix(cfg, std::vector<double>{0.5, 0.0}), InputError);
  EXPECT_THROW(design_matrix(cfg, std::vector<double>{1.5}), InputError);
  EXPECT_THROW(design_matrix(cfg, std::vector<double>{std::nan("")}), InputError);
  EXPECT_NO_THROW(design_matrix(cfg, std::vector<double>{clamp_to_domain(0.0), 1.0}));
}

TEST(Integral, InteriorCubicIsOneOverK) {
  const auto cfg = make_knots(3, 20);
  for (int k = 1; k <= 17; ++k) EXPECT_NEAR(basis_integral(cfg, k), 1.0 / 20.0, 1e-12);
}

TEST(Integral, IndicatorWidth) {
  const auto cfg = make_knots(0, 6);
  for (int k = 1; k <= 6; ++k) EXPECT_NEAR(basis_integral(cfg, k), 1.0 / 6.0, 1e-14);
}

TEST(Integral, BoundaryIsTruncated) {
  const auto cfg = make_knots(3, 10);
  EXPECT_LT(basis_integral(cfg, -2), 0.1);
  EXPECT_GT(basis_integral(cfg, -2), 0.0);
  // Midpoint-rule oracle on the table evaluator.
  for (int k : {-2, -1, 0, 9, 10}) {
    const int m = 200000;
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += oracle::bspline_table(3, 10, (i + 0.5) / m)[static_cast<std::size_t>(cfg.column_of(k))];
    EXPECT_NEAR(basis_integral(cfg, k), s / m, 1e-9) << k;
  }
  EXPECT_THROW(basis_integral(cfg, 11), InputError);
}

TEST(Quadrature, ExactForPolynomials) {
  const GaussLegendre gl(4);
  EXPECT_NEAR(gl.integrate([](double x) { return std::pow(x, 7); }, 0.0, 2.0), 256.0 / 8.0, 1e-12);
  EXPECT_NEAR(gl.integrate([](double) { return 1.0; }, -1.0, 3.0), 4.0, 1e-14);
}

TEST(Domain, ClampMovesOnlyZero) {
  EXPECT_GT(clamp_to_domain(0.0), 0.0);
  EXPECT_EQ(clamp_to_domain(0.3), 0.3);
  const auto cfg = make_knots(3, 4);
  EXPECT_NEAR(basis_vector(cfg, clamp_to_domain(0.0)).sum(), 1.0, 1e-12);
}
