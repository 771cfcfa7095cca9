#include <chrono>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "pspline/banded.hpp"
#include "pspline/penalty.hpp"
#include "pspline/symmetric_eigen.hpp"

using namespace pspline;

namespace {

Matrix random_symmetric(int q, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Matrix a(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = z(gen);
  return a;
}

BandedMatrix random_spd_band(int q, int w, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BandedMatrix a(q, w);
  for (int j = 0; j < q; ++j)
    for (int d = 1; d <= w && j + d < q; ++d) a.lower(j + d, j) = u(gen);
  for (int j = 0; j < q; ++j) a.lower(j, j) = 2.0 * w + 1.0;  // diagonally dominant
  return a;
}

}  // namespace

TEST(Difference, FirstOrder) {
  const Matrix d = difference_matrix(1, 3);
  Matrix ref(2, 3);
  ref << -1, 1, 0, 0, -1, 1;
  EXPECT_EQ(d, ref);
}

TEST(Difference, SecondOrder) {
  const Matrix d = difference_matrix(2, 5);
  Matrix ref(3, 5);
  ref << 1, -2, 1, 0, 0, 0, 1, -2, 1, 0, 0, 0, 1, -2, 1;
  EXPECT_EQ(d, ref);
  EXPECT_EQ((d * Vector::LinSpaced(5, 1, 5)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Difference, MatchesRepeatedDifferencing) {
  for (int m = 1; m <= 4; ++m)
    for (int q : {m + 1, m + 3, 20}) EXPECT_EQ(difference_matrix(m, q), oracle::difference(m, q)) << m << ' ' << q;
}

TEST(Difference, RejectsTooSmall) {
  EXPECT_THROW(difference_matrix(2, 2), InputError);
  EXPECT_THROW(difference_matrix(0, 4), InputError);
  EXPECT_THROW(penalty_matrix(3, 3), InputError);
}

TEST(Penalty, SecondOrderCorner) {
  const auto Q = penalty_matrix(2, 5);
  EXPECT_EQ(Q(0, 0), 1.0);
  EXPECT_EQ(Q(0, 1), -2.0);
  EXPECT_EQ(Q(1, 0), -2.0);
  EXPECT_EQ(Q.multiply(Vector::Ones(5)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(Q.dense(), oracle::penalty(2, 5));
}

TEST(Penalty, FirstOrderSpectrum) {
  const auto Q = penalty_matrix(1, 4);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(Q.dense());
  const double r2 = std::sqrt(2.0);
  const double ref[] = {0.0, 2.0 - r2, 2.0, 2.0 + r2};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(es.eigenvalues()[i], ref[i], 1e-12);
  const auto mine = jacobi_eigen(Q.dense());
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(mine.values[i], ref[i], 1e-12);
}

TEST(Penalty, AnnihilatesLowDegreeSequences) {
  for (int m = 1; m <= 3; ++m) {
    const int q = 12;
    const auto Q = penalty_matrix(m, q);
    for (int deg = 0; deg < m; ++deg) {
      Vector v(q);
      for (int i = 0; i < q; ++i) v[i] = std::pow(i + 1.0, deg);
      EXPECT_LE(Q.multiply(v).cwiseAbs().maxCoeff(), 1e-9) << m << ' ' << deg;
    }
    Vector v(q);
    for (int i = 0; i < q; ++i) v[i] = std::pow(i + 1.0, m);
    EXPECT_GT(Q.multiply(v).cwiseAbs().maxCoeff(), 0.5);
  }
}

TEST(Penalty, QuadraticFormIsSquaredDifferenceNorm) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> z;
  for (int m = 1; m <= 3; ++m) {
    const auto Q = penalty_matrix(m, 15);
    const Matrix D = difference_matrix(m, 15);
    for (int r = 0; r < 20; ++r) {
      Vector b(15);
      for (auto& v : b) v = z(gen);
      const double form = b.dot(Q.multiply(b));
      EXPECT_NEAR(form, (D * b).squaredNorm(), 1e-10 * (1.0 + form));
      EXPECT_GE(form, 0.0);
    }
  }
}

TEST(Penalty, BandwidthAndNullity) {
  for (int m = 1; m <= 3; ++m)
    for (int q : {m + 2, 10, 40}) {
      const Matrix Q = penalty_matrix(m, q).dense();
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j)
          if (std::abs(i - j) > m) EXPECT_EQ(Q(i, j), 0.0);
      const Eigen::SelfAdjointEigenSolver<Matrix> es(Q);
      int zeros = 0;
      for (int i = 0; i < q; ++i) zeros += es.eigenvalues()[i] < 1e-10 ? 1 : 0;
      EXPECT_EQ(zeros, m) << m << ' ' << q;
    }
}

TEST(Banded, DenseRoundTripIsExact) {
  const BandedMatrix a = random_spd_band(9, 2, 4);
  const Matrix d = a.dense();
  EXPECT_EQ(BandedMatrix::from_dense(d, 2).dense(), d);
  EXPECT_EQ(d, d.transpose());
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      if (std::abs(i - j) > 2) EXPECT_EQ(d(i, j), 0.0);
  const Vector x = Vector::LinSpaced(9, -1.0, 1.0);
  EXPECT_LE((a.multiply(x) - d * x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Banded, GramOfIndicatorBasisIsDiagonalCounts) {
  const std::vector<double> pts{0.1, 0.2, 0.3, 0.6, 0.9, 0.95, 1.0};
  const BandedMatrix g = gram_banded(design_matrix(make_knots(0, 3), pts));
  EXPECT_EQ(g.bandwidth(), 0);
  EXPECT_EQ(g(0, 0), 3.0);
  EXPECT_EQ(g(1, 1), 1.0);
  EXPECT_EQ(g(2, 2), 3.0);
}

TEST(Banded, GramMatchesDenseProduct) {
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto pts = oracle::uniform_points(50, seed);
    const auto X = design_matrix(make_knots(3, 8), pts);
    const BandedMatrix g = gram_banded(X);
    EXPECT_EQ(g.bandwidth(), 3);
    const Matrix ref = oracle::design(3, 8, pts);
    EXPECT_LE((g.dense() - ref.transpose() * ref).cwiseAbs().maxCoeff(), 1e-13);
  }
  const auto X = design_matrix(make_knots(3, 5), oracle::uniform_points(400, 9));
  const BandedMatrix g = gram_banded(X);
  for (int i = 0; i < g.size(); ++i) EXPECT_GT(g(i, i), 0.0);
}

TEST(Banded, PenalizedGram) {
  const auto X = design_matrix(make_knots(3, 10), oracle::uniform_points(200, 2));
  const BandedMatrix G = gram_banded(X);
  const auto Q = penalty_matrix(2, X.cols());
  EXPECT_EQ(penalized_gram(G, 0.0, Q).dense(), G.dense());
  const BandedMatrix L = penalized_gram(G, 1.0, Q);
  EXPECT_EQ(L.bandwidth(), 3);
  EXPECT_LE((L.dense() - G.dense() - Q.dense()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(penalized_gram(G, 2.0, penalty_matrix(4, X.cols())).bandwidth(), 4);
  EXPECT_THROW(penalized_gram(G, 1.0, penalty_matrix(2, X.cols() + 1)), InputError);
  EXPECT_THROW(penalized_gram(G, -1.0, Q), InputError);
}

TEST(Banded, HeavyPenaltyApproachesNullspaceRestriction) {
  // For Lambda = G + lambda Q and N an orthonormal basis of null(Q):
  // lambda_min(Lambda) <= lambda_min(N'GN), with equality as lambda grows.
  const auto X = design_matrix(make_knots(3, 10), oracle::uniform_points(200, 8));
  const Matrix G = gram_banded(X).dense();
  const auto Q = penalty_matrix(2, X.cols());
  const int q = X.cols();
  Matrix N(q, 2);
  for (int i = 0; i < q; ++i) {
    N(i, 0) = 1.0;
    N(i, 1) = i;
  }
  const Matrix Nq = N.householderQr().householderQ() * Matrix::Identity(q, 2);
  const double restricted = Eigen::SelfAdjointEigenSolver<Matrix>(Nq.transpose() * G * Nq).eigenvalues()[0];
  double previous = 0.0;
  for (double lambda : {1e2, 1e4, 1e6}) {
    const double mine = min_eigenvalue(penalized_gram(gram_banded(X), lambda, Q).dense());
    EXPECT_LE(mine, restricted * (1.0 + 1e-12));
    EXPECT_GT(mine, previous);
    previous = mine;
  }
  EXPECT_GT(previous, 0.999 * restricted);
}

TEST(Cholesky, IdentityAndErrors) {
  BandedMatrix eye(6, 1);
  for (int i = 0; i < 6; ++i) eye.lower(i, i) = 1.0;
  const Vector b = Vector::LinSpaced(6, 1.0, 6.0);
  EXPECT_EQ(band_cholesky_solve(eye, b), b);
  EXPECT_THROW(band_cholesky_solve(penalty_matrix(2, 5).banded(), Vector(b.head(5))), NotPositiveDefinite);
  BandedMatrix neg(3, 0);
  neg.lower(0, 0) = 1.0;
  neg.lower(1, 1) = -1.0;
  neg.lower(2, 2) = 1.0;
  try {
    BandCholesky bad(neg);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite& e) {
    EXPECT_EQ(e.pivot(), 1u);
  }
}

TEST(Cholesky, LaplacianPlusIdentityMatchesLu) {
  const int q = 30;
  BandedMatrix a(q, 1);
  for (int i = 0; i < q; ++i) {
    a.lower(i, i) = 3.0;
    if (i + 1 < q) a.lower(i + 1, i) = -1.0;
  }
  Vector e1 = Vector::Zero(q);
  e1[0] = 1.0;
  const Vector ref = a.dense().partialPivLu().solve(e1);
  EXPECT_LE((band_cholesky_solve(a, e1) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cholesky, RandomSpdAgreesWithDense) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z;
  for (int w : {0, 1, 3, 6})
    for (int q : {1, 7, 50}) {
      const BandedMatrix a = random_spd_band(q, w, static_cast<unsigned>(q * 10 + w));
      Matrix rhs(q, 3);
      for (auto& v : rhs.reshaped()) v = z(gen);
      const Matrix x = band_cholesky_solve(a, rhs);
      const Matrix ref = a.dense().llt().solve(rhs);
      EXPECT_LE((x - ref).norm(), 1e-10 * ref.norm());
      EXPECT_LE((a.dense() * x - rhs).norm(), 1e-10 * rhs.norm());
      const BandCholesky f(a);
      const Matrix L = f.lower().dense().triangularView<Eigen::Lower>();
      EXPECT_LE((L * L.transpose() - a.dense()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Cholesky, FactorCostGrowsLinearly) {
  auto time_factor = [](int q) {
    const BandedMatrix a = random_spd_band(q, 4, 1);
    double best = 1e9;
    for (int r = 0; r < 9; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const BandCholesky f(a);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      best = std::min(best, dt + 0.0 * f.size());
    }
    return best;
  };
  const double t1 = time_factor(200000), t2 = time_factor(400000);
  EXPECT_LT(t2, 5.0 * t1) << t1 << " vs " << t2;  // loose: about 2x expected
}

TEST(Eigen, MinEigenvalueExamples) {
  EXPECT_NEAR(min_eigenvalue(penalty_matrix(2, 5).dense()), 0.0, 1e-10);
  EXPECT_NEAR(min_eigenvalue(Matrix::Identity(7, 7)), 1.0, 1e-14);
  const auto X = design_matrix(make_knots(3, 12), oracle::uniform_points(200, 3));
  const BandedMatrix L = penalized_gram(gram_banded(X), 1.0, penalty_matrix(2, X.cols()));
  const double mine = min_eigenvalue(L.dense());
  EXPECT_GT(mine, 0.0);
  EXPECT_NO_THROW(BandCholesky{L});
  EXPECT_NEAR(mine, Eigen::SelfAdjointEigenSolver<Matrix>(L.dense()).eigenvalues()[0], 1e-8 * mine);
}

TEST(Eigen, JacobiMatchesEigenOnRandomMatrices) {
  for (int q : {1, 2, 5, 30, 80}) {
    const Matrix a = random_symmetric(q, static_cast<unsigned>(q));
    const auto mine = jacobi_eigen(a);
    const Eigen::SelfAdjointEigenSolver<Matrix> ref(a);
    const double scale = ref.eigenvalues().cwiseAbs().maxCoeff();
    for (int i = 0; i < q; ++i) EXPECT_NEAR(mine.values[i], ref.eigenvalues()[i], 1e-10 * scale);
    EXPECT_LE((a * mine.vectors - mine.vectors * mine.values.asDiagonal()).norm(), 1e-9 * scale * q);
    EXPECT_NEAR(max_abs_eigenvalue(a), scale, 1e-10 * scale);
  }
}
