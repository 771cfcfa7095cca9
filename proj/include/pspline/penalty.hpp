#pragma once

// Difference penalties: Q_m = D_m' D_m, where D_m is the (q-m) x q forward
// difference operator of order m. Q_m has bandwidth m and annihilates every
// coefficient sequence that is a polynomial of degree < m in the index.

#include <string>

#include "pspline/banded.hpp"

namespace pspline {

/// Row i applies the m-th forward difference starting at column i.
inline Matrix difference_matrix(int order, int size) {
  if (order < 1) throw InputError("difference order must be >= 1");
  if (size <= order)
    throw InputError("difference matrix needs size > order (got size " + std::to_string(size) +
                     ", order " + std::to_string(order) + ")");
  // Signed binomial coefficients (-1)^(m-r) C(m, r).
  std::vector<double> coeff(static_cast<std::size_t>(order + 1));
  double binom = 1.0;
  for (int r = 0; r <= order; ++r) {
    coeff[static_cast<std::size_t>(r)] = ((order - r) % 2 == 0 ? 1.0 : -1.0) * binom;
    binom = binom * (order - r) / (r + 1);
  }
  Matrix d = Matrix::Zero(size - order, size);
  for (int i = 0; i < size - order; ++i)
    for (int r = 0; r <= order; ++r) d(i, i + r) = coeff[static_cast<std::size_t>(r)];
  return d;
}

class PenaltyMatrix {
 public:
  PenaltyMatrix(int order, int size) : order_(order), band_(size, order) {
    const Matrix d = difference_matrix(order, size);
    // Q = D'D restricted to its band; the product is exactly banded.
    for (int j = 0; j < size; ++j)
      for (int i = j; i <= std::min(size - 1, j + order); ++i) {
        double s = 0.0;
        for (int r = std::max(0, i - order); r <= std::min(j, size - order - 1); ++r) s += d(r, i) * d(r, j);
        band_.lower(i, j) = s;
      }
  }

  int order() const noexcept { return order_; }
  int size() const noexcept { return band_.size(); }
  const BandedMatrix& banded() const noexcept { return band_; }
  double operator()(int i, int j) const { return band_(i, j); }
  Matrix dense() const { return band_.dense(); }
  Vector multiply(const Vector& b) const { return band_.multiply(b); }

 private:
  int order_;
  BandedMatrix band_;
};

inline PenaltyMatrix penalty_matrix(int order, int size) { return PenaltyMatrix(order, size); }

/// Lambda = G + lambda Q with bandwidth max(p, m).
inline BandedMatrix penalized_gram(const BandedMatrix& gram, double lambda, const PenaltyMatrix& penalty) {
  if (gram.size() != penalty.size())
    throw InputError("penalized_gram: Gram size " + std::to_string(gram.size()) +
                     " does not match penalty size " + std::to_string(penalty.size()));
  if (!(lambda >= 0.0)) throw InputError("penalized_gram: lambda must be non-negative");
  if (lambda == 0.0) return gram;
  BandedMatrix out = gram.widened(penalty.order());
  const BandedMatrix& q = penalty.banded();
  for (int d = 0; d <= q.bandwidth(); ++d)
    for (int j = 0; j + d < out.size(); ++j) out.lower(j + d, j) += lambda * q(j + d, j);
  return out;
}

}  // namespace pspline
