#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace pspline {

/// Gauss–Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int order) : nodes(order), weights(order) {
    if (order < 1) throw std::invalid_argument("GaussLegendre: order must be >= 1");
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
      // Tricomi initial guess, then Newton on P_order.
      double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= order; ++k) {
          const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = order * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      // Recompute the derivative at the converged node.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes[i] = -x;
      nodes[order - 1 - i] = x;
      weights[i] = w;
      weights[order - 1 - i] = w;
    }
    if (order % 2 == 1) nodes[order / 2] = 0.0;
  }

  /// Integrates f over [a, b].
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(mid + half * nodes[i]);
    return half * sum;
  }
};

}  // namespace pspline
