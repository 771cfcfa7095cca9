#pragma once

// Monte Carlo studies of the backfitting estimator:
//   sim1      curve recovery against the true components
//   sim2      backfit component versus the marginal penalized estimator
//   sim3      standardized estimator pair at a fixed point (normality)
//   coverage  pointwise confidence-interval coverage

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <thread>
#include <vector>

#include "pspline/backfit.hpp"
#include "pspline/inference.hpp"
#include "pspline/rng.hpp"

namespace pspline {

struct ScenarioConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 42;
  std::function<double(double)> f1 = [](double x) { return std::sin(2.0 * std::numbers::pi * x); };
  std::function<double(double)> f2 = [](double x) { return 0.5 * std::cos(std::numbers::pi * x); };
  /// Errors are uniform on (-noise_half_width, noise_half_width).
  double noise_half_width = 0.5;
  /// Noise variance assumed by the standardization and intervals; defaults to
  /// the variance of the error law.
  std::optional<double> assumed_sigma2;
  /// Multiplies the assumed variance (misspecification studies).
  double sigma2_multiplier = 1.0;
  int degree = 3;
  int diff_order = 2;
  /// 0 selects round(2 n^{2/5}).
  int num_intervals = 0;
  /// Negative selects 2 n^{2/5} K^{-1/2}.
  double lambda = -1.0;
  int stages = 10;
  double eval_x1 = 0.5;
  double eval_x2 = 0.5;
  int replications = 1000;
  /// Draw covariates once (replication 0) instead of per replication.
  bool fixed_design = false;
  /// Fit the second component; false gives a univariate model in x1.
  bool additive = true;
  unsigned threads = 0;  ///< 0 = hardware concurrency

  int resolved_intervals() const { return num_intervals > 0 ? num_intervals : default_num_intervals(n); }
  double resolved_lambda() const { return lambda >= 0.0 ? lambda : default_lambda(n, resolved_intervals()); }
  double error_variance() const { return noise_half_width * noise_half_width / 3.0; }
  double sigma2() const { return sigma2_multiplier * assumed_sigma2.value_or(error_variance()); }
  SplineConfig spline() const { return SplineConfig(degree, resolved_intervals()); }

  void validate() const {
    if (n < 10) throw InputError("scenario needs n >= 10");
    if (replications < 1) throw InputError("scenario needs at least one replication");
    for (double x : {eval_x1, eval_x2})
      if (!(x > 0.0 && x <= 1.0)) throw InputError("evaluation point outside (0, 1]");
    if (!(noise_half_width >= 0.0)) throw InputError("noise half-width must be non-negative");
  }
};

struct SimDataset {
  Vector y;
  std::vector<double> x1;
  std::vector<double> x2;
};

namespace detail {
enum StreamPurpose : std::uint64_t { kCovariates = 1, kNoise = 2 };
}

/// Deterministic in (seed, replication): x_ij ~ U(0,1), eps ~ U(-a, a),
/// y = f1(x1) + f2(x2) + eps.
inline SimDataset generate_dataset(const ScenarioConfig& cfg, int replication) {
  cfg.validate();
  const std::uint64_t cov_rep = cfg.fixed_design ? 0 : static_cast<std::uint64_t>(replication);
  CounterRng cov(cfg.seed, cov_rep, detail::kCovariates);
  CounterRng noise(cfg.seed, static_cast<std::uint64_t>(replication), detail::kNoise);
  SimDataset d{Vector(static_cast<Eigen::Index>(cfg.n)), std::vector<double>(cfg.n), std::vector<double>(cfg.n)};
  for (std::size_t i = 0; i < cfg.n; ++i) {
    d.x1[i] = cov.uniform();
    d.x2[i] = cov.uniform();
  }
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double eps = cfg.noise_half_width > 0.0 ? noise.uniform(-cfg.noise_half_width, cfg.noise_half_width) : 0.0;
    d.y[static_cast<Eigen::Index>(i)] = cfg.f1(d.x1[i]) + (cfg.additive ? cfg.f2(d.x2[i]) : 0.0) + eps;
  }
  return d;
}

inline AdditiveDesign scenario_design(const ScenarioConfig& cfg, const SimDataset& data) {
  const double lam = cfg.resolved_lambda();
  std::optional<std::span<const double>> x2;
  if (cfg.additive) x2 = std::span<const double>(data.x2);
  return make_additive_design(data.y, cfg.spline(), data.x1, x2, lam, lam, cfg.diff_order);
}

/// 201 points g/200, g = 0..200, with 0 replaced by the smallest positive double.
inline std::vector<double> evaluation_grid(int points = 201) {
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = clamp_to_domain(static_cast<double>(i) / (points - 1));
  return g;
}

struct CurveRow {
  int component = 1;
  double x = 0.0;
  double first = 0.0;   ///< sim1: true value; sim2: backfit estimate
  double second = 0.0;  ///< sim1: backfit estimate; sim2: marginal estimate
};

struct CurveTable {
  std::vector<CurveRow> rows;
  double metric[2] = {0.0, 0.0};  ///< sim1: RMSE; sim2: sup difference
  int num_intervals = 0;
  double lambda = 0.0;
};

/// One dataset, one l-stage fit, both components tabulated on the grid.
inline CurveTable run_sim1(const ScenarioConfig& cfg, int grid_points = 201) {
  const SimDataset data = generate_dataset(cfg, 0);
  const AdditiveDesign design = scenario_design(cfg, data);
  const Backfitter fitter(design);
  const CoefficientPair b = fitter.run_stages(design.y, Vector::Zero(design.basis_size()), cfg.stages);
  const SplineConfig spline = cfg.spline();
  CurveTable table;
  table.num_intervals = spline.num_intervals();
  table.lambda = cfg.resolved_lambda();
  const auto grid = evaluation_grid(grid_points);
  for (int j = 1; j <= (cfg.additive ? 2 : 1); ++j) {
    double sq = 0.0;
    for (double x : grid) {
      const double truth = j == 1 ? cfg.f1(x) : cfg.f2(x);
      const double est = basis_vector(spline, x).dot(j == 1 ? b.b1 : b.b2);
      table.rows.push_back({j, x, truth, est});
      sq += (est - truth) * (est - truth);
    }
    table.metric[j - 1] = std::sqrt(sq / static_cast<double>(grid.size()));
  }
  return table;
}

/// Backfit component versus B(x)' Lambda_j^{-1} X_j' y on a shared grid.
inline CurveTable run_sim2(const ScenarioConfig& cfg, int grid_points = 201) {
  const SimDataset data = generate_dataset(cfg, 0);
  const AdditiveDesign design = scenario_design(cfg, data);
  const Backfitter fitter(design);
  const CoefficientPair b = fitter.run_stages(design.y, Vector::Zero(design.basis_size()), cfg.stages);
  const SplineConfig spline = cfg.spline();
  CurveTable table;
  table.num_intervals = spline.num_intervals();
  table.lambda = cfg.resolved_lambda();
  const auto grid = evaluation_grid(grid_points);
  for (int j = 1; j <= (cfg.additive ? 2 : 1); ++j) {
    const Vector marginal = univariate_coefficients(design.component(j), design.y, design.lambda(j), design.penalty);
    double sup = 0.0;
    for (double x : grid) {
      const Vector bx = basis_vector(spline, x);
      const double est = bx.dot(j == 1 ? b.b1 : b.b2);
      const double pen = bx.dot(marginal);
      table.rows.push_back({j, x, est, pen});
      sup = std::max(sup, std::abs(est - pen));
    }
    table.metric[j - 1] = sup;
  }
  return table;
}

/// Inverse square root of a symmetric 2x2 matrix by eigendecomposition;
/// empty when an eigenvalue is at or below `floor`.
inline std::optional<Eigen::Matrix2d> inverse_sqrt(const Eigen::Matrix2d& v, double floor = 1e-14) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(v);
  const Eigen::Vector2d ev = es.eigenvalues();
  if (!(ev.minCoeff() > floor)) return std::nullopt;
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::Matrix2d matrix_sqrt(const Eigen::Matrix2d& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(v);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

/// Everything one replication contributes to the Monte Carlo summaries.
struct ReplicationOutcome {
  int replication = 0;
  Eigen::Vector2d estimate = Eigen::Vector2d::Zero();
  Eigen::Vector2d deviation = Eigen::Vector2d::Zero();  ///< estimate - truth
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  ///< exact smoother covariance
  Eigen::Vector2d standardized = Eigen::Vector2d::Zero();
  bool accepted = false;
};

/// Fits `stages` sweeps, extracts the stage weights at the evaluation point
/// and standardizes the deviation by V^{-1/2}.
inline ReplicationOutcome replicate(const ScenarioConfig& cfg, int replication) {
  const SimDataset data = generate_dataset(cfg, replication);
  const AdditiveDesign design = scenario_design(cfg, data);
  const Backfitter fitter(design);
  const CoefficientPair b = fitter.run_stages(design.y, Vector::Zero(design.basis_size()), cfg.stages);
  const SplineConfig spline = cfg.spline();
  ReplicationOutcome out;
  out.replication = replication;
  out.estimate[0] = basis_vector(spline, cfg.eval_x1).dot(b.b1);
  out.estimate[1] = cfg.additive ? basis_vector(spline, cfg.eval_x2).dot(b.b2) : 0.0;
  out.deviation[0] = out.estimate[0] - cfg.f1(cfg.eval_x1);
  out.deviation[1] = cfg.additive ? out.estimate[1] - cfg.f2(cfg.eval_x2) : 0.0;
  const SmootherWeights w = smoother_weights(fitter, cfg.eval_x1, cfg.eval_x2, WeightSpec::stage(cfg.stages));
  out.covariance = exact_covariance(w, cfg.sigma2());
  if (const auto inv = inverse_sqrt(out.covariance)) {
    out.standardized = *inv * out.deviation;
    out.accepted = out.standardized.allFinite();
  }
  return out;
}

/// Runs `indices` through `task`, possibly on several threads. Results are
/// returned in the order of `indices` whatever the scheduling.
template <class Result, class Task>
std::vector<Result> parallel_map(const std::vector<int>& indices, unsigned threads, Task task) {
  std::vector<Result> results(indices.size());
  unsigned workers = threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(indices.size(), 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < indices.size(); ++i) results[i] = task(indices[i]);
    return results;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < indices.size(); i += workers) results[i] = task(indices[i]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

inline std::vector<ReplicationOutcome> run_replications(const ScenarioConfig& cfg, const std::vector<int>& indices) {
  cfg.validate();
  return parallel_map<ReplicationOutcome>(indices, cfg.threads, [&](int r) { return replicate(cfg, r); });
}

/// Kolmogorov–Smirnov distance between the empirical law of `values` and N(0, 1).
inline double ks_statistic(std::vector<double> values) {
  if (values.empty()) throw InputError("ks_statistic: empty sample");
  std::sort(values.begin(), values.end());
  const double m = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = normal_cdf(values[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / m - f, f - static_cast<double>(i) / m});
  }
  return d;
}

struct MonteCarloSummary {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double ks_stat[2] = {0.0, 0.0};
  double coverage[2] = {0.0, 0.0};
  double level = 0.95;
  int replications = 0;
  int rejected = 0;
  double runtime_seconds = 0.0;
};

struct StandardizedSample {
  Eigen::MatrixXd values;       ///< accepted rows, M x 2
  std::vector<int> replication;  ///< replication index of each row
};

/// Mean, covariance, KS distances and interval coverage from per-replication
/// outcomes, aggregated in replication order.
inline MonteCarloSummary summarize(std::vector<ReplicationOutcome> outcomes, double level) {
  std::sort(outcomes.begin(), outcomes.end(),
            [](const ReplicationOutcome& a, const ReplicationOutcome& b) { return a.replication < b.replication; });
  MonteCarloSummary s;
  s.level = level;
  s.replications = static_cast<int>(outcomes.size());
  const double z = normal_quantile(1.0 - 0.5 * (1.0 - level));
  std::vector<double> col[2];
  int covered[2] = {0, 0};
  for (const auto& o : outcomes) {
    for (int j = 0; j < 2; ++j)
      if (std::abs(o.deviation[j]) <= z * std::sqrt(o.covariance(j, j))) ++covered[j];
    if (!o.accepted) {
      ++s.rejected;
      continue;
    }
    col[0].push_back(o.standardized[0]);
    col[1].push_back(o.standardized[1]);
  }
  const double m = static_cast<double>(col[0].size());
  for (int j = 0; j < 2; ++j) s.coverage[j] = outcomes.empty() ? 0.0 : covered[j] / static_cast<double>(outcomes.size());
  if (col[0].empty()) return s;
  for (int j = 0; j < 2; ++j) {
    double sum = 0.0;
    for (double v : col[j]) sum += v;
    s.mean[j] = sum / m;
  }
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      double sum = 0.0;
      for (std::size_t i = 0; i < col[0].size(); ++i) sum += (col[a][i] - s.mean[a]) * (col[b][i] - s.mean[b]);
      s.covariance(a, b) = m > 1.0 ? sum / (m - 1.0) : 0.0;
    }
  for (int j = 0; j < 2; ++j) s.ks_stat[j] = ks_statistic(col[j]);
  return s;
}

struct Sim3Result {
  StandardizedSample sample;
  MonteCarloSummary summary;
  std::vector<ReplicationOutcome> outcomes;
};

/// Repeats data generation, l-stage fitting and standardization M times.
inline Sim3Result run_sim3(const ScenarioConfig& cfg, double level = 0.95) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<int> idx(static_cast<std::size_t>(cfg.replications));
  for (int r = 0; r < cfg.replications; ++r) idx[static_cast<std::size_t>(r)] = r;
  Sim3Result res;
  res.outcomes = run_replications(cfg, idx);
  res.summary = summarize(res.outcomes, level);
  std::vector<const ReplicationOutcome*> accepted;
  for (const auto& o : res.outcomes)
    if (o.accepted) accepted.push_back(&o);
  res.sample.values.resize(static_cast<Eigen::Index>(accepted.size()), 2);
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    res.sample.values.row(static_cast<Eigen::Index>(i)) = accepted[i]->standardized.transpose();
    res.sample.replication.push_back(accepted[i]->replication);
  }
  res.summary.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

/// Fraction of replications whose interval estimate +/- z sqrt(V) covers the
/// true component value at the evaluation point.
inline MonteCarloSummary coverage_experiment(const ScenarioConfig& cfg, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("coverage level must lie in (0, 1)");
  return run_sim3(cfg, level).summary;
}

struct DensityGrid {
  std::vector<double> xs;
  std::vector<double> ys;
  Eigen::MatrixXd density;  ///< density(i, j) at (xs[i], ys[j])
  double bandwidth[2] = {0.0, 0.0};
};

/// Product-Gaussian kernel density estimate on a square grid over
/// [lo, hi]^2. Bandwidths default to the normal-reference rule
/// h_d = M^{-1/6} sd_d.
inline DensityGrid kde2d(const Eigen::MatrixXd& sample, int resolution, double lo = -4.0, double hi = 4.0,
                         std::optional<double> fixed_bandwidth = std::nullopt) {
  if (sample.rows() < 2 || sample.cols() != 2) throw InputError("kde2d needs an M x 2 sample with M >= 2");
  if (resolution < 2) throw InputError("kde2d needs at least two grid points per axis");
  const double m = static_cast<double>(sample.rows());
  DensityGrid g;
  for (int d = 0; d < 2; ++d) {
    if (fixed_bandwidth) {
      g.bandwidth[d] = *fixed_bandwidth;
      continue;
    }
    const double mean = sample.col(d).mean();
    const double sd = std::sqrt((sample.col(d).array() - mean).square().sum() / (m - 1.0));
    if (!(sd > 0.0)) throw InputError("kde2d: sample has zero variance in a coordinate");
    g.bandwidth[d] = std::pow(m, -1.0 / 6.0) * sd;
  }
  if (!(g.bandwidth[0] > 0.0 && g.bandwidth[1] > 0.0)) throw InputError("kde2d: bandwidth must be positive");
  for (int i = 0; i < resolution; ++i) {
    const double t = lo + (hi - lo) * i / (resolution - 1);
    g.xs.push_back(t);
    g.ys.push_back(t);
  }
  // Separable kernel: density = (1/M) sum_r k_x(r, i) k_y(r, j).
  Eigen::MatrixXd kx(sample.rows(), resolution), ky(sample.rows(), resolution);
  const double c0 = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * g.bandwidth[0]);
  const double c1 = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * g.bandwidth[1]);
  for (Eigen::Index r = 0; r < sample.rows(); ++r)
    for (int i = 0; i < resolution; ++i) {
      const double u = (g.xs[static_cast<std::size_t>(i)] - sample(r, 0)) / g.bandwidth[0];
      const double v = (g.ys[static_cast<std::size_t>(i)] - sample(r, 1)) / g.bandwidth[1];
      kx(r, i) = c0 * std::exp(-0.5 * u * u);
      ky(r, i) = c1 * std::exp(-0.5 * v * v);
    }
  g.density = kx.transpose() * ky / m;
  return g;
}

/// The N2(0, I) density on the same grid layout as kde2d.
inline DensityGrid standard_normal_grid(int resolution, double lo = -4.0, double hi = 4.0) {
  DensityGrid g;
  for (int i = 0; i < resolution; ++i) {
    const double t = lo + (hi - lo) * i / (resolution - 1);
    g.xs.push_back(t);
    g.ys.push_back(t);
  }
  g.density.resize(resolution, resolution);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      const double x = g.xs[static_cast<std::size_t>(i)], y = g.ys[static_cast<std::size_t>(j)];
      g.density(i, j) = std::exp(-0.5 * (x * x + y * y)) / (2.0 * std::numbers::pi);
    }
  return g;
}

}  // namespace pspline
