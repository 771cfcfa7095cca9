#pragma once

// Command implementations behind the `pspline` executable. Each returns the
// process exit code: 0 success, 1 input error, 2 non-convergence.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pspline/backfit.hpp"
#include "pspline/inference.hpp"
#include "pspline/io.hpp"
#include "pspline/report.hpp"
#include "pspline/sim.hpp"
#include "pspline/svg.hpp"

namespace pspline {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitNonConvergence = 2 };

struct FitOptions {
  FitConfig config;
  std::string out_dir = ".";
  std::optional<std::string> svg;
  bool timings = false;
};

struct FitOutcome {
  RunReport report;
  int exit_code = kExitOk;
};

/// Fits the additive model to a dataset already in memory.
inline FitOutcome fit_dataset(const Dataset& data, const FitConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  FitOutcome out;
  RunReport& rep = out.report;
  rep.config = cfg;
  rep.preprocessing = data.record;
  rep.warnings = data.warnings;
  rep.n = data.n();

  const auto y = data.y();
  const auto x1 = data.x1();
  const auto x2 = data.x2();
  const int K = cfg.num_intervals > 0 ? cfg.num_intervals : default_num_intervals(rep.n);
  rep.num_intervals = K;
  rep.lambda1 = cfg.lambda1 >= 0.0 ? cfg.lambda1 : default_lambda(rep.n, K);
  rep.lambda2 = cfg.lambda2 >= 0.0 ? cfg.lambda2 : default_lambda(rep.n, K);
  const SplineConfig spline(cfg.degree, K);
  const AdditiveDesign design = make_additive_design(Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size())),
                                                     spline, x1, std::span<const double>(x2), rep.lambda1, rep.lambda2,
                                                     cfg.diff_order);

  const Backfitter fitter(design, SingularPolicy::MinimumNorm);
  if (fitter.singular())
    rep.warnings.push_back(
        "a penalized Gram matrix is singular (basis functions without data and no penalty); "
        "each stage uses the minimum-norm solution");
  const BackfitResult fit = fitter.run(design.y, Vector::Zero(design.basis_size()), {cfg.tol, cfg.max_stages, false});
  rep.b1.assign(fit.b1.data(), fit.b1.data() + fit.b1.size());
  rep.b2.assign(fit.b2.data(), fit.b2.data() + fit.b2.size());
  rep.convergence = {fit.converged, fit.stages, fit.residual_norm};
  if (!fit.converged) {
    rep.warnings.push_back("backfitting did not converge within " + std::to_string(cfg.max_stages) + " stages");
    out.exit_code = kExitNonConvergence;
  }
  rep.sigma2_hat = sigma2_hat(design, fit);
  const auto t1 = clock::now();

  const HessianReport h = hessian_check(design);
  rep.hessian = {h.is_pd, h.min_eig, h.max_eig, h.identifiable_min_eig};
  if (!h.is_pd)
    rep.warnings.push_back(
        "joint system is singular: the components are identified only up to a constant shift; "
        "centered components are reported");

  // Limit weights come from the gauge-fixed stacked system; when that is
  // singular too, fall back to the weights of the stages actually run.
  WeightSpec spec = WeightSpec::limit();
  try {
    StackedSystem probe(design);
  } catch (const SingularSystem&) {
    spec = WeightSpec::stage(std::max(fit.stages, 1));
    rep.warnings.push_back("stacked system has no identifiable solution; interval weights use the stage recursion");
  }
  for (int j = 1; j <= 2; ++j)
    for (int g = 0; g < cfg.grid; ++g) {
      const double x = clamp_to_domain(static_cast<double>(g) / (cfg.grid - 1));
      const Vector w = centered_weights(fitter, j, x, spec);
      const double var = rep.sigma2_hat * w.squaredNorm();
      const IntervalEstimate ci = confidence_interval(center_component(fit, design, j, x), var, cfg.level);
      rep.grid.push_back({j, x, ci.estimate, ci.variance, ci.lower, ci.upper});
    }
  const auto t2 = clock::now();
  rep.timings = Timings{0.0, std::chrono::duration<double>(t1 - t0).count(),
                        std::chrono::duration<double>(t2 - t1).count()};
  return out;
}

inline void validate(const FitConfig& c) {
  if (c.degree < 0) throw InputError("--degree must be >= 0");
  if (c.diff_order < 1) throw InputError("--diff-order must be >= 1");
  if (c.num_intervals < 0) throw InputError("--kn must be >= 1 (or 0 for auto)");
  if (!(c.tol > 0.0)) throw InputError("--tol must be > 0");
  if (c.max_stages < 1) throw InputError("--max-stages must be >= 1");
  if (!(c.level > 0.0 && c.level < 1.0)) throw InputError("--level must lie in (0, 1)");
  if (c.grid < 2) throw InputError("--grid must be >= 2");
}

inline Table grid_table(const RunReport& r) {
  Table t;
  t.columns = {"component", "x", "estimate", "lower", "upper"};
  for (const auto& g : r.grid) t.rows.push_back({static_cast<double>(g.component), g.x, g.estimate, g.lower, g.upper});
  return t;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw InputError("output directory '" + dir + "' is not writable");
}

inline int cmd_fit(const FitOptions& opts, std::ostream& log = std::cerr) {
  try {
    validate(opts.config);
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset data = load_csv(opts.config.data, opts.config.y, opts.config.x1, opts.config.x2, opts.config.preprocess);
    const double load = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    FitOutcome out = fit_dataset(data, opts.config);
    if (opts.timings)
      out.report.timings->load_seconds = load;
    else
      out.report.timings.reset();

    ensure_dir(opts.out_dir);
    const std::filesystem::path dir(opts.out_dir);
    write_json((dir / "fit_report.json").string(), out.report);
    write_table((dir / "fit_grid.csv").string(), grid_table(out.report));
    if (opts.svg) {
      std::vector<Curve> curves;
      const char* colors[] = {"#1f77b4", "#d62728"};
      for (int j = 1; j <= 2; ++j) {
        Curve est{"f" + std::to_string(j), {}, {}, colors[j - 1], false};
        Curve lo{"f" + std::to_string(j) + " lower", {}, {}, colors[j - 1], true};
        Curve hi{"f" + std::to_string(j) + " upper", {}, {}, colors[j - 1], true};
        for (const auto& g : out.report.grid) {
          if (g.component != j) continue;
          for (auto* c : {&est, &lo, &hi}) c->xs.push_back(g.x);
          est.ys.push_back(g.estimate);
          lo.ys.push_back(g.lower);
          hi.ys.push_back(g.upper);
        }
        curves.insert(curves.end(), {est, lo, hi});
      }
      write_svg(curves, *opts.svg, "centered components");
    }
    for (const auto& w : out.report.warnings) log << "warning: " << w << '\n';
    log << "fit: n=" << out.report.n << " K=" << out.report.num_intervals << " stages=" << out.report.convergence.stages
        << (out.report.convergence.converged ? " converged" : " NOT converged")
        << " sigma2_hat=" << format_double(out.report.sigma2_hat) << '\n';
    return out.exit_code;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

struct SimulateOptions {
  std::string scenario;
  std::size_t n = 1000;
  int reps = 1000;
  std::uint64_t seed = 42;
  std::string out_dir = ".";
  double level = 0.95;
  int grid = 201;
  int stages = 10;
  int num_intervals = 0;
  double lambda = -1.0;
  std::optional<double> sigma2;
  bool fixed_design = false;
  unsigned threads = 0;
  std::optional<std::string> svg;
  bool timings = false;
};

inline std::string sim_stem(const SimulateOptions& o) {
  return o.scenario + "_n" + std::to_string(o.n) + "_seed" + std::to_string(o.seed);
}

inline nlohmann::json summary_json(const MonteCarloSummary& s, bool timings) {
  nlohmann::json j{{"mean", {s.mean[0], s.mean[1]}},
                   {"covariance", {{s.covariance(0, 0), s.covariance(0, 1)}, {s.covariance(1, 0), s.covariance(1, 1)}}},
                   {"ks_statistic", {s.ks_stat[0], s.ks_stat[1]}},
                   {"coverage", {s.coverage[0], s.coverage[1]}},
                   {"level", s.level},
                   {"replications", s.replications},
                   {"rejected", s.rejected}};
  if (timings) j["runtime_seconds"] = s.runtime_seconds;
  return j;
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& log = std::cout) {
  try {
    if (o.scenario != "sim1" && o.scenario != "sim2" && o.scenario != "sim3" && o.scenario != "coverage")
      throw InputError("unknown scenario '" + o.scenario + "' (expected sim1, sim2, sim3 or coverage)");
    if (o.grid < 2) throw InputError("--grid must be >= 2");
    ScenarioConfig cfg;
    cfg.n = o.n;
    cfg.seed = o.seed;
    cfg.replications = o.reps;
    cfg.stages = o.stages;
    cfg.num_intervals = o.num_intervals;
    cfg.lambda = o.lambda;
    cfg.assumed_sigma2 = o.sigma2;
    cfg.fixed_design = o.fixed_design;
    cfg.threads = o.threads;
    cfg.validate();
    ensure_dir(o.out_dir);
    const std::filesystem::path dir(o.out_dir);
    const std::string stem = sim_stem(o);
    nlohmann::json meta{{"scenario", o.scenario},
                        {"n", o.n},
                        {"seed", o.seed},
                        {"num_intervals", cfg.resolved_intervals()},
                        {"lambda", cfg.resolved_lambda()},
                        {"stages", cfg.stages}};

    if (o.scenario == "sim1" || o.scenario == "sim2") {
      const bool first = o.scenario == "sim1";
      const CurveTable table = first ? run_sim1(cfg, o.grid) : run_sim2(cfg, o.grid);
      Table t;
      t.columns = first ? std::vector<std::string>{"component", "x", "truth", "estimate"}
                        : std::vector<std::string>{"component", "x", "backfit", "marginal"};
      for (const auto& r : table.rows) t.rows.push_back({static_cast<double>(r.component), r.x, r.first, r.second});
      write_table((dir / (stem + ".csv")).string(), t);
      meta[first ? "rmse" : "sup_difference"] = {table.metric[0], table.metric[1]};
      write_json((dir / (stem + ".json")).string(), meta);
      if (o.svg) {
        std::vector<Curve> curves;
        for (int j = 1; j <= 2; ++j) {
          Curve a{"component " + std::to_string(j) + (first ? " truth" : " backfit"), {}, {}, j == 1 ? "#1f77b4" : "#d62728", false};
          Curve b{"component " + std::to_string(j) + (first ? " estimate" : " marginal"), {}, {}, a.color, true};
          for (const auto& r : table.rows) {
            if (r.component != j) continue;
            a.xs.push_back(r.x);
            b.xs.push_back(r.x);
            a.ys.push_back(r.first);
            b.ys.push_back(r.second);
          }
          curves.insert(curves.end(), {a, b});
        }
        write_svg(curves, *o.svg, o.scenario);
      }
      log << o.scenario << ": n=" << o.n << " K=" << table.num_intervals << ' ' << (first ? "rmse" : "sup_diff") << "=("
          << format_double(table.metric[0]) << ", " << format_double(table.metric[1]) << ")\n";
      return kExitOk;
    }

    if (!(o.level > 0.0 && o.level < 1.0)) throw InputError("--level must lie in (0, 1)");
    const Sim3Result res = run_sim3(cfg, o.level);
    meta["summary"] = summary_json(res.summary, o.timings);
    meta["sigma2"] = cfg.sigma2();
    write_json((dir / (stem + ".json")).string(), meta);
    if (o.scenario == "sim3") {
      Table t;
      t.columns = {"z1", "z2"};
      for (Eigen::Index r = 0; r < res.sample.values.rows(); ++r)
        t.rows.push_back({res.sample.values(r, 0), res.sample.values(r, 1)});
      write_table((dir / (stem + ".csv")).string(), t);
      if (res.sample.values.rows() >= 2) {
        const DensityGrid kde = kde2d(res.sample.values, 81);
        Table k;
        k.columns = {"z1", "z2", "density"};
        for (std::size_t i = 0; i < kde.xs.size(); ++i)
          for (std::size_t j = 0; j < kde.ys.size(); ++j)
            k.rows.push_back({kde.xs[i], kde.ys[j], kde.density(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
        write_table((dir / (stem + "_kde.csv")).string(), k);
        if (o.svg) {
          const DensityGrid normal = standard_normal_grid(81);
          std::vector<std::pair<ContourSet, std::string>> sets;
          for (double level : {0.02, 0.04, 0.06, 0.08, 0.1}) {
            sets.emplace_back(contour_lines(kde.xs, kde.ys, kde.density, level), "#1f77b4");
            sets.emplace_back(contour_lines(normal.xs, normal.ys, normal.density, level), "#7f7f7f");
          }
          write_contour_svg(sets, *o.svg, -4.0, 4.0, "standardized estimates");
        }
      }
    }
    const auto& s = res.summary;
    log << o.scenario << ": n=" << o.n << " M=" << s.replications << " rejected=" << s.rejected << " mean=("
        << format_double(s.mean[0]) << ", " << format_double(s.mean[1]) << ") ks=(" << format_double(s.ks_stat[0])
        << ", " << format_double(s.ks_stat[1]) << ") coverage=(" << format_double(s.coverage[0]) << ", "
        << format_double(s.coverage[1]) << ")\n";
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace pspline
