// pspline: fit additive P-spline models and run the simulation scenarios.
//
//   pspline fit --data data/ozone.csv --y ozone --x1 temperature --x2 wind
//   pspline simulate sim3 --n 1000 --reps 1000 --seed 42 --out results
//
// Exit codes: 0 success, 1 input error, 2 backfitting did not converge.

#include <iostream>

#include "CLI11.hpp"
#include "pspline/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Additive P-spline backfitting with asymptotic confidence intervals"};
  app.set_config("--config", "", "key = value file; command-line flags take precedence");
  app.require_subcommand(1);

  pspline::FitOptions fit;
  auto& fc = fit.config;
  double lambda1 = -1.0, lambda2 = -1.0;
  bool no_preprocess = false;
  std::string svg_fit;
  auto* f = app.add_subcommand("fit", "fit y = f1(x1) + f2(x2) + e to a CSV file");
  f->add_option("--data", fc.data, "CSV file with a header row")->required();
  f->add_option("--y", fc.y, "response column")->capture_default_str();
  f->add_option("--x1", fc.x1, "first covariate column")->capture_default_str();
  f->add_option("--x2", fc.x2, "second covariate column")->capture_default_str();
  f->add_flag("--no-preprocess", no_preprocess, "use the data as given (covariates must lie in (0, 1])");
  f->add_option("--degree", fc.degree, "spline degree")->capture_default_str();
  f->add_option("--diff-order", fc.diff_order, "difference penalty order")->capture_default_str();
  f->add_option("--kn", fc.num_intervals, "number of knot intervals (0 = round(2 n^0.4))")->capture_default_str();
  f->add_option("--lambda1", lambda1, "smoothing parameter of f1 (default 2 n^0.4 / sqrt(K))");
  f->add_option("--lambda2", lambda2, "smoothing parameter of f2 (default 2 n^0.4 / sqrt(K))");
  f->add_option("--tol", fc.tol, "sup-norm convergence tolerance")->capture_default_str();
  f->add_option("--max-stages", fc.max_stages, "maximum backfitting stages")->capture_default_str();
  f->add_option("--level", fc.level, "confidence level")->capture_default_str();
  f->add_option("--grid", fc.grid, "grid points per component")->capture_default_str();
  f->add_option("--out", fit.out_dir, "output directory")->capture_default_str();
  f->add_option("--svg", svg_fit, "also draw the components to this SVG file");
  f->add_flag("--timings", fit.timings, "record wall-clock timings in the report");

  pspline::SimulateOptions sim;
  double sigma2 = -1.0;
  std::string svg_sim;
  auto* s = app.add_subcommand("simulate", "run a simulation scenario");
  s->add_option("scenario", sim.scenario, "sim1, sim2, sim3 or coverage")->required();
  s->add_option("--n", sim.n, "sample size")->capture_default_str();
  s->add_option("--reps", sim.reps, "Monte Carlo replications")->capture_default_str();
  s->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  s->add_option("--out", sim.out_dir, "output directory")->capture_default_str();
  s->add_option("--level", sim.level, "confidence level (coverage)")->capture_default_str();
  s->add_option("--grid", sim.grid, "grid points per component (sim1, sim2)")->capture_default_str();
  s->add_option("--stages", sim.stages, "backfitting stages per fit")->capture_default_str();
  s->add_option("--kn", sim.num_intervals, "number of knot intervals (0 = auto)")->capture_default_str();
  s->add_option("--lambda", sim.lambda, "smoothing parameter (negative = auto)")->capture_default_str();
  s->add_option("--sigma2", sigma2, "noise variance assumed by the intervals (default: true variance)");
  s->add_flag("--fixed-design", sim.fixed_design, "draw covariates once for all replications");
  s->add_option("--threads", sim.threads, "worker threads (0 = all cores)")->capture_default_str();
  s->add_option("--svg", svg_sim, "also draw curves or density contours to this SVG file");
  s->add_flag("--timings", sim.timings, "record wall-clock timings in the summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pspline::kExitInput;
  }

  if (f->parsed()) {
    fc.lambda1 = lambda1;
    fc.lambda2 = lambda2;
    fc.preprocess = !no_preprocess;
    if (!svg_fit.empty()) fit.svg = svg_fit;
    return pspline::cmd_fit(fit);
  }
  if (sigma2 >= 0.0) sim.sigma2 = sigma2;
  if (!svg_sim.empty()) sim.svg = svg_sim;
  return pspline::cmd_simulate(sim);
}
