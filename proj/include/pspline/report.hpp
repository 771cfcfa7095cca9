#pragma once

// Run report of a fit: configuration echo, diagnostics, estimates and
// interval bounds, serialized to JSON with stable field names.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pspline/errors.hpp"
#include "pspline/io.hpp"

namespace pspline {

struct FitConfig {
  std::string data;
  std::string y = "ozone";
  std::string x1 = "temperature";
  std::string x2 = "wind";
  bool preprocess = true;
  int degree = 3;
  int diff_order = 2;
  int num_intervals = 0;  ///< 0 = auto
  double lambda1 = -1.0;  ///< negative = auto
  double lambda2 = -1.0;
  double tol = 1e-10;
  int max_stages = 100;
  double level = 0.95;
  int grid = 201;

  bool operator==(const FitConfig&) const = default;
};

struct ConvergenceInfo {
  bool converged = false;
  int stages = 0;
  double residual_norm = 0.0;

  bool operator==(const ConvergenceInfo&) const = default;
};

struct HessianInfo {
  bool positive_definite = false;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double identifiable_min_eigenvalue = 0.0;

  bool operator==(const HessianInfo&) const = default;
};

struct GridRow {
  int component = 1;
  double x = 0.0;
  double estimate = 0.0;
  double variance = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  bool operator==(const GridRow&) const = default;
};

struct Timings {
  double load_seconds = 0.0;
  double fit_seconds = 0.0;
  double inference_seconds = 0.0;

  bool operator==(const Timings&) const = default;
};

struct RunReport {
  FitConfig config;
  Preprocessing preprocessing;
  std::size_t n = 0;
  int num_intervals = 0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> b1;
  std::vector<double> b2;
  ConvergenceInfo convergence;
  double sigma2_hat = 0.0;
  HessianInfo hessian;
  std::vector<GridRow> grid;
  std::vector<std::string> warnings;
  std::optional<Timings> timings;

  bool operator==(const RunReport&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FitConfig, data, y, x1, x2, preprocess, degree, diff_order, num_intervals, lambda1,
                                   lambda2, tol, max_stages, level, grid)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Preprocessing, applied, y_center, x1_scale, x2_scale, zeros_clamped)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ConvergenceInfo, converged, stages, residual_norm)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(HessianInfo, positive_definite, min_eigenvalue, max_eigenvalue,
                                   identifiable_min_eigenvalue)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GridRow, component, x, estimate, variance, lower, upper)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Timings, load_seconds, fit_seconds, inference_seconds)

inline void to_json(nlohmann::json& j, const RunReport& r) {
  j = nlohmann::json{{"config", r.config},
                     {"preprocessing", r.preprocessing},
                     {"n", r.n},
                     {"num_intervals", r.num_intervals},
                     {"lambda1", r.lambda1},
                     {"lambda2", r.lambda2},
                     {"coefficients", {{"b1", r.b1}, {"b2", r.b2}}},
                     {"convergence", r.convergence},
                     {"sigma2_hat", r.sigma2_hat},
                     {"hessian", r.hessian},
                     {"grid", r.grid},
                     {"warnings", r.warnings}};
  if (r.timings) j["timings"] = *r.timings;
}

inline void from_json(const nlohmann::json& j, RunReport& r) {
  j.at("config").get_to(r.config);
  j.at("preprocessing").get_to(r.preprocessing);
  j.at("n").get_to(r.n);
  j.at("num_intervals").get_to(r.num_intervals);
  j.at("lambda1").get_to(r.lambda1);
  j.at("lambda2").get_to(r.lambda2);
  j.at("coefficients").at("b1").get_to(r.b1);
  j.at("coefficients").at("b2").get_to(r.b2);
  j.at("convergence").get_to(r.convergence);
  j.at("sigma2_hat").get_to(r.sigma2_hat);
  j.at("hessian").get_to(r.hessian);
  j.at("grid").get_to(r.grid);
  j.at("warnings").get_to(r.warnings);
  if (j.contains("timings"))
    r.timings = j.at("timings").get<Timings>();
  else
    r.timings.reset();
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw InputError("failed writing '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace pspline
