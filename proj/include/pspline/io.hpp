#pragma once

// CSV ingestion for regression data and decimal CSV writers.
//
// Format: UTF-8, comma separated, one header row, '.' as decimal point.
// Fields may be wrapped in double quotes (no embedded quotes or commas).

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pspline/basis.hpp"
#include "pspline/errors.hpp"

namespace pspline {

/// Shortest-exact decimal form with 17 significant digits.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size() && std::isfinite(out);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

/// A numeric table with a header.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw InputError("column '" + name + "' not found");
    return static_cast<int>(it - columns.begin());
  }

  std::vector<double> column(int c) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
    return out;
  }
};

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  t.columns = split_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != t.columns.size())
      throw InputError(path + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(t.columns.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], row[c]))
        throw InputError(path + ": non-numeric value '" + fields[c] + "' at row " + std::to_string(line_no) +
                         ", column '" + t.columns[c] + "'");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_table(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_double(r[c]);
    out << '\n';
  }
  if (!out) throw InputError("failed writing '" + path + "'");
}

/// Transform applied before fitting: y - y_center, x_j / x_j_scale.
struct Preprocessing {
  bool applied = false;
  double y_center = 0.0;
  double x1_scale = 1.0;
  double x2_scale = 1.0;
  int zeros_clamped = 0;

  bool operator==(const Preprocessing&) const = default;
};

struct Dataset {
  std::vector<std::string> column_names;
  std::vector<std::vector<double>> rows;
  int y_col = 0;
  int x1_col = 1;
  int x2_col = 2;
  Preprocessing record;
  std::vector<std::string> warnings;

  std::size_t n() const { return rows.size(); }
  std::vector<double> column(int c) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
    return out;
  }
  std::vector<double> y() const { return column(y_col); }
  std::vector<double> x1() const { return column(x1_col); }
  std::vector<double> x2() const { return column(x2_col); }
};

/// Centers y and divides each covariate by its column maximum. Exact zeros
/// are moved to the smallest positive double with a warning; anything else
/// outside (0, 1] afterwards is an error.
inline void preprocess(Dataset& d) {
  if (d.rows.empty()) throw InputError("cannot preprocess an empty dataset");
  const auto yc = static_cast<std::size_t>(d.y_col);
  double mean = 0.0;
  for (const auto& r : d.rows) mean += r[yc];
  mean /= static_cast<double>(d.rows.size());
  for (auto& r : d.rows) r[yc] -= mean;
  d.record.y_center += mean;

  for (int which = 1; which <= 2; ++which) {
    const auto c = static_cast<std::size_t>(which == 1 ? d.x1_col : d.x2_col);
    double mx = -INFINITY;
    for (const auto& r : d.rows) mx = std::max(mx, r[c]);
    if (!(mx > 0.0)) throw InputError("column '" + d.column_names[c] + "' has no positive values");
    for (auto& r : d.rows) r[c] /= mx;
    (which == 1 ? d.record.x1_scale : d.record.x2_scale) *= mx;
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
      double& x = d.rows[i][c];
      if (x == 0.0) {
        x = clamp_to_domain(x);
        ++d.record.zeros_clamped;
        d.warnings.push_back("row " + std::to_string(i + 2) + ", column '" + d.column_names[c] +
                             "': zero moved inside (0, 1]");
      } else if (!(x > 0.0 && x <= 1.0)) {
        throw InputError("row " + std::to_string(i + 2) + ", column '" + d.column_names[c] +
                         "' lies outside (0, 1] after preprocessing");
      }
    }
  }
  d.record.applied = true;
}

inline void check_covariates(const Dataset& d) {
  for (int c : {d.x1_col, d.x2_col})
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
      const double x = d.rows[i][static_cast<std::size_t>(c)];
      if (!(x > 0.0 && x <= 1.0))
        throw InputError("row " + std::to_string(i + 2) + ", column '" + d.column_names[static_cast<std::size_t>(c)] +
                         "' lies outside (0, 1]; enable preprocessing");
    }
}

/// Reads `path` and selects the response and the two covariates.
inline Dataset load_csv(const std::string& path, const std::string& y_col, const std::string& x1_col,
                        const std::string& x2_col, bool preprocess_data) {
  const Table t = read_table(path);
  Dataset d;
  d.column_names = t.columns;
  d.rows = t.rows;
  d.y_col = t.column_index(y_col);
  d.x1_col = t.column_index(x1_col);
  d.x2_col = t.column_index(x2_col);
  if (d.rows.size() < 10)
    throw InputError("'" + path + "' has " + std::to_string(d.rows.size()) + " rows; at least 10 are needed to fit");
  if (preprocess_data)
    preprocess(d);
  else
    check_covariates(d);
  return d;
}

}  // namespace pspline
