#pragma once

// Minimal SVG output: line charts and contour plots for the fitted curves
// and density estimates. Axes and frames are drawn with <line>/<rect>; every
// data series becomes exactly one <path>.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pspline/errors.hpp"
#include "pspline/io.hpp"

namespace pspline {

struct Curve {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct Polyline {
  std::vector<std::pair<double, double>> points;
  bool closed = false;
};

struct ContourSet {
  double level = 0.0;
  std::vector<Polyline> lines;
};

namespace detail {

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double width = 480.0, height = 360.0, margin = 40.0;
  double px(double x) const { return margin + (x - x0) / (x1 - x0) * (width - 2 * margin); }
  double py(double y) const { return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin); }
};

inline std::string header(const Frame& f, const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Frame::width << "\" height=\"" << Frame::height
    << "\" viewBox=\"0 0 " << Frame::width << ' ' << Frame::height << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << Frame::width << "\" height=\"" << Frame::height << "\" fill=\"white\"/>\n";
  s << "<line x1=\"" << f.px(f.x0) << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << f.px(f.x1) << "\" y2=\"" << f.py(f.y0)
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << f.px(f.x0) << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << f.px(f.x0) << "\" y2=\"" << f.py(f.y1)
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << Frame::margin << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  s << "<text x=\"" << f.px(f.x0) << "\" y=\"" << f.py(f.y0) + 15 << "\" font-size=\"10\">" << f.x0 << "</text>\n";
  s << "<text x=\"" << f.px(f.x1) - 20 << "\" y=\"" << f.py(f.y0) + 15 << "\" font-size=\"10\">" << f.x1 << "</text>\n";
  s << "<text x=\"2\" y=\"" << f.py(f.y0) << "\" font-size=\"10\">" << f.y0 << "</text>\n";
  s << "<text x=\"2\" y=\"" << f.py(f.y1) + 10 << "\" font-size=\"10\">" << f.y1 << "</text>\n";
  return s.str();
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << body;
  if (!out) throw InputError("failed writing '" + path + "'");
}

}  // namespace detail

inline void write_svg(const std::vector<Curve>& curves, const std::string& path, const std::string& title = "") {
  if (curves.empty()) throw InputError("write_svg: no curves to draw");
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& c : curves) {
    if (c.xs.empty() || c.xs.size() != c.ys.size()) throw InputError("write_svg: empty or mismatched curve");
    for (std::size_t i = 0; i < c.xs.size(); ++i) {
      x0 = std::min(x0, c.xs[i]);
      x1 = std::max(x1, c.xs[i]);
      y0 = std::min(y0, c.ys[i]);
      y1 = std::max(y1, c.ys[i]);
    }
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  const detail::Frame f{x0, x1, y0, y1};
  std::ostringstream s;
  s << detail::header(f, title);
  for (const auto& c : curves) {
    s << "<path fill=\"none\" stroke=\"" << c.color << "\"" << (c.dashed ? " stroke-dasharray=\"5,3\"" : "")
      << " d=\"";
    for (std::size_t i = 0; i < c.xs.size(); ++i) s << (i ? " L" : "M") << f.px(c.xs[i]) << ',' << f.py(c.ys[i]);
    s << "\"><title>" << c.label << "</title></path>\n";
  }
  s << "</svg>\n";
  detail::write_file(path, s.str());
}

/// Marching-squares contours of grid(i, j) sampled at (xs[i], ys[j]).
/// Segments are chained into polylines; a polyline that returns to its
/// starting edge is closed.
inline ContourSet contour_lines(const std::vector<double>& xs, const std::vector<double>& ys,
                                const Eigen::MatrixXd& grid, double level) {
  const int nx = static_cast<int>(xs.size()), ny = static_cast<int>(ys.size());
  if (nx < 2 || ny < 2 || grid.rows() != nx || grid.cols() != ny) throw InputError("contour_lines: bad grid");
  // Edge ids: horizontal edge (i,j)-(i+1,j) -> 2*(i*ny+j); vertical (i,j)-(i,j+1) -> 2*(i*ny+j)+1.
  auto hedge = [&](int i, int j) { return 2L * (static_cast<long>(i) * ny + j); };
  auto vedge = [&](int i, int j) { return 2L * (static_cast<long>(i) * ny + j) + 1; };
  std::map<long, std::pair<double, double>> point;
  auto crossing = [&](long id) -> std::pair<double, double> {
    if (auto it = point.find(id); it != point.end()) return it->second;
    const long base = id / 2;
    const int i = static_cast<int>(base / ny), j = static_cast<int>(base % ny);
    std::pair<double, double> pt;
    if (id % 2 == 0) {
      const double a = grid(i, j), b = grid(i + 1, j);
      const double t = (level - a) / (b - a);
      pt = {xs[static_cast<std::size_t>(i)] + t * (xs[static_cast<std::size_t>(i + 1)] - xs[static_cast<std::size_t>(i)]),
            ys[static_cast<std::size_t>(j)]};
    } else {
      const double a = grid(i, j), b = grid(i, j + 1);
      const double t = (level - a) / (b - a);
      pt = {xs[static_cast<std::size_t>(i)],
            ys[static_cast<std::size_t>(j)] + t * (ys[static_cast<std::size_t>(j + 1)] - ys[static_cast<std::size_t>(j)])};
    }
    point[id] = pt;
    return pt;
  };

  std::vector<std::pair<long, long>> segments;
  for (int i = 0; i + 1 < nx; ++i)
    for (int j = 0; j + 1 < ny; ++j) {
      const bool a = grid(i, j) > level, b = grid(i + 1, j) > level;
      const bool c = grid(i + 1, j + 1) > level, d = grid(i, j + 1) > level;
      const long bottom = hedge(i, j), right = vedge(i + 1, j), top = hedge(i, j + 1), left = vedge(i, j);
      const int code = (a ? 1 : 0) | (b ? 2 : 0) | (c ? 4 : 0) | (d ? 8 : 0);
      switch (code) {
        case 0: case 15: break;
        case 1: case 14: segments.emplace_back(left, bottom); break;
        case 2: case 13: segments.emplace_back(bottom, right); break;
        case 3: case 12: segments.emplace_back(left, right); break;
        case 4: case 11: segments.emplace_back(right, top); break;
        case 6: case 9: segments.emplace_back(bottom, top); break;
        case 7: case 8: segments.emplace_back(left, top); break;
        case 5: case 10: {
          const double centre = 0.25 * (grid(i, j) + grid(i + 1, j) + grid(i + 1, j + 1) + grid(i, j + 1));
          const bool up = centre > level;
          if ((code == 5) == up) {
            segments.emplace_back(left, top);
            segments.emplace_back(bottom, right);
          } else {
            segments.emplace_back(left, bottom);
            segments.emplace_back(right, top);
          }
          break;
        }
      }
    }

  std::multimap<long, std::size_t> at;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    at.emplace(segments[s].first, s);
    at.emplace(segments[s].second, s);
  }
  std::vector<bool> used(segments.size(), false);
  auto next_from = [&](long edge) -> long {
    auto range = at.equal_range(edge);
    for (auto it = range.first; it != range.second; ++it) {
      if (used[it->second]) continue;
      used[it->second] = true;
      const auto& sg = segments[it->second];
      return sg.first == edge ? sg.second : sg.first;
    }
    return -1;
  };

  ContourSet out;
  out.level = level;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (used[s]) continue;
    used[s] = true;
    std::vector<long> chain{segments[s].first, segments[s].second};
    for (long e; (e = next_from(chain.back())) >= 0;) chain.push_back(e);
    // Extend backwards for open contours that started mid-way.
    for (long e; (e = next_from(chain.front())) >= 0;) chain.insert(chain.begin(), e);
    Polyline line;
    line.closed = chain.size() > 2 && chain.front() == chain.back();
    for (long e : chain) line.points.push_back(crossing(e));
    out.lines.push_back(std::move(line));
  }
  return out;
}

/// Contour plot of one or more density grids; each contour polyline becomes
/// one path element.
inline void write_contour_svg(const std::vector<std::pair<ContourSet, std::string>>& sets, const std::string& path,
                              double lo, double hi, const std::string& title = "") {
  std::size_t total = 0;
  for (const auto& [set, color] : sets) total += set.lines.size();
  if (total == 0) throw InputError("write_contour_svg: no contours to draw");
  const detail::Frame f{lo, hi, lo, hi};
  std::ostringstream s;
  s << detail::header(f, title);
  for (const auto& [set, color] : sets)
    for (const auto& line : set.lines) {
      s << "<path fill=\"none\" stroke=\"" << color << "\" d=\"";
      for (std::size_t i = 0; i < line.points.size(); ++i)
        s << (i ? " L" : "M") << f.px(line.points[i].first) << ',' << f.py(line.points[i].second);
      s << (line.closed ? " Z" : "") << "\"><title>" << set.level << "</title></path>\n";
    }
  s << "</svg>\n";
  detail::write_file(path, s.str());
}

}  // namespace pspline
