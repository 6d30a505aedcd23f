#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "pino/csv.hpp"

namespace pino {

// Small self-contained SVG emitters for loss curves and error histograms; no
// plotting dependency needed for the handful of figures this project emits.

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

namespace detail {
constexpr int kW = 720, kH = 440, kMargin = 56;
inline const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

struct Scale {
  double lo = 0.0, hi = 1.0;
  double px0 = 0.0, px1 = 1.0;
  double operator()(double v) const {
    const double t = (v - lo) / (hi - lo == 0.0 ? 1.0 : hi - lo);
    return px0 + t * (px1 - px0);
  }
};
}  // namespace detail

inline void svg_line_chart(const std::filesystem::path& path, const std::string& title,
                           const std::vector<Series>& series, bool log_y = false) {
  using namespace detail;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      double y = s.ys[i];
      if (log_y && y <= 0) continue;
      y = log_y ? std::log10(y) : y;
      xlo = std::min(xlo, s.xs[i]);
      xhi = std::max(xhi, s.xs[i]);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  if (!(xlo < xhi)) xhi = xlo + 1;
  if (!(ylo < yhi)) yhi = ylo + 1;
  Scale sx{xlo, xhi, kMargin, kW - kMargin / 2.0};
  Scale sy{ylo, yhi, kH - kMargin, kMargin / 2.0};

  std::ofstream out(path, std::ios::trunc);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
  // Axes and a few ticks.
  out << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='" << kW - kMargin / 2
      << "' y2='" << kH - kMargin << "' stroke='black'/>\n"
      << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='" << kMargin << "' y2='"
      << kMargin / 2 << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xlo + (xhi - xlo) * t / 4.0;
    const double yv = ylo + (yhi - ylo) * t / 4.0;
    out << "<text x='" << sx(xv) << "' y='" << kH - kMargin + 18
        << "' text-anchor='middle' font-size='11'>" << csv_num(xv) << "</text>\n";
    out << "<text x='" << kMargin - 6 << "' y='" << sy(yv) + 4
        << "' text-anchor='end' font-size='11'>" << csv_num(log_y ? std::pow(10.0, yv) : yv)
        << "</text>\n";
  }
  int color = 0;
  for (const auto& s : series) {
    out << "<polyline fill='none' stroke='" << kColors[color % 5] << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      double y = s.ys[i];
      if (log_y && y <= 0) continue;
      out << sx(s.xs[i]) << "," << sy(log_y ? std::log10(y) : y) << " ";
    }
    out << "'/>\n";
    out << "<text x='" << kW - kMargin / 2 << "' y='" << kMargin / 2 + 16 * color
        << "' text-anchor='end' font-size='12' fill='" << kColors[color % 5] << "'>" << s.name
        << "</text>\n";
    ++color;
  }
  out << "</svg>\n";
}

struct HistogramSpec {
  std::string name;
  std::vector<double> values;
};

/// Shared-bin histogram of one or two value sets (overlaid, translucent).
inline void svg_histogram(const std::filesystem::path& path, const std::string& title,
                          const std::vector<HistogramSpec>& sets, int bins = 24) {
  using namespace detail;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : sets)
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(lo < hi)) hi = lo + 1;
  std::vector<std::vector<int>> counts(sets.size(), std::vector<int>(bins, 0));
  int peak = 1;
  for (std::size_t s = 0; s < sets.size(); ++s)
    for (double v : sets[s].values) {
      int b = static_cast<int>((v - lo) / (hi - lo) * bins);
      b = std::clamp(b, 0, bins - 1);
      peak = std::max(peak, ++counts[s][b]);
    }
  Scale sx{lo, hi, kMargin, kW - kMargin / 2.0};
  Scale sy{0.0, static_cast<double>(peak), kH - kMargin, kMargin / 2.0};

  std::ofstream out(path, std::ios::trunc);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
      << "</text>\n"
      << "<line x1='" << kMargin << "' y1='" << kH - kMargin << "' x2='" << kW - kMargin / 2
      << "' y2='" << kH - kMargin << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = lo + (hi - lo) * t / 4.0;
    out << "<text x='" << sx(xv) << "' y='" << kH - kMargin + 18
        << "' text-anchor='middle' font-size='11'>" << csv_num(xv) << "</text>\n";
  }
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (int b = 0; b < bins; ++b) {
      if (counts[s][b] == 0) continue;
      const double x0 = sx(lo + (hi - lo) * b / bins);
      const double x1 = sx(lo + (hi - lo) * (b + 1) / bins);
      const double y = sy(counts[s][b]);
      out << "<rect x='" << x0 << "' y='" << y << "' width='" << x1 - x0 << "' height='"
          << (kH - kMargin) - y << "' fill='" << kColors[s % 5] << "' fill-opacity='0.55'/>\n";
    }
    out << "<text x='" << kW - kMargin / 2 << "' y='" << kMargin / 2 + 16 * s
        << "' text-anchor='end' font-size='12' fill='" << kColors[s % 5] << "'>" << sets[s].name
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace pino
