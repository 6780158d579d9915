#pragma once

// Small deterministic SVG emitters: line charts for per-level series
// and a strip chart for partition tilings.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace circlelab::svg {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

class LineChart {
 public:
  LineChart(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add_series(std::string name, std::vector<std::pair<double, double>> pts) {
    series_.push_back({std::move(name), std::move(pts)});
  }

  void write(std::ostream& os) const {
    const int W = 720, H = 440, ml = 64, mr = 160, mt = 40, mb = 48;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series_)
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        if (first) {
          xmin = xmax = x;
          ymin = ymax = y;
          first = false;
        } else {
          xmin = std::min(xmin, x);
          xmax = std::max(xmax, x);
          ymin = std::min(ymin, y);
          ymax = std::max(ymax, y);
        }
      }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;
    const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    const auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    static const char* palette[] = {"#1b6ca8", "#c0392b", "#1e8449", "#8e44ad",
                                    "#d68910", "#17a589", "#7b241c", "#2e4053"};
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\""
       << " font-size=\"15\">" << title_ << "</text>\n";
    // axes
    os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
       << H - mb << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
       << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
      double xv = xmin + (xmax - xmin) * t / 5;
      double yv = ymin + (ymax - ymin) * t / 5;
      os << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << H - mb + 18
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(xv)
         << "</text>\n";
      os << "<text x=\"" << ml - 6 << "\" y=\"" << fmt(py(yv) + 4)
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(yv)
         << "</text>\n";
      os << "<line x1=\"" << ml << "\" y1=\"" << fmt(py(yv)) << "\" x2=\"" << W - mr << "\" y2=\""
         << fmt(py(yv)) << "\" stroke=\"#dddddd\"/>\n";
    }
    os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel_
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\""
       << "rotate(-90 16 " << (mt + H - mb) / 2 << ")\">" << ylabel_ << "</text>\n";

    for (std::size_t i = 0; i < series_.size(); ++i) {
      const char* color = palette[i % 8];
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : series_[i].points)
        if (std::isfinite(x) && std::isfinite(y)) os << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
      os << "\"/>\n";
      const double ly = mt + 16.0 * i;
      os << "<line x1=\"" << W - mr + 10 << "\" y1=\"" << fmt(ly) << "\" x2=\"" << W - mr + 30
         << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << W - mr + 35 << "\" y=\"" << fmt(ly + 4)
         << "\" font-family=\"sans-serif\" font-size=\"11\">" << series_[i].name << "</text>\n";
    }
    os << "</svg>\n";
  }

 private:
  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
};

// One row of colored cells over [0,1): a partition tiling, colored by
// generation.
inline void write_strip_chart(std::ostream& os, const std::string& title,
                              const std::vector<std::pair<double, double>>& cells,
                              const std::vector<int>& generation) {
  const int W = 900, H = 120, ml = 20, mr = 20, mt = 44, hb = 40;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"14\">" << title << "</text>\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double x = ml + cells[i].first * (W - ml - mr);
    const double w = cells[i].second * (W - ml - mr);
    const char* color = generation[i] % 2 == 0 ? "#6baed6" : "#fd8d3c";
    os << "<rect x=\"" << fmt(x) << "\" y=\"" << mt << "\" width=\"" << fmt(std::max(w, 0.25))
       << "\" height=\"" << hb << "\" fill=\"" << color << "\" stroke=\"#333333\""
       << " stroke-width=\"0.3\"/>\n";
  }
  os << "</svg>\n";
}

}  // namespace circlelab::svg
