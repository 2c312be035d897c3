#pragma once

// Minimal static SVG charts: stacked line-chart panels and bar charts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace provisim::svg {

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  std::string color = "#1f77b4";
};

struct Panel {
  std::string title;
  std::string ylabel;
  std::vector<Series> series;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void pad_range(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
}

}  // namespace detail

inline constexpr int kWidth = 720;
inline constexpr int kPanelHeight = 220;
inline constexpr int kMarginL = 70, kMarginR = 150, kMarginT = 28, kMarginB = 34;

inline std::string line_panels(const std::string& title, const std::string& xlabel,
                               const std::vector<Panel>& panels) {
  using detail::num;
  const int height = 30 + static_cast<int>(panels.size()) * kPanelHeight;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
     << detail::escape(title) << "</text>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double top = 30.0 + static_cast<double>(p) * kPanelHeight + kMarginT;
    const double plot_h = kPanelHeight - kMarginT - kMarginB;
    const double plot_w = kWidth - kMarginL - kMarginR;
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    for (const auto& s : panel.series) {
      for (double x : s.xs) xlo = std::min(xlo, x), xhi = std::max(xhi, x);
      for (double y : s.ys)
        if (std::isfinite(y)) ylo = std::min(ylo, y), yhi = std::max(yhi, y);
    }
    detail::pad_range(xlo, xhi);
    detail::pad_range(ylo, yhi);
    ylo = std::min(ylo, 0.0);
    auto px = [&](double x) { return kMarginL + (x - xlo) / (xhi - xlo) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (y - ylo) / (yhi - ylo) * plot_h; };

    os << "<text x=\"" << kMarginL << "\" y=\"" << num(top - 8) << "\" font-size=\"12\">"
       << detail::escape(panel.title) << "</text>\n";
    os << "<rect x=\"" << kMarginL << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w) << "\" height=\""
       << num(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double yv = ylo + (yhi - ylo) * t / 4.0;
      const double xv = xlo + (xhi - xlo) * t / 4.0;
      os << "<text x=\"" << kMarginL - 6 << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">"
         << detail::label(yv) << "</text>\n";
      os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + plot_h + 14)
         << "\" text-anchor=\"middle\">" << detail::label(xv) << "</text>\n";
    }
    os << "<text x=\"14\" y=\"" << num(top + plot_h / 2) << "\" transform=\"rotate(-90 14 "
       << num(top + plot_h / 2) << ")\" text-anchor=\"middle\">" << detail::escape(panel.ylabel) << "</text>\n";
    os << "<text x=\"" << num(kMarginL + plot_w / 2) << "\" y=\"" << num(top + plot_h + 28)
       << "\" text-anchor=\"middle\">" << detail::escape(xlabel) << "</text>\n";
    for (std::size_t si = 0; si < panel.series.size(); ++si) {
      const Series& s = panel.series[si];
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
        if (!std::isfinite(s.ys[i])) continue;
        os << num(px(s.xs[i])) << ',' << num(py(s.ys[i])) << ' ';
      }
      os << "\"/>\n";
      const double ly = top + 12 + 16.0 * static_cast<double>(si);
      os << "<line x1=\"" << num(kMarginL + plot_w + 10) << "\" y1=\"" << num(ly) << "\" x2=\""
         << num(kMarginL + plot_w + 28) << "\" y2=\"" << num(ly) << "\" stroke=\"" << s.color
         << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << num(kMarginL + plot_w + 32) << "\" y=\"" << num(ly + 4) << "\">"
         << detail::escape(s.name) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

struct BarPanel {
  std::string title;
  std::vector<std::string> labels;
  std::vector<double> values;
};

inline std::string bar_panels(const std::string& title, const std::vector<BarPanel>& panels) {
  using detail::num;
  const int height = 30 + static_cast<int>(panels.size()) * kPanelHeight;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
     << detail::escape(title) << "</text>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const BarPanel& panel = panels[p];
    const double top = 30.0 + static_cast<double>(p) * kPanelHeight + kMarginT;
    const double plot_h = kPanelHeight - kMarginT - kMarginB;
    const double plot_w = kWidth - kMarginL - 30;
    double vmax = 0.0;
    for (double v : panel.values)
      if (std::isfinite(v)) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    os << "<text x=\"" << kMarginL << "\" y=\"" << num(top - 8) << "\" font-size=\"12\">"
       << detail::escape(panel.title) << "</text>\n";
    os << "<line x1=\"" << kMarginL << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(kMarginL + plot_w)
       << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"#444\"/>\n";
    const double slot = plot_w / std::max<std::size_t>(1, panel.values.size());
    for (std::size_t i = 0; i < panel.values.size(); ++i) {
      const double v = std::isfinite(panel.values[i]) ? panel.values[i] : 0.0;
      const double h = v / vmax * (plot_h - 14);
      const double x = kMarginL + slot * static_cast<double>(i) + slot * 0.15;
      os << "<rect x=\"" << num(x) << "\" y=\"" << num(top + plot_h - h) << "\" width=\"" << num(slot * 0.7)
         << "\" height=\"" << num(h) << "\" fill=\"#4c72b0\"/>\n";
      os << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << num(top + plot_h - h - 3)
         << "\" text-anchor=\"middle\">" << detail::label(v) << "</text>\n";
      os << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << num(top + plot_h + 14)
         << "\" text-anchor=\"middle\">" << detail::escape(i < panel.labels.size() ? panel.labels[i] : "")
         << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace provisim::svg
