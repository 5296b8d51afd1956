#pragma once

// Minimal SVG line charts. Each data series becomes exactly one <polyline>;
// axes, ticks and reference lines use <line> and <text> only.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace respira::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Draw the y = x reference (ROC chance line) and pin both axes to [0, 1].
  bool unit_square = false;
};

inline constexpr std::array<std::string_view, 8> kPalette = {
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

inline std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

namespace detail {

/// Keeps at most `limit` evenly spaced points.
inline std::vector<std::size_t> decimate(std::size_t n, std::size_t limit) {
  std::vector<std::size_t> idx;
  if (n <= limit) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t k = 0; k < limit; ++k) idx.push_back(k * (n - 1) / (limit - 1));
  return idx;
}

inline void render_panel(std::string& out, const Panel& p, double ox, double oy, double w, double h) {
  const double left = ox + 70, right = ox + w - 130, top = oy + 30, bottom = oy + h - 45;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : p.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (p.unit_square || !std::isfinite(xmin)) {
    xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  out += "<g>\n";
  out += "<text x=\"" + num(ox + w / 2) + "\" y=\"" + num(oy + 18) +
         "\" text-anchor=\"middle\" font-size=\"14\">" + escape(p.title) + "</text>\n";
  out += "<line x1=\"" + num(left) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(right) + "\" y2=\"" + num(bottom) +
         "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" + num(bottom) +
         "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 4.0;
    const double fy = ymin + (ymax - ymin) * t / 4.0;
    out += "<text x=\"" + num(sx(fx)) + "\" y=\"" + num(bottom + 15) +
           "\" text-anchor=\"middle\" font-size=\"10\">" + tick_label(fx) + "</text>\n";
    out += "<text x=\"" + num(left - 5) + "\" y=\"" + num(sy(fy) + 3) +
           "\" text-anchor=\"end\" font-size=\"10\">" + tick_label(fy) + "</text>\n";
  }
  out += "<text x=\"" + num((left + right) / 2) + "\" y=\"" + num(bottom + 32) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + escape(p.x_label) + "</text>\n";
  out += "<text x=\"" + num(ox + 14) + "\" y=\"" + num((top + bottom) / 2) + "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " +
         num(ox + 14) + " " + num((top + bottom) / 2) + ")\">" + escape(p.y_label) + "</text>\n";
  if (p.unit_square) {
    out += "<line x1=\"" + num(sx(0)) + "\" y1=\"" + num(sy(0)) + "\" x2=\"" + num(sx(1)) + "\" y2=\"" + num(sy(1)) +
           "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  }

  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    const auto color = kPalette[k % kPalette.size()];
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.2\" points=\"";
    const auto n = std::min(s.x.size(), s.y.size());
    bool first = true;
    for (auto i : decimate(n, 2000)) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!first) out += ' ';
      out += num(sx(s.x[i])) + "," + num(sy(s.y[i]));
      first = false;
    }
    out += "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(k) + 8;
    out += "<line x1=\"" + num(right + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(right + 28) + "\" y2=\"" +
           num(ly) + "\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(right + 32) + "\" y=\"" + num(ly + 4) + "\" font-size=\"10\">" + escape(s.label) +
           "</text>\n";
  }
  out += "</g>\n";
}

}  // namespace detail

/// Panels stacked vertically in one document.
inline std::string render(const std::vector<Panel>& panels, double width = 820, double panel_height = 260) {
  const double height = panel_height * static_cast<double>(std::max<std::size_t>(1, panels.size()));
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    detail::render_panel(out, panels[i], 0, panel_height * static_cast<double>(i), width, panel_height);
  }
  out += "</svg>\n";
  return out;
}

inline std::string render(const Panel& panel) { return render(std::vector<Panel>{panel}, 640, 480); }

}  // namespace respira::svg
