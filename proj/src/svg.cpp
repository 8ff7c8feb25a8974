#include "fedsim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace fedsim {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double map(double v) const { return log ? std::log10(v) : v; }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
};

std::string tick_label(double v, bool log) {
  if (log) return fmt::format("1e{}", static_cast<int>(std::round(v)));
  if (v != 0.0 && (std::fabs(v) >= 1e4 || std::fabs(v) < 1e-2)) return fmt::format("{:.1e}", v);
  return fmt::format("{:.3g}", v);
}

}  // namespace

std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series) {
  const double left = 70, right = 150, top = 40, bottom = 50;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;

  Axis ax{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          spec.log_x};
  Axis ay{ax.lo, ax.hi, spec.log_y};
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      ax.lo = std::min(ax.lo, ax.map(s.x[i]));
      ax.hi = std::max(ax.hi, ax.map(s.x[i]));
      double ylo = s.y[i], yhi = s.y[i];
      if (i < s.lo.size() && ay.usable(s.lo[i])) ylo = s.lo[i];
      if (i < s.hi.size() && ay.usable(s.hi[i])) yhi = s.hi[i];
      ay.lo = std::min(ay.lo, ay.map(ylo));
      ay.hi = std::max(ay.hi, ay.map(yhi));
    }
  if (!(ax.lo <= ax.hi)) ax.lo = 0, ax.hi = 1;
  if (!(ay.lo <= ay.hi)) ay.lo = 0, ay.hi = 1;
  if (ax.hi - ax.lo < 1e-12) ax.lo -= 0.5, ax.hi += 0.5;
  if (ay.hi - ay.lo < 1e-12) ay.lo -= 0.5, ay.hi += 0.5;
  const double pad = 0.04 * (ay.hi - ay.lo);
  ay.lo -= pad;
  ay.hi += pad;

  auto px = [&](double v) { return left + (ax.map(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return top + ph - (ay.map(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      spec.width, spec.height);
  svg += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                     left + pw / 2, escape(spec.title));
  svg += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", left,
      top, pw, ph);

  for (int i = 0; i <= 4; ++i) {
    const double fx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double fy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    const double gx = left + pw * i / 4.0, gy = top + ph - ph * i / 4.0;
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#ddd\"/>\n", gx,
                       top, top + ph);
    svg += fmt::format("<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#ddd\"/>\n", gy,
                       left, left + pw);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", gx,
                       top + ph + 16, tick_label(fx, ax.log));
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 6, gy + 4,
                       tick_label(fy, ay.log));
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                     spec.height - 12, escape(spec.x_label));
  svg += fmt::format(
      "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
      top + ph / 2, escape(spec.y_label));

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.lo.size() == n && s.hi.size() == n) {
      std::string upper, lower;
      for (std::size_t i = 0; i < n; ++i) {
        if (!ax.usable(s.x[i]) || !ay.usable(s.lo[i]) || !ay.usable(s.hi[i])) continue;
        upper += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.hi[i]));
      }
      for (std::size_t i = n; i-- > 0;) {
        if (!ax.usable(s.x[i]) || !ay.usable(s.lo[i]) || !ay.usable(s.hi[i])) continue;
        lower += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.lo[i]));
      }
      if (!upper.empty())
        svg += fmt::format("<polygon points=\"{}{}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n",
                           upper, lower, color);
    }
    std::string pts;
    for (std::size_t i = 0; i < n; ++i)
      if (ax.usable(s.x[i]) && ay.usable(s.y[i]))
        pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
    if (!pts.empty())
      svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n",
                         pts, color);
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       left + pw + 10, ly, left + pw + 30, color);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + pw + 36, ly + 4,
                       escape(s.label));
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace fedsim
