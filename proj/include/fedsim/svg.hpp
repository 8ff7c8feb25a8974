#pragma once
// Static SVG line charts with optional shaded bands (mean +/- std).

#include <string>
#include <vector>

namespace fedsim {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  // Band edges, same length as y, or empty for no band.
  std::vector<double> lo;
  std::vector<double> hi;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

// Non-finite points (and non-positive ones on log axes) are skipped.
std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series);

}  // namespace fedsim
