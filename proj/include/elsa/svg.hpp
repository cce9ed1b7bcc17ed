#pragma once

#include <string>
#include <utility>
#include <vector>

namespace elsa {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y), drawn in the given order
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;  // non-positive values are dropped on a log axis
  int width = 640;
  int height = 420;
};

/// Standalone SVG line chart with axes, ticks and a legend.
std::string render_line_chart(const std::vector<Series>& series, const PlotOptions& opts);

}  // namespace elsa
