#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cotcheck {

// Minimal deterministic SVG output: enough for the report plots (line plots
// with optional confidence bands, grouped bars) without a plotting runtime.

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct SvgBand {
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
};

struct SvgPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
  std::vector<SvgBand> bands;
  int width = 720;
  int height = 480;
};

std::string render_line_plot(const SvgPlot& plot);

struct SvgBar {
  std::string label;  // series label
  double value = 0.0;
  // whisker drawn when hi > lo (confidence interval or mean +- sd)
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
};

struct SvgBarGroup {
  std::string label;  // group on the x axis
  std::vector<SvgBar> bars;
};

std::string render_bar_plot(const std::string& title, const std::string& y_label,
                            const std::vector<SvgBarGroup>& groups,
                            int width = 720, int height = 480);

}  // namespace cotcheck
