#include "cotcheck/svg.hpp"

#include "cotcheck/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cotcheck {
namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 16;
constexpr int kMarginTop = 36;
constexpr int kMarginBottom = 48;

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string px(double v) { return format_fixed(v, 2); }

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi == lo) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

// "Nice" tick step close to range/5.
double tick_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step = 10.0;
  if (norm <= 1.0) step = 1.0;
  else if (norm <= 2.0) step = 2.0;
  else if (norm <= 5.0) step = 5.0;
  return step * mag;
}

}  // namespace

std::string render_line_plot(const SvgPlot& plot) {
  Range xr, yr;
  for (const auto& s : plot.series) {
    for (const auto& [x, y] : s.points) {
      xr.include(x);
      yr.include(y);
    }
  }
  for (const auto& b : plot.bands) {
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      xr.include(b.x[i]);
      yr.include(b.lo[i]);
      yr.include(b.hi[i]);
    }
  }
  xr.pad();
  yr.pad();

  const double plot_w = plot.width - kMarginLeft - kMarginRight;
  const double plot_h = plot.height - kMarginTop - kMarginBottom;
  auto sx = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto sy = [&](double y) { return kMarginTop + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width
      << "\" height=\"" << plot.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << plot.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape(plot.title) << "</text>\n";

  // axes + ticks
  const double x_step = tick_step(xr.hi - xr.lo);
  const double y_step = tick_step(yr.hi - yr.lo);
  for (double t = std::ceil(xr.lo / x_step) * x_step; t <= xr.hi + 1e-12; t += x_step) {
    svg << "<line x1=\"" << px(sx(t)) << "\" y1=\"" << px(kMarginTop) << "\" x2=\"" << px(sx(t))
        << "\" y2=\"" << px(kMarginTop + plot_h) << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << px(sx(t)) << "\" y=\"" << px(kMarginTop + plot_h + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << format_fixed(t, x_step < 1.0 ? 2 : 0) << "</text>\n";
  }
  for (double t = std::ceil(yr.lo / y_step) * y_step; t <= yr.hi + 1e-12; t += y_step) {
    svg << "<line x1=\"" << px(kMarginLeft) << "\" y1=\"" << px(sy(t)) << "\" x2=\""
        << px(kMarginLeft + plot_w) << "\" y2=\"" << px(sy(t)) << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << px(kMarginLeft - 6) << "\" y=\"" << px(sy(t) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << format_fixed(t, y_step < 1.0 ? 2 : 0) << "</text>\n";
  }
  svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << px(plot_w)
      << "\" height=\"" << px(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (std::size_t b = 0; b < plot.bands.size(); ++b) {
    const auto& band = plot.bands[b];
    if (band.x.empty()) continue;
    svg << "<polygon fill=\"" << kPalette[b % kPaletteSize] << "\" fill-opacity=\"0.2\" "
        << "stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < band.x.size(); ++i) {
      svg << px(sx(band.x[i])) << ',' << px(sy(band.hi[i])) << ' ';
    }
    for (std::size_t i = band.x.size(); i-- > 0;) {
      svg << px(sx(band.x[i])) << ',' << px(sy(band.lo[i])) << ' ';
    }
    svg << "\"/>\n";
  }

  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& series = plot.series[s];
    if (series.points.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << kPalette[s % kPaletteSize]
        << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series.points) {
      svg << px(sx(x)) << ',' << px(sy(y)) << ' ';
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << kMarginLeft + 8 << "\" y=\"" << kMarginTop + 14 + 14 * static_cast<int>(s)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
        << kPalette[s % kPaletteSize] << "\">" << escape(series.label) << "</text>\n";
  }

  svg << "<text x=\"" << plot.width / 2 << "\" y=\"" << plot.height - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape(plot.x_label) << "</text>\n";
  svg << "<text x=\"14\" y=\"" << plot.height / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 14 " << plot.height / 2 << ")\">" << escape(plot.y_label)
      << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string render_bar_plot(const std::string& title, const std::string& y_label,
                            const std::vector<SvgBarGroup>& groups, int width, int height) {
  Range yr;
  yr.include(0.0);
  std::vector<std::string> series_labels;
  for (const auto& g : groups) {
    for (const auto& bar : g.bars) {
      yr.include(bar.value);
      if (bar.whisker_hi > bar.whisker_lo) {
        yr.include(bar.whisker_lo);
        yr.include(bar.whisker_hi);
      }
      if (std::find(series_labels.begin(), series_labels.end(), bar.label) ==
          series_labels.end()) {
        series_labels.push_back(bar.label);
      }
    }
  }
  yr.pad();

  const double plot_w = width - kMarginLeft - kMarginRight;
  const double plot_h = height - kMarginTop - kMarginBottom;
  auto sy = [&](double y) { return kMarginTop + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape(title) << "</text>\n";

  const double y_step = tick_step(yr.hi - yr.lo);
  for (double t = std::ceil(yr.lo / y_step) * y_step; t <= yr.hi + 1e-12; t += y_step) {
    svg << "<line x1=\"" << px(kMarginLeft) << "\" y1=\"" << px(sy(t)) << "\" x2=\""
        << px(kMarginLeft + plot_w) << "\" y2=\"" << px(sy(t)) << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << px(kMarginLeft - 6) << "\" y=\"" << px(sy(t) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << format_fixed(t, y_step < 1.0 ? 2 : 0) << "</text>\n";
  }

  const std::size_t n_groups = groups.size();
  if (n_groups > 0) {
    const double group_w = plot_w / static_cast<double>(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
      const auto& group = groups[g];
      const double gx = kMarginLeft + group_w * static_cast<double>(g);
      const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(1, group.bars.size()));
      for (std::size_t b = 0; b < group.bars.size(); ++b) {
        const auto& bar = group.bars[b];
        const std::size_t color_idx = static_cast<std::size_t>(
            std::find(series_labels.begin(), series_labels.end(), bar.label) -
            series_labels.begin());
        const double x = gx + group_w * 0.1 + bar_w * static_cast<double>(b);
        const double y0 = sy(std::max(0.0, bar.value));
        const double y1 = sy(std::min(0.0, bar.value));
        svg << "<rect x=\"" << px(x) << "\" y=\"" << px(y0) << "\" width=\"" << px(bar_w * 0.92)
            << "\" height=\"" << px(std::max(0.5, y1 - y0)) << "\" fill=\""
            << kPalette[color_idx % kPaletteSize] << "\"/>\n";
        if (bar.whisker_hi > bar.whisker_lo) {
          const double cx = x + bar_w * 0.46;
          const double top = sy(bar.whisker_hi);
          const double bottom = sy(bar.whisker_lo);
          svg << "<line x1=\"" << px(cx) << "\" y1=\"" << px(top) << "\" x2=\"" << px(cx)
              << "\" y2=\"" << px(bottom) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
          svg << "<line x1=\"" << px(cx - bar_w * 0.2) << "\" y1=\"" << px(top) << "\" x2=\""
              << px(cx + bar_w * 0.2) << "\" y2=\"" << px(top) << "\" stroke=\"black\"/>\n";
          svg << "<line x1=\"" << px(cx - bar_w * 0.2) << "\" y1=\"" << px(bottom) << "\" x2=\""
              << px(cx + bar_w * 0.2) << "\" y2=\"" << px(bottom)
              << "\" stroke=\"black\"/>\n";
        }
      }
      svg << "<text x=\"" << px(gx + group_w / 2) << "\" y=\"" << px(kMarginTop + plot_h + 16)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
          << escape(group.label) << "</text>\n";
    }
  }
  for (std::size_t s = 0; s < series_labels.size(); ++s) {
    svg << "<text x=\"" << kMarginLeft + 8 << "\" y=\"" << kMarginTop + 14 + 14 * static_cast<int>(s)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << kPalette[s % kPaletteSize]
        << "\">" << escape(series_labels[s]) << "</text>\n";
  }
  svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << px(plot_w)
      << "\" height=\"" << px(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"14\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 14 " << height / 2 << ")\">" << escape(y_label) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cotcheck
