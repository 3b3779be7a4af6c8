#include "reelgan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "reelgan/metrics.hpp"

namespace reelgan::plot {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 400;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 24;
constexpr int kMarginTop = 48;
constexpr int kMarginBottom = 48;

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                    "#b07aa1", "#76b7b2", "#edc948", "#9c755f"};
constexpr int kPaletteSize = 8;

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
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

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void open_svg(std::ostringstream& svg, const std::string& title) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << escape(title) << "</text>\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("plot: cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("plot: write failed for " + path);
}

/// Horizontal gridlines with labels for a [0, top] value axis.
void draw_value_axis(std::ostringstream& svg, double top, int plot_h) {
  for (int tick = 0; tick <= 4; ++tick) {
    double value = top * tick / 4.0;
    double y = kMarginTop + plot_h - plot_h * tick / 4.0;
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << num(y) << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << num(y)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << num(value) << "</text>\n";
  }
}

void draw_legend(std::ostringstream& svg, const std::vector<std::string>& labels) {
  double x = kWidth - kMarginRight - 150.0;
  double y = kMarginTop + 4.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y + 14.0 * i) << "\" width=\"10\" "
        << "height=\"10\" fill=\"" << kPalette[i % kPaletteSize] << "\"/>\n";
    svg << "<text x=\"" << num(x + 14) << "\" y=\"" << num(y + 14.0 * i + 9)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(labels[i])
        << "</text>\n";
  }
}

}  // namespace

void write_grouped_bar_svg(const std::string& path, const std::string& title,
                           const std::vector<ProfileSeries>& series) {
  if (series.empty()) throw std::invalid_argument("plot: no series");
  const int plot_w = kWidth - kMarginLeft - kMarginRight;
  const int plot_h = kHeight - kMarginTop - kMarginBottom;

  double top = 0.0;
  for (const auto& s : series)
    for (double v : s.values) top = std::max(top, v);
  if (top <= 0.0) top = 1.0;
  top *= 1.05;

  std::ostringstream svg;
  open_svg(svg, title);
  draw_value_axis(svg, top, plot_h);

  const int groups = 6;
  const double group_w = static_cast<double>(plot_w) / groups;
  const double bar_w = group_w * 0.8 / static_cast<double>(series.size());
  for (int pair = 0; pair < groups; ++pair) {
    const double group_x = kMarginLeft + group_w * pair + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = series[s].values[static_cast<std::size_t>(pair)];
      const double h = plot_h * std::clamp(v / top, 0.0, 1.0);
      svg << "<rect x=\"" << num(group_x + bar_w * s) << "\" y=\""
          << num(kMarginTop + plot_h - h) << "\" width=\"" << num(bar_w) << "\" height=\""
          << num(h) << "\" fill=\"" << kPalette[s % kPaletteSize] << "\"/>\n";
    }
    const auto& [a, b] = metrics::kPhrasePairs[static_cast<std::size_t>(pair)];
    svg << "<text x=\"" << num(group_x + group_w * 0.4) << "\" y=\""
        << kHeight - kMarginBottom + 18 << "\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"12\">" << a << "-" << b << "</text>\n";
  }

  std::vector<std::string> labels;
  for (const auto& s : series) labels.push_back(s.label);
  draw_legend(svg, labels);
  svg << "</svg>\n";
  write_file(path, svg.str());
}

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<ScatterPoint>& points,
                       const std::vector<std::string>& series_labels) {
  if (points.empty()) throw std::invalid_argument("plot: no points");
  const int plot_w = kWidth - kMarginLeft - kMarginRight;
  const int plot_h = kHeight - kMarginTop - kMarginBottom;

  double min_x = points.front().x, max_x = min_x;
  double min_y = points.front().y, max_y = min_y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  double span_x = max_x - min_x, span_y = max_y - min_y;
  if (span_x <= 0.0) span_x = 1.0;
  if (span_y <= 0.0) span_y = 1.0;
  min_x -= span_x * 0.05;
  span_x *= 1.1;
  min_y -= span_y * 0.05;
  span_y *= 1.1;

  std::ostringstream svg;
  open_svg(svg, title);
  svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
  for (const auto& p : points) {
    const double px = kMarginLeft + (p.x - min_x) / span_x * plot_w;
    const double py = kMarginTop + plot_h - (p.y - min_y) / span_y * plot_h;
    const int s = p.series < 0 ? 0 : p.series;
    svg << "<circle cx=\"" << num(px) << "\" cy=\"" << num(py) << "\" r=\"3\" fill=\""
        << kPalette[s % kPaletteSize] << "\" fill-opacity=\"0.7\"/>\n";
  }
  draw_legend(svg, series_labels);
  svg << "</svg>\n";
  write_file(path, svg.str());
}

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::array<std::int64_t, 128>& counts) {
  int lo = 0, hi = 127;
  while (lo < 128 && counts[static_cast<std::size_t>(lo)] == 0) ++lo;
  while (hi >= 0 && counts[static_cast<std::size_t>(hi)] == 0) --hi;
  if (lo > hi) {
    lo = 60;
    hi = 72;
  }

  const int plot_w = kWidth - kMarginLeft - kMarginRight;
  const int plot_h = kHeight - kMarginTop - kMarginBottom;
  std::int64_t top_count = 1;
  for (int p = lo; p <= hi; ++p)
    top_count = std::max(top_count, counts[static_cast<std::size_t>(p)]);
  const double top = static_cast<double>(top_count) * 1.05;

  std::ostringstream svg;
  open_svg(svg, title);
  draw_value_axis(svg, top, plot_h);

  const int bins = hi - lo + 1;
  const double bin_w = static_cast<double>(plot_w) / bins;
  for (int p = lo; p <= hi; ++p) {
    const double v = static_cast<double>(counts[static_cast<std::size_t>(p)]);
    const double h = plot_h * v / top;
    svg << "<rect x=\"" << num(kMarginLeft + bin_w * (p - lo) + bin_w * 0.1) << "\" y=\""
        << num(kMarginTop + plot_h - h) << "\" width=\"" << num(bin_w * 0.8) << "\" height=\""
        << num(h) << "\" fill=\"" << kPalette[0] << "\"/>\n";
    const int label_step = bins > 16 ? 4 : 1;
    if ((p - lo) % label_step == 0)
      svg << "<text x=\"" << num(kMarginLeft + bin_w * (p - lo) + bin_w * 0.5) << "\" y=\""
          << kHeight - kMarginBottom + 18 << "\" text-anchor=\"middle\" "
          << "font-family=\"sans-serif\" font-size=\"11\">" << p << "</text>\n";
  }
  svg << "</svg>\n";
  write_file(path, svg.str());
}

}  // namespace reelgan::plot
