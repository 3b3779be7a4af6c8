#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace reelgan::plot {

/// One named series of six values (one per phrase pair).
struct ProfileSeries {
  std::string label;
  std::array<double, 6> values{};
};

/// Grouped bar chart of the six phrase-pair distances, one group per pair,
/// one bar per series.
void write_grouped_bar_svg(const std::string& path, const std::string& title,
                           const std::vector<ProfileSeries>& series);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  int series = 0;
};

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<ScatterPoint>& points,
                       const std::vector<std::string>& series_labels);

/// Bar chart over MIDI pitches; empty leading/trailing bins are trimmed.
void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::array<std::int64_t, 128>& counts);

}  // namespace reelgan::plot
