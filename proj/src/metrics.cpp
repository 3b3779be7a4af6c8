#include "reelgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace reelgan::metrics {

double discrete_frechet(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = a.size(), n = b.size();
  if (m == 0 || n == 0) throw std::invalid_argument("discrete_frechet: empty sequence");
  // c[i][j] = max(|a_i - b_j|, min(c[i-1][j], c[i][j-1], c[i-1][j-1])),
  // rolling over one row.
  std::vector<double> prev(n), curr(n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double d = std::abs(a[i] - b[j]);
      double reach;
      if (i == 0 && j == 0) reach = d;
      else if (i == 0) reach = std::max(curr[j - 1], d);
      else if (j == 0) reach = std::max(prev[j], d);
      else reach = std::max(std::min(std::min(prev[j], curr[j - 1]), prev[j - 1]), d);
      curr[j] = reach;
    }
    std::swap(prev, curr);
  }
  return prev[n - 1];
}

PhraseProfile phrase_profile(const grid::MelodyGrid& g) {
  std::array<std::array<double, grid::kCols>, grid::kRows> rows;
  for (int r = 0; r < grid::kRows; ++r)
    for (int c = 0; c < grid::kCols; ++c) rows[r][c] = g.at(r, c);
  PhraseProfile profile;
  for (std::size_t k = 0; k < kPhrasePairs.size(); ++k) {
    const auto& [p, q] = kPhrasePairs[k];
    profile.distances[k] = discrete_frechet(rows[p - 1], rows[q - 1]);
  }
  return profile;
}

DistributionProfile distribution_profile(const std::vector<grid::MelodyGrid>& grids,
                                         ProfileNormalization norm) {
  if (grids.empty()) throw std::invalid_argument("distribution_profile: empty corpus");
  DistributionProfile out;
  for (const auto& g : grids) {
    PhraseProfile p = phrase_profile(g);
    for (std::size_t k = 0; k < p.distances.size(); ++k) out.mean.distances[k] += p.distances[k];
  }
  for (auto& d : out.mean.distances) d /= static_cast<double>(grids.size());

  double denom = 0.0;
  if (norm == ProfileNormalization::divide_by_max)
    denom = *std::max_element(out.mean.distances.begin(), out.mean.distances.end());
  else
    for (double d : out.mean.distances) denom += d;
  for (std::size_t k = 0; k < out.mean.distances.size(); ++k)
    out.normalized.distances[k] = denom > 0.0 ? out.mean.distances[k] / denom : 0.0;
  return out;
}

std::int64_t NoteHistogram::total() const {
  std::int64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::array<std::int64_t, 12> NoteHistogram::pitch_classes() const {
  std::array<std::int64_t, 12> out{};
  for (int midi = 0; midi < 128; ++midi) out[midi % 12] += counts[midi];
  return out;
}

NoteHistogram note_histogram(const std::vector<grid::MelodyGrid>& grids,
                             const grid::ScaleTable& table,
                             const grid::NormalizationSpec& spec) {
  NoteHistogram hist;
  for (const auto& g : grids)
    for (float v : g.values) {
      int midi = grid::quantize_pitch(v, table, spec);
      if (midi >= 0 && midi < 128) ++hist.counts[midi];
    }
  return hist;
}

std::string profile_to_csv(const DistributionProfile& profile) {
  std::ostringstream out;
  out << "pair,mean,normalized\n";
  out.precision(17);
  for (std::size_t k = 0; k < kPhrasePairs.size(); ++k) {
    const auto& [p, q] = kPhrasePairs[k];
    out << p << '-' << q << ',' << profile.mean.distances[k] << ','
        << profile.normalized.distances[k] << '\n';
  }
  return out.str();
}

std::string histogram_to_csv(const NoteHistogram& histogram) {
  std::ostringstream out;
  out << "midi,count\n";
  for (int midi = 0; midi < 128; ++midi)
    if (histogram.counts[midi] > 0) out << midi << ',' << histogram.counts[midi] << '\n';
  return out.str();
}

}  // namespace reelgan::metrics
