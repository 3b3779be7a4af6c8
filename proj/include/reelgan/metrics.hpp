#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "reelgan/grid.hpp"

namespace reelgan::metrics {

/// Discrete Fréchet distance between two scalar sequences under |a-b|,
/// computed by the classic O(m*n) dynamic program. Throws on empty input.
double discrete_frechet(std::span<const double> a, std::span<const double> b);

/// The six unordered phrase pairs, in fixed reporting order.
inline constexpr std::array<std::pair<int, int>, 6> kPhrasePairs = {
    {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}}};

/// Pairwise phrase distances of one tune, indexed like kPhrasePairs.
struct PhraseProfile {
  std::array<double, 6> distances{};
};

/// Fréchet distance between each pair of grid rows (64-value sequences of
/// normalized pitch).
PhraseProfile phrase_profile(const grid::MelodyGrid& g);

enum class ProfileNormalization { divide_by_max, divide_by_sum };

struct DistributionProfile {
  PhraseProfile mean;
  PhraseProfile normalized;
};

/// Mean profile over a corpus plus its normalized form (each pair mean
/// divided by the maximum of the six, or by their sum). Throws on empty
/// input.
DistributionProfile distribution_profile(
    const std::vector<grid::MelodyGrid>& grids,
    ProfileNormalization norm = ProfileNormalization::divide_by_max);

/// Slot counts per MIDI pitch after quantization.
struct NoteHistogram {
  std::array<std::int64_t, 128> counts{};

  std::int64_t total() const;
  /// Counts folded to pitch classes 0..11.
  std::array<std::int64_t, 12> pitch_classes() const;
};

NoteHistogram note_histogram(const std::vector<grid::MelodyGrid>& grids,
                             const grid::ScaleTable& table,
                             const grid::NormalizationSpec& spec = {});

std::string profile_to_csv(const DistributionProfile& profile);
std::string histogram_to_csv(const NoteHistogram& histogram);

}  // namespace reelgan::metrics
