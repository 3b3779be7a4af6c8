#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "reelgan/abc.hpp"

namespace reelgan::grid {

inline constexpr int kRows = 4;
inline constexpr int kCols = 64;
inline constexpr int kSlots = kRows * kCols;

/// 4 phrases by 64 sixteenth slots of normalized pitch, row-major.
/// Bar b of phrase r occupies columns 16b..16b+15 of row r.
struct MelodyGrid {
  std::array<float, kSlots> values{};

  float& at(int row, int col) { return values[static_cast<std::size_t>(row) * kCols + col]; }
  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * kCols + col]; }

  bool operator==(const MelodyGrid&) const = default;
};

/// Affine pitch encoding: value = (midi - center) / half_range.
struct NormalizationSpec {
  double center_midi = 74.0;
  double half_range = 12.0;

  double encode(int midi) const { return (midi - center_midi) / half_range; }
  double decode(double value) const { return center_midi + half_range * value; }
};

/// Candidate pitches for quantization, strictly increasing.
struct ScaleTable {
  std::vector<int> midi;

  /// D-major scale tones spanning MIDI 62..86.
  static ScaleTable d_major_two_octaves();
};

/// Lays a 16-bar tune onto the grid: each event of duration d fills d
/// consecutive slots with its normalized pitch. Throws if the tune does not
/// cover exactly 256 sixteenth units in 16 bars of 16.
MelodyGrid tune_to_grid(const abc::Tune& tune, const NormalizationSpec& spec = {});

/// Nearest ScaleTable member to the decoded pitch 74 + 12v (input clamped to
/// [-1,1]); exact ties resolve to the lower pitch.
int quantize_pitch(double value, const ScaleTable& table, const NormalizationSpec& spec = {});

/// Quantizes every slot, then merges equal-pitch runs within each beat
/// (columns 4k..4k+3 of a bar) into single events; merging never crosses a
/// beat boundary. Returns a 16-bar D-major tune with L:1/16.
abc::Tune grid_to_tune(const MelodyGrid& grid, const ScaleTable& table,
                       const NormalizationSpec& spec = {});

/// Binary grid dataset: magic "RGRD", u32 version, u32 count, then
/// count x 256 little-endian float32 in row-major order.
void write_grid_file(const std::string& path, const std::vector<MelodyGrid>& grids);
std::vector<MelodyGrid> read_grid_file(const std::string& path);

/// One line per grid, 256 comma-separated values.
void write_grid_csv(const std::string& path, const std::vector<MelodyGrid>& grids);

}  // namespace reelgan::grid
