#include "reelgan/grid.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reelgan::grid {

static_assert(std::endian::native == std::endian::little,
              "grid file IO assumes a little-endian host");

ScaleTable ScaleTable::d_major_two_octaves() {
  return ScaleTable{{62, 64, 66, 67, 69, 71, 73, 74, 76, 78, 79, 81, 83, 85, 86}};
}

MelodyGrid tune_to_grid(const abc::Tune& tune, const NormalizationSpec& spec) {
  if (tune.bars.size() != 16)
    throw std::invalid_argument("tune_to_grid: expected 16 bars, got " +
                                std::to_string(tune.bars.size()));
  MelodyGrid g;
  int slot = 0;
  for (std::size_t bi = 0; bi < tune.bars.size(); ++bi) {
    int bar_units = 0;
    for (const auto& ev : tune.bars[bi]) {
      for (int i = 0; i < ev.duration; ++i) {
        if (slot >= kSlots)
          throw std::invalid_argument("tune_to_grid: tune exceeds 256 sixteenth units");
        g.values[slot++] = static_cast<float>(spec.encode(ev.pitch));
      }
      bar_units += ev.duration;
    }
    if (bar_units != 16)
      throw std::invalid_argument("tune_to_grid: bar " + std::to_string(bi + 1) +
                                  " sums to " + std::to_string(bar_units) + " units");
  }
  return g;
}

int quantize_pitch(double value, const ScaleTable& table, const NormalizationSpec& spec) {
  if (table.midi.empty()) throw std::invalid_argument("quantize_pitch: empty scale table");
  double v = std::min(1.0, std::max(-1.0, value));
  double target = spec.decode(v);
  int best = table.midi.front();
  double best_dist = std::abs(target - best);
  for (int candidate : table.midi) {
    double dist = std::abs(target - candidate);
    // Strict improvement keeps exact ties on the lower (earlier) pitch.
    if (dist < best_dist) {
      best_dist = dist;
      best = candidate;
    }
  }
  return best;
}

abc::Tune grid_to_tune(const MelodyGrid& grid, const ScaleTable& table,
                       const NormalizationSpec& spec) {
  abc::Tune tune;
  tune.header.meter_beats = 4;
  tune.header.meter_unit = 4;
  tune.header.default_note_length = abc::Fraction{1, 16};
  tune.header.key = abc::KeySignature{2, abc::Mode::major};

  std::array<int, kSlots> quantized;
  for (int i = 0; i < kSlots; ++i) quantized[i] = quantize_pitch(grid.values[i], table, spec);

  tune.bars.resize(16);
  for (int bar = 0; bar < 16; ++bar) {
    int row = bar / 4;
    int col0 = (bar % 4) * 16;
    auto& events = tune.bars[bar];
    for (int beat = 0; beat < 4; ++beat) {
      int base = row * kCols + col0 + beat * 4;
      int i = 0;
      while (i < 4) {
        int pitch = quantized[base + i];
        int run = 1;
        while (i + run < 4 && quantized[base + i + run] == pitch) ++run;
        events.push_back(abc::NoteEvent{pitch, run});
        i += run;
      }
    }
  }
  return tune;
}

namespace {

constexpr char kMagic[4] = {'R', 'G', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error(std::string("grid file: truncated ") + what);
  return v;
}

}  // namespace

void write_grid_file(const std::string& path, const std::vector<MelodyGrid>& grids) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(grids.size()));
  for (const auto& g : grids)
    out.write(reinterpret_cast<const char*>(g.values.data()), sizeof(float) * kSlots);
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<MelodyGrid> read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("grid file: bad magic in " + path);
  std::uint32_t version = read_u32(in, "version");
  if (version != kVersion)
    throw std::runtime_error("grid file: unsupported version " + std::to_string(version));
  std::uint32_t count = read_u32(in, "count");
  std::vector<MelodyGrid> grids(count);
  for (std::uint32_t i = 0; i < count; ++i)
    if (!in.read(reinterpret_cast<char*>(grids[i].values.data()), sizeof(float) * kSlots))
      throw std::runtime_error("grid file: truncated record " + std::to_string(i) + " of " +
                               std::to_string(count));
  return grids;
}

void write_grid_csv(const std::string& path, const std::vector<MelodyGrid>& grids) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::ostringstream line;
  for (const auto& g : grids) {
    line.str("");
    for (int i = 0; i < kSlots; ++i) {
      if (i > 0) line << ',';
      line << g.values[i];
    }
    out << line.str() << '\n';
  }
}

}  // namespace reelgan::grid
