#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "reelgan/abc.hpp"
#include "reelgan/grid.hpp"

using namespace reelgan;

namespace {

abc::Tune parse_reel(const std::string& body) {
  std::string text = "X:1\nT:Grid Test\nM:4/4\nL:1/8\nK:D\n" + body + "\n";
  abc::ParseResult r = abc::parse_tune(text);
  REQUIRE_MESSAGE(r.ok(), (r.error ? r.error->detail : std::string()));
  return *r.tune;
}

std::string repeated_bars(const std::string& bar, int count) {
  std::string body;
  for (int i = 0; i < count; ++i) body += bar + "|";
  return body;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("normalization maps the pitch range onto [-1,1]") {
  grid::NormalizationSpec spec;
  CHECK(spec.encode(74) == 0.0);
  CHECK(spec.encode(86) == 1.0);
  CHECK(spec.encode(62) == -1.0);
  CHECK(spec.encode(69) == doctest::Approx(-5.0 / 12.0));
  CHECK(spec.decode(0.5) == 80.0);
}

TEST_CASE("the scale table spans two octaves of D major") {
  auto table = grid::ScaleTable::d_major_two_octaves();
  const std::vector<int> want = {62, 64, 66, 67, 69, 71, 73, 74,
                                 76, 78, 79, 81, 83, 85, 86};
  CHECK(table.midi == want);
}

TEST_CASE("tune_to_grid lays each bar into sixteen slots of its phrase row") {
  abc::Tune tune = parse_reel(repeated_bars("D2F2A2d2", 16));
  grid::MelodyGrid g = grid::tune_to_grid(tune);

  for (int row = 0; row < 4; ++row)
    for (int bar = 0; bar < 4; ++bar) {
      int base = bar * 16;
      for (int s = 0; s < 4; ++s) {
        CHECK(g.at(row, base + s) == -1.0f);
        CHECK(g.at(row, base + 4 + s) == doctest::Approx(-2.0 / 3.0));
        CHECK(g.at(row, base + 8 + s) == doctest::Approx(-5.0 / 12.0));
        CHECK(g.at(row, base + 12 + s) == 0.0f);
      }
    }
}

TEST_CASE("a reel opening fills the first row with held and moving pitches") {
  std::string body = "d2dA BAFA|" + repeated_bars("D2F2A2d2", 15);
  grid::MelodyGrid g = grid::tune_to_grid(parse_reel(body));
  // d2 holds for four slots, the single d for two more.
  for (int c = 0; c < 6; ++c) CHECK(g.at(0, c) == 0.0f);
  CHECK(g.at(0, 6) == doctest::Approx(-5.0 / 12.0));
  CHECK(g.at(0, 7) == doctest::Approx(-5.0 / 12.0));
  CHECK(g.at(0, 8) == doctest::Approx(-3.0 / 12.0));
}

TEST_CASE("tune_to_grid rejects wrong bar counts and short bars") {
  CHECK_THROWS_AS(grid::tune_to_grid(parse_reel(repeated_bars("D2F2A2d2", 15))),
                  std::invalid_argument);
  abc::Tune tune = parse_reel("D2F2A2|" + repeated_bars("D2F2A2d2", 15));
  CHECK_THROWS_AS(grid::tune_to_grid(tune), std::invalid_argument);
}

TEST_CASE("quantize_pitch snaps to the nearest scale tone with ties going down") {
  auto table = grid::ScaleTable::d_major_two_octaves();
  CHECK(grid::quantize_pitch(0.0, table) == 74);
  // 0.1 decodes to 75.2, nearer E than D.
  CHECK(grid::quantize_pitch(0.1, table) == 76);
  // -0.5 decodes to 68, equidistant from G and A; the tie resolves downward.
  CHECK(grid::quantize_pitch(-0.5, table) == 67);
  // Out-of-range values clamp to the grid edges first.
  CHECK(grid::quantize_pitch(2.0, table) == 86);
  CHECK(grid::quantize_pitch(-7.5, table) == 62);
  CHECK_THROWS_AS(grid::quantize_pitch(0.0, grid::ScaleTable{}), std::invalid_argument);
}

TEST_CASE("grid_to_tune merges equal pitches within a beat but never across beats") {
  grid::MelodyGrid g{};  // all slots at pitch 74
  auto table = grid::ScaleTable::d_major_two_octaves();
  abc::Tune tune = grid::grid_to_tune(g, table);
  REQUIRE(tune.bars.size() == 16);
  CHECK(tune.header.key == abc::KeySignature{2, abc::Mode::major});
  CHECK(tune.header.default_note_length == abc::Fraction{1, 16});
  for (const auto& bar : tune.bars) {
    REQUIRE(bar.size() == 4);
    for (const auto& ev : bar) CHECK(ev == abc::NoteEvent{74, 4});
  }
}

TEST_CASE("grid_to_tune splits events at pitch changes inside a beat") {
  grid::MelodyGrid g{};
  g.at(0, 2) = -5.0f / 12.0f;
  g.at(0, 3) = -5.0f / 12.0f;
  auto table = grid::ScaleTable::d_major_two_octaves();
  abc::Tune tune = grid::grid_to_tune(g, table);
  const abc::Bar& bar = tune.bars.at(0);
  REQUIRE(bar.size() == 5);
  CHECK(bar[0] == abc::NoteEvent{74, 2});
  CHECK(bar[1] == abc::NoteEvent{69, 2});
  CHECK(bar[2] == abc::NoteEvent{74, 4});
}

TEST_CASE("beat-aligned tunes survive the grid round trip") {
  std::string body = "d2dA BAFA|ABde f2ed|" + repeated_bars("D2F2A2d2", 14);
  abc::Tune tune = parse_reel(body);
  grid::MelodyGrid g = grid::tune_to_grid(tune);
  auto table = grid::ScaleTable::d_major_two_octaves();
  abc::Tune back = grid::grid_to_tune(g, table);
  CHECK(back.bars == tune.bars);

  // Encoding the decoded tune reproduces the grid bit for bit.
  grid::MelodyGrid again = grid::tune_to_grid(back);
  CHECK(again == g);
}

TEST_CASE("grid files round-trip exactly and reject corruption") {
  std::vector<grid::MelodyGrid> grids(3);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < grid::kSlots; ++i)
      grids[k].values[i] = static_cast<float>(std::sin(0.1 * i + k));

  TempFile file("grid_roundtrip_test.rgrd");
  grid::write_grid_file(file.path, grids);
  auto loaded = grid::read_grid_file(file.path);
  REQUIRE(loaded.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(loaded[k] == grids[k]);

  SUBCASE("bad magic") {
    std::fstream f(file.path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
    f.close();
    CHECK_THROWS_AS(grid::read_grid_file(file.path), std::runtime_error);
  }
  SUBCASE("unsupported version") {
    std::fstream f(file.path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    char bytes[4] = {9, 0, 0, 0};
    f.write(bytes, 4);
    f.close();
    CHECK_THROWS_AS(grid::read_grid_file(file.path), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    std::ifstream in(file.path, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(file.path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size() - 100));
    out.close();
    CHECK_THROWS_AS(grid::read_grid_file(file.path), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(grid::read_grid_file("no_such_file.rgrd"), std::runtime_error);
  }
}

TEST_CASE("grid csv writes one 256-value line per grid") {
  std::vector<grid::MelodyGrid> grids(2);
  grids[0].at(0, 0) = 0.5f;
  TempFile file("grid_csv_test.csv");
  grid::write_grid_csv(file.path, grids);

  std::ifstream in(file.path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == grid::kSlots - 1);
  }
  CHECK(lines == 2);
}
