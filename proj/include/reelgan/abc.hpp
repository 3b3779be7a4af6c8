#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace reelgan::abc {

enum class Mode { major, dorian, mixolydian, minor };

std::string mode_name(Mode mode);

/// Key as tonic pitch class (0 = C) plus mode.
struct KeySignature {
  int tonic = 2;
  Mode mode = Mode::major;

  bool operator==(const KeySignature&) const = default;
};

/// Number of sharps (negative = flats) implied by a key, derived from the
/// circle of fifths with the standard modal shifts.
int key_sharps(const KeySignature& key);

struct Fraction {
  int num = 1;
  int den = 8;

  bool operator==(const Fraction&) const = default;
};

struct TuneHeader {
  std::string title;
  std::string source_id;
  int meter_beats = 4;
  int meter_unit = 4;
  Fraction default_note_length{1, 8};
  KeySignature key;
};

/// One sounded note: MIDI pitch (60 = middle C) and duration counted in
/// sixteenth-note units.
struct NoteEvent {
  int pitch = 0;
  int duration = 1;

  bool operator==(const NoteEvent&) const = default;
};

using Bar = std::vector<NoteEvent>;

struct Tune {
  TuneHeader header;
  std::vector<Bar> bars;

  std::vector<NoteEvent> flattened_events() const;
};

enum class Reason {
  bad_format,
  has_triplets,
  wrong_meter,
  wrong_mode,
  bar_count,
  has_rests,
  has_chords,
  out_of_range,
};

const char* reason_name(Reason reason);

struct TuneError {
  Reason reason = Reason::bad_format;
  std::string detail;
};

/// Marks the boundary just before bar `boundary` (0 = tune start,
/// bars.size() = tune end) as a repeat begin or end.
struct RepeatMark {
  int boundary = 0;
  bool begin = false;
};

struct ParseResult {
  std::optional<Tune> tune;
  std::vector<RepeatMark> repeats;
  std::optional<TuneError> error;

  bool ok() const { return tune.has_value(); }
};

/// Parses one ABC tune block (header lines followed by a body). Pitch
/// letters, octave marks, accidentals (explicit ones persist to the end of
/// the bar per letter and octave), key-signature alteration, duration
/// multipliers/divisors, broken rhythm and ties are applied; decorations,
/// slurs, grace-note braces and inline annotations are stripped. Triplets,
/// chords, rests and alternate endings yield errors carrying the matching
/// rejection reason.
ParseResult parse_tune(const std::string& text);

/// Duplicates repeat-marked sections in place. An end mark repeats from the
/// previous begin mark (or the last expansion point); a dangling begin is a
/// no-op.
std::vector<Bar> unroll_repeats(const std::vector<Bar>& bars, const std::vector<RepeatMark>& marks);

/// Shifts all pitches by the offset that maps the tonic to pitch class D,
/// choosing between the upward and downward candidate by minimal maximum
/// distance from MIDI 74 (ties resolved upward). Header key becomes D major.
Tune transpose_to_d_major(const Tune& tune);

struct FilterReport {
  std::int64_t total_seen = 0;
  std::int64_t kept = 0;
  std::map<Reason, std::int64_t> rejected_by_reason;

  std::int64_t rejected_total() const;
};

/// Gates applied by filter_corpus; defaults match the strict reel criteria.
struct CurationConfig {
  bool require_meter_4_4 = true;
  bool require_major = true;
  int required_bar_count = 16;
  bool transpose = true;
  int pitch_low = 62;
  int pitch_high = 86;
  int threads = 1;
};

struct CurationResult {
  std::vector<Tune> kept;
  FilterReport report;
};

/// Runs parse, unroll, transpose and the configured gates over raw tune
/// blocks; kept tunes appear in input order. Rejections are tallied per
/// reason, never fatal.
CurationResult filter_corpus(const std::vector<std::string>& blocks, const CurationConfig& config = {});

/// Emits the tune as ABC with header X:, T: (when titled), M:4/4, L:1/16,
/// K:D. Durations become multipliers of 1/16; sharps/flats implied by D
/// major are suppressed, everything else gets explicit accidentals with
/// bar-long persistence. parse_tune of the output yields identical events.
std::string write_abc(const Tune& tune);

/// Splits corpus text into tune blocks on blank lines; blocks lacking any
/// header field line are dropped.
std::vector<std::string> split_tune_blocks(const std::string& corpus_text);

/// Extracts tune blocks from a JSON corpus dump: an array of records each
/// carrying an "abc" body plus key (and optionally meter/name) fields, from
/// which a synthetic header is built.
std::vector<std::string> blocks_from_json_dump(const std::string& json_text);

/// Reads tune blocks from a path: .json dumps go through
/// blocks_from_json_dump, anything else is treated as ABC text.
std::vector<std::string> load_tune_blocks(const std::string& path);

std::string report_to_csv(const FilterReport& report);

/// Serializes a curated corpus, blocks separated by blank lines.
std::string corpus_to_abc(const std::vector<Tune>& tunes);

}  // namespace reelgan::abc
