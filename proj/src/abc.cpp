#include "reelgan/abc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace reelgan::abc {

namespace {

int letter_semitone(char upper) {
  switch (upper) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return 5;
    case 'G': return 7;
    case 'A': return 9;
    case 'B': return 11;
  }
  throw std::logic_error("letter_semitone: not a pitch letter");
}

/// Sharps of the major key with this tonic letter, before # / b adjustment.
int letter_major_sharps(char upper) {
  switch (upper) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return -1;
    case 'G': return 1;
    case 'A': return 3;
    case 'B': return 5;
  }
  throw std::logic_error("letter_major_sharps: not a pitch letter");
}

int mode_sharp_shift(Mode mode) {
  switch (mode) {
    case Mode::major: return 0;
    case Mode::mixolydian: return 1;
    case Mode::dorian: return 2;
    case Mode::minor: return 3;
  }
  return 0;
}

constexpr char kSharpOrder[] = {'F', 'C', 'G', 'D', 'A', 'E', 'B'};
constexpr char kFlatOrder[] = {'B', 'E', 'A', 'D', 'G', 'C', 'F'};

/// Per-letter alteration implied by a signature with `sharps` sharps
/// (negative = flats).
int signature_alteration(int sharps, char upper) {
  if (sharps > 0) {
    for (int i = 0; i < sharps && i < 7; ++i)
      if (kSharpOrder[i] == upper) return 1;
  } else if (sharps < 0) {
    for (int i = 0; i < -sharps && i < 7; ++i)
      if (kFlatOrder[i] == upper) return -1;
  }
  return 0;
}

struct Rat {
  long long num = 0;
  long long den = 1;

  void reduce() {
    if (den < 0) { num = -num; den = -den; }
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }
  Rat times(long long n, long long d) const {
    Rat r{num * n, den * d};
    r.reduce();
    return r;
  }
  Rat plus(const Rat& o) const {
    Rat r{num * o.den + o.num * den, den * o.den};
    r.reduce();
    return r;
  }
  bool is_positive_integer() const { return den == 1 && num >= 1; }
};

struct PendingEvent {
  int pitch = 0;
  Rat units;  // duration in sixteenths, exact
};

struct ParseState {
  std::vector<Bar> bars;
  std::vector<RepeatMark> marks;
  std::vector<PendingEvent> bar;          // events of the open bar
  std::map<int, int> bar_accidentals;     // natural midi -> alteration
  int pending_broken = 0;                 // +1 after '>', -1 after '<'
  bool pending_tie = false;
  std::optional<TuneError> error;

  void fail(Reason reason, std::string detail) {
    if (!error) error = TuneError{reason, std::move(detail)};
  }
};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Parses "K:" content. Returns the key plus the sharps count implied by the
/// literal spelling (K:F# and K:Gb differ in sharps though the tonic pitch
/// class matches).
bool parse_key_text(const std::string& raw, KeySignature& key, int& sharps,
                    std::optional<TuneError>& error) {
  std::vector<std::string> tokens;
  {
    std::istringstream in(raw);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
  }
  if (tokens.empty()) {
    error = TuneError{Reason::bad_format, "empty key field"};
    return false;
  }
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    std::string t = lower(tokens[i]);
    if (t.rfind("middle=", 0) == 0 || t.rfind("transpose=", 0) == 0 || t.rfind("t=", 0) == 0) {
      error = TuneError{Reason::bad_format, "pitch-shifting key modifier: " + tokens[i]};
      return false;
    }
  }
  std::string head = tokens[0];
  char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(head[0])));
  if (letter < 'A' || letter > 'G') {
    error = TuneError{Reason::bad_format, "key has no tonic letter: " + raw};
    return false;
  }
  std::size_t pos = 1;
  int acc = 0;
  while (pos < head.size() && (head[pos] == '#' || head[pos] == 'b')) {
    acc += head[pos] == '#' ? 1 : -1;
    ++pos;
  }
  std::string mode_text = lower(head.substr(pos));
  if (mode_text.empty() && tokens.size() > 1) {
    std::string second = lower(tokens[1]);
    if (second == "major" || second == "maj" || second == "minor" || second == "min" ||
        second == "dorian" || second == "dor" || second == "mixolydian" || second == "mix")
      mode_text = second;
  }
  Mode mode;
  if (mode_text.empty() || mode_text == "maj" || mode_text == "major") mode = Mode::major;
  else if (mode_text == "m" || mode_text == "min" || mode_text == "minor") mode = Mode::minor;
  else if (mode_text == "dor" || mode_text == "dorian") mode = Mode::dorian;
  else if (mode_text == "mix" || mode_text == "mixolydian") mode = Mode::mixolydian;
  else if (mode_text == "phr" || mode_text == "phrygian" || mode_text == "lyd" ||
           mode_text == "lydian" || mode_text == "loc" || mode_text == "locrian" ||
           mode_text == "aeolian" || mode_text == "aeo" || mode_text == "ionian" ||
           mode_text == "ion") {
    // Recognizable church modes outside the supported set.
    if (mode_text.rfind("ion", 0) == 0) mode = Mode::major;
    else if (mode_text.rfind("aeo", 0) == 0) mode = Mode::minor;
    else {
      error = TuneError{Reason::wrong_mode, "unsupported mode: " + mode_text};
      return false;
    }
  } else {
    error = TuneError{Reason::bad_format, "unparseable key: " + raw};
    return false;
  }
  key.tonic = ((letter_semitone(letter) + acc) % 12 + 12) % 12;
  key.mode = mode;
  sharps = letter_major_sharps(letter) + 7 * acc - mode_sharp_shift(mode);
  return true;
}

bool parse_fraction(const std::string& text, Fraction& out) {
  std::size_t slash = text.find('/');
  if (slash == std::string::npos) return false;
  try {
    int num = std::stoi(text.substr(0, slash));
    int den = std::stoi(text.substr(slash + 1));
    if (num <= 0 || den <= 0) return false;
    out = Fraction{num, den};
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_meter(const std::string& raw, int& beats, int& unit) {
  std::string text = trim(raw);
  if (text == "C") { beats = 4; unit = 4; return true; }
  if (text == "C|") { beats = 2; unit = 2; return true; }
  Fraction f;
  if (!parse_fraction(text, f)) return false;
  beats = f.num;
  unit = f.den;
  return true;
}

void close_bar(ParseState& st) {
  if (st.pending_broken != 0) {
    st.fail(Reason::bad_format, "broken rhythm spans a barline");
    return;
  }
  st.pending_tie = false;  // ties are never merged across barlines
  st.bar_accidentals.clear();
  if (st.bar.empty()) return;
  Bar done;
  done.reserve(st.bar.size());
  for (const auto& ev : st.bar) {
    if (!ev.units.is_positive_integer()) {
      st.fail(Reason::bad_format, "note duration is not a whole number of sixteenths");
      return;
    }
    if (ev.units.num > 64) {
      st.fail(Reason::bad_format, "note longer than a bar");
      return;
    }
    done.push_back(NoteEvent{ev.pitch, static_cast<int>(ev.units.num)});
  }
  st.bars.push_back(std::move(done));
  st.bar.clear();
}

/// Reads a duration suffix at text[pos]: optional digits, then slashes with
/// optional digits. Returns false on a malformed suffix.
bool read_duration_suffix(const std::string& text, std::size_t& pos, long long& num,
                          long long& den) {
  num = 1;
  den = 1;
  std::size_t digits_begin = pos;
  while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos > digits_begin) num = std::stoll(text.substr(digits_begin, pos - digits_begin));
  if (num <= 0) return false;
  int slashes = 0;
  while (pos < text.size() && text[pos] == '/') { ++slashes; ++pos; }
  if (slashes > 0) {
    std::size_t den_begin = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos > den_begin) {
      if (slashes > 1) return false;
      den = std::stoll(text.substr(den_begin, pos - den_begin));
      if (den <= 0) return false;
    } else {
      den = 1LL << slashes;
    }
  }
  return true;
}

}  // namespace

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::major: return "major";
    case Mode::dorian: return "dorian";
    case Mode::mixolydian: return "mixolydian";
    case Mode::minor: return "minor";
  }
  return "major";
}

int key_sharps(const KeySignature& key) {
  // Canonical spelling per tonic pitch class for the major scale, preferring
  // the spelling with fewer accidentals (F# over Gb at the tie).
  static constexpr int major_sharps_by_pc[12] = {0, -5, 2, -3, 4, -1, 6, 1, -4, 3, -2, 5};
  return major_sharps_by_pc[((key.tonic % 12) + 12) % 12] - mode_sharp_shift(key.mode);
}

const char* reason_name(Reason reason) {
  switch (reason) {
    case Reason::bad_format: return "bad_format";
    case Reason::has_triplets: return "has_triplets";
    case Reason::wrong_meter: return "wrong_meter";
    case Reason::wrong_mode: return "wrong_mode";
    case Reason::bar_count: return "bar_count";
    case Reason::has_rests: return "has_rests";
    case Reason::has_chords: return "has_chords";
    case Reason::out_of_range: return "out_of_range";
  }
  return "bad_format";
}

std::vector<NoteEvent> Tune::flattened_events() const {
  std::vector<NoteEvent> out;
  for (const auto& bar : bars) out.insert(out.end(), bar.begin(), bar.end());
  return out;
}

std::int64_t FilterReport::rejected_total() const {
  std::int64_t n = 0;
  for (const auto& [reason, count] : rejected_by_reason) n += count;
  return n;
}

ParseResult parse_tune(const std::string& text) {
  ParseResult result;
  TuneHeader header;
  bool have_key = false, have_length = false, have_meter = false;
  int sharps = 0;

  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      std::size_t comment = line.find('%');
      if (comment != std::string::npos) line.erase(comment);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }

  std::size_t body_start = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = trim(lines[i]);
    if (line.empty()) continue;
    if (line.size() < 2 || line[1] != ':' ||
        !std::isalpha(static_cast<unsigned char>(line[0]))) {
      result.error = TuneError{Reason::bad_format, "unexpected line before key field: " + line};
      return result;
    }
    char field = line[0];
    std::string value = trim(line.substr(2));
    if (field == 'X') header.source_id = value;
    else if (field == 'T') { if (header.title.empty()) header.title = value; }
    else if (field == 'M') {
      if (!parse_meter(value, header.meter_beats, header.meter_unit)) {
        result.error = TuneError{Reason::bad_format, "unparseable meter: " + value};
        return result;
      }
      have_meter = true;
    } else if (field == 'L') {
      if (!parse_fraction(value, header.default_note_length)) {
        result.error = TuneError{Reason::bad_format, "unparseable note length: " + value};
        return result;
      }
      have_length = true;
    } else if (field == 'K') {
      if (!parse_key_text(value, header.key, sharps, result.error)) return result;
      have_key = true;
      body_start = i + 1;
      break;
    } else if (field == 'V') {
      result.error = TuneError{Reason::bad_format, "multi-voice tunes unsupported"};
      return result;
    }
    // Other header fields (R:, Q:, C:, O:, N:, Z:, ...) carry no pitch or
    // duration semantics and are skipped.
  }
  if (!have_key) {
    result.error = TuneError{Reason::bad_format, "missing key field"};
    return result;
  }
  if (!have_length && !have_meter) {
    result.error = TuneError{Reason::bad_format, "missing both meter and note length"};
    return result;
  }
  if (!have_length) {
    double ratio = static_cast<double>(header.meter_beats) / header.meter_unit;
    header.default_note_length = ratio >= 0.75 ? Fraction{1, 8} : Fraction{1, 16};
  }

  ParseState st;
  const long long ln = header.default_note_length.num;
  const long long ld = header.default_note_length.den;

  auto note_units = [&](long long mult_num, long long mult_den) {
    Rat r{16 * ln * mult_num, ld * mult_den};
    r.reduce();
    return r;
  };

  auto handle_note = [&](const std::string& text2, std::size_t& pos) {
    // Accidental prefix.
    bool explicit_acc = false;
    int alteration = 0;
    if (text2[pos] == '^' || text2[pos] == '_' || text2[pos] == '=') {
      explicit_acc = true;
      char c = text2[pos];
      alteration = c == '^' ? 1 : c == '_' ? -1 : 0;
      ++pos;
      if (pos < text2.size() && text2[pos] == c && c != '=') {
        alteration *= 2;
        ++pos;
      }
      if (pos >= text2.size() ||
          !std::isalpha(static_cast<unsigned char>(text2[pos])) ||
          std::toupper(static_cast<unsigned char>(text2[pos])) < 'A' ||
          std::toupper(static_cast<unsigned char>(text2[pos])) > 'G') {
        st.fail(Reason::bad_format, "accidental not followed by a note letter");
        return;
      }
    }
    char raw = text2[pos];
    char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    bool low_octave = std::islower(static_cast<unsigned char>(raw));
    ++pos;
    int octave_shift = 0;
    while (pos < text2.size() && (text2[pos] == '\'' || text2[pos] == ',')) {
      octave_shift += text2[pos] == '\'' ? 12 : -12;
      ++pos;
    }
    long long mult_num = 1, mult_den = 1;
    if (!read_duration_suffix(text2, pos, mult_num, mult_den)) {
      st.fail(Reason::bad_format, "malformed duration");
      return;
    }
    int natural = (low_octave ? 72 : 60) + letter_semitone(upper) + octave_shift;
    int applied;
    if (explicit_acc) {
      st.bar_accidentals[natural] = alteration;
      applied = alteration;
    } else if (auto it = st.bar_accidentals.find(natural); it != st.bar_accidentals.end()) {
      applied = it->second;
    } else {
      applied = signature_alteration(sharps, upper);
    }
    int pitch = natural + applied;
    if (pitch < 0 || pitch > 127) {
      st.fail(Reason::bad_format, "pitch outside midi range");
      return;
    }
    PendingEvent ev{pitch, note_units(mult_num, mult_den)};
    if (ev.units.num <= 0) {
      st.fail(Reason::bad_format, "non-positive duration");
      return;
    }
    if (st.pending_broken != 0) {
      if (st.bar.empty()) {
        st.fail(Reason::bad_format, "broken rhythm with no preceding note");
        return;
      }
      auto& prev = st.bar.back();
      if (st.pending_broken > 0) {
        prev.units = prev.units.times(3, 2);
        ev.units = ev.units.times(1, 2);
      } else {
        prev.units = prev.units.times(1, 2);
        ev.units = ev.units.times(3, 2);
      }
      st.pending_broken = 0;
    }
    if (st.pending_tie) {
      st.pending_tie = false;
      if (!st.bar.empty() && st.bar.back().pitch == ev.pitch) {
        st.bar.back().units = st.bar.back().units.plus(ev.units);
        return;
      }
      // A tie to a different pitch carries no duration semantics; the two
      // notes stand on their own.
    }
    st.bar.push_back(ev);
  };

  for (std::size_t li = body_start; li < lines.size() && !st.error; ++li) {
    std::string line = lines[li];
    std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.size() >= 2 && trimmed[1] == ':' &&
        std::isalpha(static_cast<unsigned char>(trimmed[0]))) {
      char f = trimmed[0];
      if (f == 'K' || f == 'M' || f == 'L' || f == 'V') {
        st.fail(Reason::bad_format, "mid-tune field change unsupported");
        break;
      }
      continue;  // lyrics and other informational field lines
    }
    std::size_t pos = 0;
    while (pos < trimmed.size() && !st.error) {
      char c = trimmed[pos];
      if (c == ' ' || c == '\t' || c == '`') { ++pos; continue; }
      if (c == '\\' && pos + 1 == trimmed.size()) { ++pos; continue; }  // line continuation
      if (c == '|' || c == ':') {
        std::string cluster;
        while (pos < trimmed.size() &&
               (trimmed[pos] == '|' || trimmed[pos] == ':' || trimmed[pos] == ']')) {
          cluster += trimmed[pos];
          ++pos;
        }
        if (pos < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[pos]))) {
          st.fail(Reason::bad_format, "alternate endings unsupported");
          break;
        }
        // A leading colon (":|", "::") closes a repeated section; a trailing
        // colon ("|:", "::") opens one.
        bool end_mark = cluster.front() == ':' || cluster.find(":|") != std::string::npos;
        bool begin_mark = cluster.back() == ':' || cluster.find("|:") != std::string::npos;
        close_bar(st);
        if (st.error) break;
        int boundary = static_cast<int>(st.bars.size());
        if (end_mark) st.marks.push_back(RepeatMark{boundary, false});
        if (begin_mark) st.marks.push_back(RepeatMark{boundary, true});
        continue;
      }
      if (c == '[') {
        if (pos + 1 < trimmed.size() && trimmed[pos + 1] == '|') {
          close_bar(st);
          pos += 2;
          continue;
        }
        if (pos + 1 < trimmed.size() &&
            std::isdigit(static_cast<unsigned char>(trimmed[pos + 1]))) {
          st.fail(Reason::bad_format, "alternate endings unsupported");
          break;
        }
        if (pos + 2 < trimmed.size() &&
            std::isalpha(static_cast<unsigned char>(trimmed[pos + 1])) &&
            trimmed[pos + 2] == ':') {
          char f = trimmed[pos + 1];
          std::size_t close = trimmed.find(']', pos);
          if (close == std::string::npos) {
            st.fail(Reason::bad_format, "unterminated inline field");
            break;
          }
          if (f == 'K' || f == 'M' || f == 'L' || f == 'V') {
            st.fail(Reason::bad_format, "mid-tune field change unsupported");
            break;
          }
          pos = close + 1;
          continue;
        }
        st.fail(Reason::has_chords, "chord bracket");
        break;
      }
      if (c == ']') { ++pos; continue; }  // stray close from a barline variant
      if (c == '(') {
        if (pos + 1 < trimmed.size() &&
            std::isdigit(static_cast<unsigned char>(trimmed[pos + 1]))) {
          st.fail(Reason::has_triplets, "tuplet marker");
          break;
        }
        ++pos;  // slur open
        continue;
      }
      if (c == ')') { ++pos; continue; }
      if (c == '{') {
        std::size_t close = trimmed.find('}', pos);
        if (close == std::string::npos) {
          st.fail(Reason::bad_format, "unterminated grace-note brace");
          break;
        }
        pos = close + 1;
        continue;
      }
      if (c == '"') {
        std::size_t close = trimmed.find('"', pos + 1);
        if (close == std::string::npos) {
          st.fail(Reason::bad_format, "unterminated annotation");
          break;
        }
        pos = close + 1;
        continue;
      }
      if (c == '!') {
        std::size_t close = trimmed.find('!', pos + 1);
        if (close == std::string::npos) {
          st.fail(Reason::bad_format, "unterminated decoration");
          break;
        }
        pos = close + 1;
        continue;
      }
      if (c == 'z' || c == 'Z' || c == 'x' || c == 'X') {
        st.fail(Reason::has_rests, "rest");
        break;
      }
      if (c == '>' || c == '<') {
        if (st.bar.empty() || st.pending_broken != 0) {
          st.fail(Reason::bad_format, "misplaced broken-rhythm marker");
          break;
        }
        st.pending_broken = c == '>' ? 1 : -1;
        ++pos;
        continue;
      }
      if (c == '-') {
        if (st.bar.empty()) {
          st.fail(Reason::bad_format, "tie with no preceding note");
          break;
        }
        st.pending_tie = true;
        ++pos;
        continue;
      }
      if (c == '^' || c == '_' || c == '=' ||
          (std::isalpha(static_cast<unsigned char>(c)) &&
           std::toupper(static_cast<unsigned char>(c)) >= 'A' &&
           std::toupper(static_cast<unsigned char>(c)) <= 'G')) {
        handle_note(trimmed, pos);
        continue;
      }
      if (c == '~' || c == '.' || c == 'y' || c == 'u' || c == 'v' || c == 'T' || c == 'H' ||
          c == 'L' || c == 'M' || c == 'O' || c == 'P' || c == 'S') {
        ++pos;  // decoration shorthand
        continue;
      }
      st.fail(Reason::bad_format, std::string("unknown token '") + c + "'");
      break;
    }
  }
  if (!st.error) close_bar(st);
  if (st.error) {
    result.error = st.error;
    return result;
  }
  if (st.bars.empty()) {
    result.error = TuneError{Reason::bad_format, "empty tune body"};
    return result;
  }
  Tune tune;
  tune.header = header;
  tune.bars = std::move(st.bars);
  result.tune = std::move(tune);
  result.repeats = std::move(st.marks);
  return result;
}

std::vector<Bar> unroll_repeats(const std::vector<Bar>& bars,
                                const std::vector<RepeatMark>& marks) {
  std::vector<Bar> out;
  out.reserve(bars.size() * 2);
  std::size_t src = 0;
  std::size_t section_start = 0;  // index into out
  for (const auto& mark : marks) {
    while (src < bars.size() && src < static_cast<std::size_t>(mark.boundary))
      out.push_back(bars[src++]);
    if (mark.begin) {
      section_start = out.size();
    } else {
      std::size_t end = out.size();
      for (std::size_t i = section_start; i < end; ++i) out.push_back(out[i]);
      section_start = out.size();
    }
  }
  while (src < bars.size()) out.push_back(bars[src++]);
  return out;
}

Tune transpose_to_d_major(const Tune& tune) {
  int base = ((2 - tune.header.key.tonic) % 12 + 12) % 12;
  int candidates[2] = {base, base - 12};
  int best = candidates[0];
  int best_spread = -1;
  for (int offset : candidates) {
    int spread = 0;
    for (const auto& bar : tune.bars)
      for (const auto& ev : bar)
        spread = std::max(spread, std::abs(ev.pitch + offset - 74));
    if (best_spread < 0 || spread < best_spread) {  // tie resolves to the first (upward)
      best_spread = spread;
      best = offset;
    }
  }
  Tune out = tune;
  for (auto& bar : out.bars)
    for (auto& ev : bar) ev.pitch += best;
  out.header.key = KeySignature{2, Mode::major};
  return out;
}

namespace {

struct GateOutcome {
  std::optional<Tune> tune;
  std::optional<TuneError> error;
};

GateOutcome curate_one(const std::string& block, const CurationConfig& config) {
  GateOutcome out;
  ParseResult parsed = parse_tune(block);
  if (!parsed.ok()) {
    out.error = parsed.error;
    return out;
  }
  Tune tune = std::move(*parsed.tune);
  if (config.require_meter_4_4 &&
      !(tune.header.meter_beats == 4 && tune.header.meter_unit == 4)) {
    out.error = TuneError{Reason::wrong_meter, "meter is not 4/4"};
    return out;
  }
  if (config.require_major && tune.header.key.mode != Mode::major) {
    out.error = TuneError{Reason::wrong_mode, "mode is not major"};
    return out;
  }
  tune.bars = unroll_repeats(tune.bars, parsed.repeats);
  if (static_cast<int>(tune.bars.size()) != config.required_bar_count) {
    out.error = TuneError{Reason::bar_count,
                          "bar count " + std::to_string(tune.bars.size())};
    return out;
  }
  for (const auto& bar : tune.bars) {
    int sum = 0;
    for (const auto& ev : bar) sum += ev.duration;
    if (sum != 16) {
      out.error = TuneError{Reason::bad_format, "bar does not sum to 16 sixteenths"};
      return out;
    }
  }
  if (config.transpose) tune = transpose_to_d_major(tune);
  for (const auto& bar : tune.bars)
    for (const auto& ev : bar)
      if (ev.pitch < config.pitch_low || ev.pitch > config.pitch_high) {
        out.error = TuneError{Reason::out_of_range, "pitch " + std::to_string(ev.pitch)};
        return out;
      }
  out.tune = std::move(tune);
  return out;
}

}  // namespace

CurationResult filter_corpus(const std::vector<std::string>& blocks,
                             const CurationConfig& config) {
  std::vector<GateOutcome> outcomes(blocks.size());
  int threads = std::max(1, config.threads);
  if (threads == 1 || blocks.size() < 2) {
    for (std::size_t i = 0; i < blocks.size(); ++i) outcomes[i] = curate_one(blocks[i], config);
  } else {
    threads = std::min<int>(threads, static_cast<int>(blocks.size()));
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        for (std::size_t i = t; i < blocks.size(); i += threads)
          outcomes[i] = curate_one(blocks[i], config);
      });
    }
    for (auto& th : pool) th.join();
  }

  CurationResult result;
  result.report.total_seen = static_cast<std::int64_t>(blocks.size());
  for (auto& outcome : outcomes) {
    if (outcome.tune) {
      result.kept.push_back(std::move(*outcome.tune));
      ++result.report.kept;
    } else {
      ++result.report.rejected_by_reason[outcome.error->reason];
    }
  }
  return result;
}

namespace {

/// D-major spelling for each pitch class: letter plus alteration relative to
/// the natural letter pitch.
struct Spelling { char letter; int alteration; };

Spelling spell_in_d(int pitch_class) {
  static constexpr Spelling table[12] = {
      {'C', 0}, {'C', 1}, {'D', 0}, {'D', 1}, {'E', 0}, {'F', 0},
      {'F', 1}, {'G', 0}, {'G', 1}, {'A', 0}, {'A', 1}, {'B', 0}};
  return table[((pitch_class % 12) + 12) % 12];
}

}  // namespace

std::string write_abc(const Tune& tune) {
  std::ostringstream out;
  out << "X:" << (tune.header.source_id.empty() ? "1" : tune.header.source_id) << "\n";
  if (!tune.header.title.empty()) out << "T:" << tune.header.title << "\n";
  out << "M:4/4\nL:1/16\nK:D\n";

  const int d_major_sharps = 2;
  for (std::size_t bi = 0; bi < tune.bars.size(); ++bi) {
    std::map<int, int> state;  // natural midi -> alteration in force
    int cursor = 0;
    for (const auto& ev : tune.bars[bi]) {
      if (cursor > 0 && cursor % 4 == 0) out << ' ';
      Spelling sp = spell_in_d(ev.pitch % 12);
      int natural = ev.pitch - sp.alteration;
      int in_force;
      if (auto it = state.find(natural); it != state.end()) in_force = it->second;
      else in_force = signature_alteration(d_major_sharps, sp.letter);
      if (sp.alteration != in_force) {
        if (sp.alteration == 1) out << '^';
        else if (sp.alteration == -1) out << '_';
        else if (sp.alteration == 2) out << "^^";
        else if (sp.alteration == -2) out << "__";
        else out << '=';
        state[natural] = sp.alteration;
      }
      // Octave block of the natural pitch: 60..71 is the uppercase octave.
      int block = natural >= 60 ? (natural - 60) / 12 : -(((59 - natural) / 12) + 1);
      if (block <= 0) {
        out << sp.letter;
        for (int i = 0; i < -block; ++i) out << ',';
      } else {
        out << static_cast<char>(std::tolower(static_cast<unsigned char>(sp.letter)));
        for (int i = 1; i < block; ++i) out << '\'';
      }
      if (ev.duration != 1) out << ev.duration;
      cursor += ev.duration;
    }
    if (bi + 1 == tune.bars.size()) out << "|]\n";
    else if ((bi + 1) % 4 == 0) out << "|\n";
    else out << "|";
  }
  return out.str();
}

std::vector<std::string> split_tune_blocks(const std::string& corpus_text) {
  std::vector<std::string> blocks;
  std::string current;
  bool block_has_field = false;
  std::istringstream in(corpus_text);
  std::string line;
  auto flush = [&]() {
    if (block_has_field && !current.empty()) blocks.push_back(current);
    current.clear();
    block_has_field = false;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      flush();
      continue;
    }
    std::string t = trim(line);
    if (t.size() >= 2 && t[1] == ':' && (t[0] == 'X' || t[0] == 'K')) block_has_field = true;
    current += line;
    current += '\n';
  }
  flush();
  return blocks;
}

std::vector<std::string> blocks_from_json_dump(const std::string& json_text) {
  nlohmann::json doc = nlohmann::json::parse(json_text);
  const nlohmann::json* records = nullptr;
  if (doc.is_array()) records = &doc;
  else if (doc.is_object()) {
    for (const char* field : {"tunes", "settings", "records", "data"})
      if (doc.contains(field) && doc[field].is_array()) {
        records = &doc[field];
        break;
      }
  }
  if (!records) throw std::runtime_error("json dump: no record array found");

  auto text_field = [](const nlohmann::json& rec,
                       std::initializer_list<const char*> names) -> std::string {
    for (const char* name : names)
      if (rec.contains(name)) {
        const auto& v = rec[name];
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
      }
    return "";
  };

  std::vector<std::string> blocks;
  int index = 0;
  for (const auto& rec : *records) {
    ++index;
    if (!rec.is_object()) continue;
    std::string body = text_field(rec, {"abc", "body", "notation"});
    if (body.empty()) continue;
    std::string key = text_field(rec, {"mode", "key", "k"});
    if (key.empty()) continue;
    std::string meter = text_field(rec, {"meter", "m"});
    if (meter.empty()) meter = "4/4";
    std::string name = text_field(rec, {"name", "title"});
    std::string id = text_field(rec, {"setting_id", "tune_id", "id"});
    if (id.empty()) id = std::to_string(index);
    std::string block = "X:" + id + "\n";
    if (!name.empty()) block += "T:" + name + "\n";
    block += "M:" + meter + "\nL:1/8\nK:" + key + "\n" + body + "\n";
    blocks.push_back(std::move(block));
  }
  return blocks;
}

std::vector<std::string> load_tune_blocks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return blocks_from_json_dump(text);
  return split_tune_blocks(text);
}

std::string report_to_csv(const FilterReport& report) {
  std::ostringstream out;
  out << "reason,count\n";
  for (Reason reason : {Reason::bad_format, Reason::has_triplets, Reason::wrong_meter,
                        Reason::wrong_mode, Reason::bar_count, Reason::has_rests,
                        Reason::has_chords, Reason::out_of_range}) {
    auto it = report.rejected_by_reason.find(reason);
    out << reason_name(reason) << ',' << (it == report.rejected_by_reason.end() ? 0 : it->second)
        << '\n';
  }
  out << "kept," << report.kept << '\n';
  out << "total_seen," << report.total_seen << '\n';
  return out.str();
}

std::string corpus_to_abc(const std::vector<Tune>& tunes) {
  std::string out;
  for (std::size_t i = 0; i < tunes.size(); ++i) {
    if (i > 0) out += '\n';
    out += write_abc(tunes[i]);
  }
  return out;
}

}  // namespace reelgan::abc
