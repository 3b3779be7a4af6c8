#include "reelgan/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "reelgan/abc.hpp"
#include "reelgan/gan.hpp"
#include "reelgan/grid.hpp"
#include "reelgan/metrics.hpp"
#include "reelgan/plot.hpp"
#include "reelgan/tsne.hpp"

namespace reelgan::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitEmpty = 3;

/// Controlled bail-out carrying the process exit code.
struct ExitError {
  int code;
  std::string message;
};

struct GlobalConfig {
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  bool verbose = false;
};

struct IngestConfig {
  std::string input;
  std::string output = "curated.abc";
  std::string report = "report.csv";
  int bars = 16;
  bool keep_key = false;
  int pitch_low = 62;
  int pitch_high = 86;
};

struct EncodeConfig {
  std::string input;
  std::string output = "grids.rgrd";
  std::string csv;
};

struct TrainCliConfig {
  std::string data;
  std::string out = "run";
  int epochs = 500;
  int batch = 64;
  int cadence = 100;
  bool resume = false;
  double d_lr = 2e-4;
  double g_lr = 2e-4;
};

struct GenerateCliConfig {
  std::string checkpoint;
  std::string out = "generated.abc";
  std::string grid_out;
  int count = 10;
};

struct EvaluateCliConfig {
  std::vector<std::string> inputs;
  std::string out = "eval";
  double perplexity = 50.0;
  int iterations = 1000;
  std::string normalize = "max";
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExitError{kExitBadInput, "cannot read " + path};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExitError{kExitBadInput, "cannot write " + path};
  out << content;
  if (!out) throw ExitError{kExitBadInput, "write failed for " + path};
}

int to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    int value = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return value;
  } catch (const std::exception&) {
    throw ExitError{kExitBadInput, "config: invalid integer for '" + key + "': " + v};
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    double value = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return value;
  } catch (const std::exception&) {
    throw ExitError{kExitBadInput, "config: invalid number for '" + key + "': " + v};
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    unsigned long long value = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(value);
  } catch (const std::exception&) {
    throw ExitError{kExitBadInput, "config: invalid unsigned integer for '" + key + "': " + v};
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  std::string low;
  for (char c : v) low += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (low == "1" || low == "true" || low == "yes" || low == "on") return true;
  if (low == "0" || low == "false" || low == "no" || low == "off") return false;
  throw ExitError{kExitBadInput, "config: invalid boolean for '" + key + "': " + v};
}

/// INI-style config: [section] headers, key = value lines, # or ; comments.
struct IniFile {
  std::map<std::string, std::map<std::string, std::string>> sections;
};

IniFile parse_ini(const std::string& text, const std::string& path) {
  IniFile ini;
  std::string section = "global";
  std::istringstream lines(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(lines, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ExitError{kExitBadInput,
                        path + ":" + std::to_string(lineno) + ": unterminated section header"};
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ExitError{kExitBadInput, path + ":" + std::to_string(lineno) + ": empty section"};
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ExitError{kExitBadInput,
                      path + ":" + std::to_string(lineno) + ": expected key = value"};
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '\'' && value.back() == '\'')))
      value = value.substr(1, value.size() - 2);
    if (key.empty())
      throw ExitError{kExitBadInput, path + ":" + std::to_string(lineno) + ": empty key"};
    if (ini.sections[section].count(key))
      throw ExitError{kExitBadInput, path + ":" + std::to_string(lineno) + ": duplicate key '" +
                                         key + "' in [" + section + "]"};
    ini.sections[section][key] = value;
  }
  return ini;
}

/// One config-file key: the CLI option that shadows it (flags win) and the
/// parser that applies a raw string value.
struct ConfigKey {
  CLI::Option* option = nullptr;
  std::function<void(const std::string&)> apply;
};

using KeyMap = std::map<std::string, ConfigKey>;

void apply_config(const IniFile& ini, const std::map<std::string, KeyMap*>& registry) {
  for (const auto& [section, keys] : ini.sections) {
    auto sec = registry.find(section);
    if (sec == registry.end())
      throw ExitError{kExitBadInput, "config: unknown section [" + section + "]"};
    for (const auto& [key, value] : keys) {
      auto entry = sec->second->find(key);
      if (entry == sec->second->end())
        throw ExitError{kExitBadInput,
                        "config: unknown key '" + key + "' in [" + section + "]"};
      if (entry->second.option != nullptr && entry->second.option->count() > 0) continue;
      entry->second.apply(value);
    }
  }
}

std::vector<std::string> split_csv_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(value);
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ingest

int run_ingest(const IngestConfig& c, const GlobalConfig& g) {
  if (c.input.empty()) throw ExitError{kExitBadInput, "ingest: --input is required"};
  std::error_code ec;
  std::vector<std::string> blocks;
  if (fs::is_directory(c.input, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(c.input, ec)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".abc" || ext == ".json" || ext == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw ExitError{kExitBadInput, "ingest: no .abc/.json/.txt files in " + c.input};
    for (const auto& f : files) {
      try {
        auto more = abc::load_tune_blocks(f.string());
        blocks.insert(blocks.end(), more.begin(), more.end());
      } catch (const std::exception& e) {
        throw ExitError{kExitBadInput, "ingest: " + f.string() + ": " + e.what()};
      }
    }
  } else if (fs::is_regular_file(c.input, ec)) {
    try {
      blocks = abc::load_tune_blocks(c.input);
    } catch (const std::exception& e) {
      throw ExitError{kExitBadInput, "ingest: " + c.input + ": " + e.what()};
    }
  } else {
    throw ExitError{kExitBadInput, "ingest: cannot read " + c.input};
  }

  abc::CurationConfig cfg;
  cfg.required_bar_count = c.bars;
  cfg.transpose = !c.keep_key;
  cfg.pitch_low = c.pitch_low;
  cfg.pitch_high = c.pitch_high;
  cfg.threads = resolve_threads(g.threads);
  const auto result = abc::filter_corpus(blocks, cfg);

  write_text_file(c.report, abc::report_to_csv(result.report));
  std::cout << "kept " << result.report.kept << " of " << result.report.total_seen << " tunes ("
            << result.report.rejected_total() << " rejected); report: " << c.report << "\n";
  if (result.kept.empty()) {
    std::cerr << "ingest: no tunes survived filtering\n";
    return kExitEmpty;
  }
  write_text_file(c.output, abc::corpus_to_abc(result.kept));
  std::cout << "curated corpus: " << c.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// encode

int run_encode(const EncodeConfig& c) {
  if (c.input.empty()) throw ExitError{kExitBadInput, "encode: --input is required"};
  std::error_code ec;
  if (!fs::is_regular_file(c.input, ec))
    throw ExitError{kExitBadInput, "encode: cannot read " + c.input};
  const auto blocks = abc::split_tune_blocks(read_text_file(c.input));
  if (blocks.empty()) throw ExitError{kExitBadInput, "encode: no tunes in " + c.input};

  std::vector<grid::MelodyGrid> grids;
  grids.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto parsed = abc::parse_tune(blocks[i]);
    if (!parsed.ok())
      throw ExitError{kExitBadInput, "encode: tune " + std::to_string(i + 1) +
                                         " failed to parse: " + parsed.error->detail};
    abc::Tune tune = *parsed.tune;
    tune.bars = abc::unroll_repeats(tune.bars, parsed.repeats);
    try {
      grids.push_back(grid::tune_to_grid(tune));
    } catch (const std::exception& e) {
      throw ExitError{kExitBadInput,
                      "encode: tune " + std::to_string(i + 1) + ": " + e.what()};
    }
  }
  grid::write_grid_file(c.output, grids);
  if (!c.csv.empty()) grid::write_grid_csv(c.csv, grids);
  std::cout << "encoded " << grids.size() << " grids: " << c.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

std::optional<std::string> find_latest_checkpoint(const std::string& dir) {
  std::error_code ec;
  const fs::path final_path = fs::path(dir) / "checkpoint_final.rgan";
  if (fs::is_regular_file(final_path, ec)) return final_path.string();
  int best_epoch = -1;
  fs::path best;
  if (!fs::is_directory(dir, ec)) return std::nullopt;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const std::string prefix = "checkpoint_epoch_";
    const std::string suffix = ".rgan";
    if (name.size() <= prefix.size() + suffix.size() || name.rfind(prefix, 0) != 0 ||
        name.substr(name.size() - suffix.size()) != suffix)
      continue;
    const std::string digits =
        name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos)
      continue;
    const int epoch = std::stoi(digits);
    if (epoch > best_epoch) {
      best_epoch = epoch;
      best = entry.path();
    }
  }
  if (best_epoch < 0) return std::nullopt;
  return best.string();
}

int run_train(const TrainCliConfig& c, const GlobalConfig& g) {
  if (c.data.empty()) throw ExitError{kExitBadInput, "train: --data is required"};
  std::error_code ec;
  if (!fs::is_regular_file(c.data, ec))
    throw ExitError{kExitBadInput, "train: cannot read " + c.data};
  if (c.epochs < 1) throw ExitError{kExitBadInput, "train: --epochs must be >= 1"};
  if (c.batch < 2) throw ExitError{kExitBadInput, "train: --batch must be >= 2"};

  std::vector<grid::MelodyGrid> grids;
  try {
    grids = grid::read_grid_file(c.data);
  } catch (const std::exception& e) {
    throw ExitError{kExitBadInput, "train: " + c.data + ": " + e.what()};
  }
  if (grids.empty()) throw ExitError{kExitBadInput, "train: dataset is empty"};

  gan::TrainConfig tc;
  tc.batch_size = c.batch;
  tc.epochs = c.epochs;
  tc.seed = g.seed;
  tc.d_adam.learning_rate = c.d_lr;
  tc.g_adam.learning_rate = c.g_lr;
  tc.checkpoint_cadence = c.cadence;
  tc.out_dir = c.out;

  nn::RandomSource init_rng(nn::derive_seed(g.seed, 0, 0));
  gan::Discriminator<float> d(gan::default_discriminator_spec(), init_rng);
  gan::Generator<float> gen(gan::default_generator_spec(), init_rng);
  nn::AdamState<float> d_opt(tc.d_adam), g_opt(tc.g_adam);

  int start_epoch = 0;
  if (c.resume) {
    const auto latest = find_latest_checkpoint(c.out);
    if (latest) {
      try {
        start_epoch = gan::restore_checkpoint(gan::load_checkpoint(*latest), d, gen, d_opt, g_opt);
      } catch (const std::exception& e) {
        throw ExitError{kExitBadInput, "train: " + *latest + ": " + e.what()};
      }
      std::cout << "resuming from " << *latest << " at epoch " << start_epoch << "\n";
      if (start_epoch >= tc.epochs) {
        std::cout << "nothing to train: checkpoint epoch " << start_epoch
                  << " >= requested epochs " << tc.epochs << "\n";
        return kExitOk;
      }
    } else {
      std::cerr << "train: no checkpoint found in " << c.out << "; starting fresh\n";
    }
  }

  const auto result =
      gan::train(d, gen, d_opt, g_opt, grids, tc, start_epoch, g.verbose ? &std::cerr : nullptr);
  std::cout << "trained epochs " << start_epoch << ".." << tc.epochs << " ("
            << result.losses.size() << " steps); losses: " << result.loss_csv_path
            << "; final checkpoint: " << result.final_checkpoint_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// generate

int run_generate(const GenerateCliConfig& c, const GlobalConfig& g) {
  if (c.checkpoint.empty()) throw ExitError{kExitBadInput, "generate: --checkpoint is required"};
  std::error_code ec;
  if (!fs::is_regular_file(c.checkpoint, ec))
    throw ExitError{kExitBadInput, "generate: cannot read " + c.checkpoint};
  if (c.count < 1) throw ExitError{kExitBadInput, "generate: --count must be >= 1"};

  nn::RandomSource init_rng(nn::derive_seed(g.seed, 0, 0));
  gan::Discriminator<float> d(gan::default_discriminator_spec(), init_rng);
  gan::Generator<float> gen(gan::default_generator_spec(), init_rng);
  nn::AdamState<float> d_opt, g_opt;
  try {
    gan::restore_checkpoint(gan::load_checkpoint(c.checkpoint), d, gen, d_opt, g_opt);
  } catch (const std::exception& e) {
    throw ExitError{kExitBadInput, "generate: " + c.checkpoint + ": " + e.what()};
  }

  const auto grids = gan::sample(gen, c.count, g.seed);
  const auto table = grid::ScaleTable::d_major_two_octaves();
  std::vector<abc::Tune> tunes;
  tunes.reserve(grids.size());
  for (std::size_t i = 0; i < grids.size(); ++i) {
    auto tune = grid::grid_to_tune(grids[i], table);
    tune.header.title = "Generated Reel " + std::to_string(i + 1);
    tune.header.source_id = std::to_string(i + 1);
    tunes.push_back(std::move(tune));
  }
  write_text_file(c.out, abc::corpus_to_abc(tunes));
  if (!c.grid_out.empty()) grid::write_grid_file(c.grid_out, grids);
  std::cout << "wrote " << tunes.size() << " tunes: " << c.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct LabeledGrids {
  std::string label;
  std::vector<grid::MelodyGrid> grids;
};

int run_evaluate(const EvaluateCliConfig& c, const GlobalConfig& g) {
  if (c.inputs.empty())
    throw ExitError{kExitBadInput, "evaluate: at least one --input label=path is required"};

  metrics::ProfileNormalization norm;
  if (c.normalize == "max")
    norm = metrics::ProfileNormalization::divide_by_max;
  else if (c.normalize == "sum")
    norm = metrics::ProfileNormalization::divide_by_sum;
  else
    throw ExitError{kExitBadInput, "evaluate: --normalize must be 'max' or 'sum'"};

  std::vector<LabeledGrids> sets;
  for (const auto& spec : c.inputs) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      throw ExitError{kExitBadInput, "evaluate: input must look like label=path: " + spec};
    LabeledGrids set;
    set.label = spec.substr(0, eq);
    const std::string path = spec.substr(eq + 1);
    if (set.label.find_first_not_of(
            "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
        std::string::npos)
      throw ExitError{kExitBadInput,
                      "evaluate: label must be alphanumeric/_/-: " + set.label};
    for (const auto& other : sets)
      if (other.label == set.label)
        throw ExitError{kExitBadInput, "evaluate: duplicate label " + set.label};
    std::error_code ec;
    if (!fs::is_regular_file(path, ec))
      throw ExitError{kExitBadInput, "evaluate: cannot read " + path};
    try {
      set.grids = grid::read_grid_file(path);
    } catch (const std::exception& e) {
      throw ExitError{kExitBadInput, "evaluate: " + path + ": " + e.what()};
    }
    if (set.grids.empty())
      throw ExitError{kExitBadInput, "evaluate: " + path + " contains no grids"};
    sets.push_back(std::move(set));
  }

  std::error_code ec;
  fs::create_directories(c.out, ec);

  const auto table = grid::ScaleTable::d_major_two_octaves();
  std::vector<plot::ProfileSeries> series;
  for (const auto& set : sets) {
    const auto profile = metrics::distribution_profile(set.grids, norm);
    write_text_file((fs::path(c.out) / ("profile_" + set.label + ".csv")).string(),
                    metrics::profile_to_csv(profile));
    const auto hist = metrics::note_histogram(set.grids, table);
    write_text_file((fs::path(c.out) / ("hist_" + set.label + ".csv")).string(),
                    metrics::histogram_to_csv(hist));
    plot::write_histogram_svg((fs::path(c.out) / ("hist_" + set.label + ".svg")).string(),
                              "Note histogram: " + set.label, hist.counts);
    series.push_back({set.label, profile.normalized.distances});
  }
  plot::write_grouped_bar_svg((fs::path(c.out) / "profiles.svg").string(),
                              "Normalized phrase-pair distance profiles", series);

  std::size_t total = 0;
  for (const auto& set : sets) total += set.grids.size();
  if (static_cast<double>(total) < 3.0 * c.perplexity) {
    std::cerr << "evaluate: skipping t-SNE: " << total << " grids < 3*perplexity ("
              << 3.0 * c.perplexity << ")\n";
  } else {
    std::vector<std::vector<double>> points;
    std::vector<plot::ScatterPoint> scatter;
    std::vector<std::string> labels;
    std::vector<int> point_series;
    points.reserve(total);
    for (std::size_t s = 0; s < sets.size(); ++s) {
      labels.push_back(sets[s].label);
      for (const auto& mg : sets[s].grids) {
        std::vector<double> p(grid::kSlots);
        for (int i = 0; i < grid::kSlots; ++i) p[static_cast<std::size_t>(i)] = mg.values[static_cast<std::size_t>(i)];
        points.push_back(std::move(p));
        point_series.push_back(static_cast<int>(s));
      }
    }
    tsne::TsneConfig tc;
    tc.perplexity = c.perplexity;
    tc.iterations = c.iterations;
    tc.seed = g.seed;
    const auto result = tsne::tsne_embed(points, tc);

    std::ostringstream csv;
    csv << "label,x,y\n";
    csv.precision(10);
    for (std::size_t i = 0; i < result.embedding.size(); ++i) {
      csv << labels[static_cast<std::size_t>(point_series[i])] << ','
          << result.embedding[i][0] << ',' << result.embedding[i][1] << '\n';
      scatter.push_back({result.embedding[i][0], result.embedding[i][1], point_series[i]});
    }
    write_text_file((fs::path(c.out) / "tsne.csv").string(), csv.str());
    plot::write_scatter_svg((fs::path(c.out) / "tsne.svg").string(), "t-SNE of melody grids",
                            scatter, labels);
  }

  std::cout << "evaluation artifacts in " << c.out << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  GlobalConfig g;
  IngestConfig ingest_cfg;
  EncodeConfig encode_cfg;
  TrainCliConfig train_cfg;
  GenerateCliConfig generate_cfg;
  EvaluateCliConfig evaluate_cfg;

  CLI::App app{
      "reelgan: curate Irish reels from ABC corpora, encode 4x64 pitch grids, train a "
      "DCGAN, decode samples back to ABC and evaluate distributions"};
  app.option_defaults()->always_capture_default(true);
  app.require_subcommand(0, 1);

  auto* opt_config = app.add_option(
      "--config", g.config_path,
      "INI config file with sections [global], [ingest], [encode], [train], [generate], "
      "[evaluate]; command-line flags take precedence");
  auto* opt_seed = app.add_option("--seed", g.seed, "Seed for every random stream");
  auto* opt_threads =
      app.add_option("--threads", g.threads, "Worker threads for ingest (0 = hardware count)");
  auto* opt_verbose = app.add_flag("--verbose", g.verbose, "Progress logging on stderr");

  auto* ingest = app.add_subcommand(
      "ingest", "Parse, filter and transpose a raw ABC/JSON corpus into curated reels");
  KeyMap ingest_keys;
  ingest_keys["input"] = {ingest->add_option("--input", ingest_cfg.input,
                                             "Corpus file (.abc/.json) or directory of them"),
                          [&](const std::string& v) { ingest_cfg.input = v; }};
  ingest_keys["output"] = {
      ingest->add_option("--output", ingest_cfg.output, "Curated ABC corpus path"),
      [&](const std::string& v) { ingest_cfg.output = v; }};
  ingest_keys["report"] = {
      ingest->add_option("--report", ingest_cfg.report, "Filter report CSV path"),
      [&](const std::string& v) { ingest_cfg.report = v; }};
  ingest_keys["bars"] = {
      ingest->add_option("--bars", ingest_cfg.bars, "Required bar count after unrolling"),
      [&](const std::string& v) { ingest_cfg.bars = to_int(v, "bars"); }};
  ingest_keys["keep-key"] = {
      ingest->add_flag("--keep-key", ingest_cfg.keep_key, "Skip transposition to D major"),
      [&](const std::string& v) { ingest_cfg.keep_key = to_bool(v, "keep-key"); }};
  ingest_keys["pitch-low"] = {
      ingest->add_option("--pitch-low", ingest_cfg.pitch_low, "Lowest accepted MIDI pitch"),
      [&](const std::string& v) { ingest_cfg.pitch_low = to_int(v, "pitch-low"); }};
  ingest_keys["pitch-high"] = {
      ingest->add_option("--pitch-high", ingest_cfg.pitch_high, "Highest accepted MIDI pitch"),
      [&](const std::string& v) { ingest_cfg.pitch_high = to_int(v, "pitch-high"); }};

  auto* encode =
      app.add_subcommand("encode", "Encode a curated ABC corpus as a binary grid dataset");
  KeyMap encode_keys;
  encode_keys["input"] = {encode->add_option("--input", encode_cfg.input, "Curated ABC corpus"),
                          [&](const std::string& v) { encode_cfg.input = v; }};
  encode_keys["output"] = {
      encode->add_option("--output", encode_cfg.output, "Grid dataset path (.rgrd)"),
      [&](const std::string& v) { encode_cfg.output = v; }};
  encode_keys["csv"] = {
      encode->add_option("--csv", encode_cfg.csv, "Also dump grids as CSV to this path"),
      [&](const std::string& v) { encode_cfg.csv = v; }};

  auto* train =
      app.add_subcommand("train", "Train the adversarial model on a grid dataset");
  KeyMap train_keys;
  train_keys["data"] = {train->add_option("--data", train_cfg.data, "Grid dataset (.rgrd)"),
                        [&](const std::string& v) { train_cfg.data = v; }};
  train_keys["out"] = {
      train->add_option("--out", train_cfg.out, "Output directory for checkpoints and losses"),
      [&](const std::string& v) { train_cfg.out = v; }};
  train_keys["epochs"] = {train->add_option("--epochs", train_cfg.epochs, "Training epochs"),
                          [&](const std::string& v) { train_cfg.epochs = to_int(v, "epochs"); }};
  train_keys["batch"] = {train->add_option("--batch", train_cfg.batch, "Minibatch size"),
                         [&](const std::string& v) { train_cfg.batch = to_int(v, "batch"); }};
  train_keys["checkpoint-cadence"] = {
      train->add_option("--checkpoint-cadence", train_cfg.cadence,
                        "Save a checkpoint every N epochs (0 = final only)"),
      [&](const std::string& v) { train_cfg.cadence = to_int(v, "checkpoint-cadence"); }};
  train_keys["resume"] = {
      train->add_flag("--resume", train_cfg.resume,
                      "Continue from the latest checkpoint in the output directory"),
      [&](const std::string& v) { train_cfg.resume = to_bool(v, "resume"); }};
  train_keys["d-lr"] = {
      train->add_option("--d-lr", train_cfg.d_lr, "Discriminator Adam learning rate"),
      [&](const std::string& v) { train_cfg.d_lr = to_double(v, "d-lr"); }};
  train_keys["g-lr"] = {
      train->add_option("--g-lr", train_cfg.g_lr, "Generator Adam learning rate"),
      [&](const std::string& v) { train_cfg.g_lr = to_double(v, "g-lr"); }};

  auto* generate = app.add_subcommand(
      "generate", "Sample grids from a checkpoint and decode them to ABC tunes");
  KeyMap generate_keys;
  generate_keys["checkpoint"] = {
      generate->add_option("--checkpoint", generate_cfg.checkpoint, "Checkpoint file (.rgan)"),
      [&](const std::string& v) { generate_cfg.checkpoint = v; }};
  generate_keys["count"] = {
      generate->add_option("--count", generate_cfg.count, "Number of tunes to generate"),
      [&](const std::string& v) { generate_cfg.count = to_int(v, "count"); }};
  generate_keys["out"] = {
      generate->add_option("--out", generate_cfg.out, "Output ABC file"),
      [&](const std::string& v) { generate_cfg.out = v; }};
  generate_keys["grid-out"] = {
      generate->add_option("--grid-out", generate_cfg.grid_out,
                           "Also write raw sampled grids to this .rgrd path"),
      [&](const std::string& v) { generate_cfg.grid_out = v; }};

  auto* evaluate = app.add_subcommand(
      "evaluate", "Profile labeled grid datasets and embed their union with t-SNE");
  KeyMap evaluate_keys;
  evaluate_keys["input"] = {
      evaluate->add_option("--input", evaluate_cfg.inputs,
                           "Labeled grid dataset as label=path (repeatable)"),
      [&](const std::string& v) {
        for (auto& item : split_csv_list(v)) evaluate_cfg.inputs.push_back(item);
      }};
  evaluate_keys["out"] = {
      evaluate->add_option("--out", evaluate_cfg.out, "Output directory for CSVs and SVGs"),
      [&](const std::string& v) { evaluate_cfg.out = v; }};
  evaluate_keys["perplexity"] = {
      evaluate->add_option("--perplexity", evaluate_cfg.perplexity, "t-SNE perplexity"),
      [&](const std::string& v) { evaluate_cfg.perplexity = to_double(v, "perplexity"); }};
  evaluate_keys["iterations"] = {
      evaluate->add_option("--iterations", evaluate_cfg.iterations, "t-SNE iterations"),
      [&](const std::string& v) { evaluate_cfg.iterations = to_int(v, "iterations"); }};
  evaluate_keys["normalize"] = {
      evaluate->add_option("--normalize", evaluate_cfg.normalize,
                           "Profile normalization: max or sum")
          ->check(CLI::IsMember({"max", "sum"})),
      [&](const std::string& v) { evaluate_cfg.normalize = v; }};

  KeyMap global_keys;
  global_keys["seed"] = {opt_seed, [&](const std::string& v) { g.seed = to_u64(v, "seed"); }};
  global_keys["threads"] = {opt_threads,
                            [&](const std::string& v) { g.threads = to_int(v, "threads"); }};
  global_keys["verbose"] = {opt_verbose,
                            [&](const std::string& v) { g.verbose = to_bool(v, "verbose"); }};
  std::map<std::string, KeyMap*> registry = {
      {"global", &global_keys},   {"ingest", &ingest_keys},     {"encode", &encode_keys},
      {"train", &train_keys},     {"generate", &generate_keys}, {"evaluate", &evaluate_keys},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp") {
      const CLI::App* target = &app;
      while (true) {
        auto parsed =
            target->get_subcommands([](const CLI::App* a) { return a->parsed(); });
        if (parsed.empty()) break;
        target = parsed.front();
      }
      // Top-level help expands every subcommand so all keys and defaults show.
      if (target == &app)
        std::cout << app.help("", CLI::AppFormatMode::All);
      else
        std::cout << target->help();
      return kExitOk;
    }
    if (e.get_name() == "CallForAllHelp") {
      std::cout << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    }
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (opt_config->count() > 0 || !g.config_path.empty()) {
      const auto ini = parse_ini(read_text_file(g.config_path), g.config_path);
      apply_config(ini, registry);
    }
    if (app.got_subcommand(ingest)) return run_ingest(ingest_cfg, g);
    if (app.got_subcommand(encode)) return run_encode(encode_cfg);
    if (app.got_subcommand(train)) return run_train(train_cfg, g);
    if (app.got_subcommand(generate)) return run_generate(generate_cfg, g);
    if (app.got_subcommand(evaluate)) return run_evaluate(evaluate_cfg, g);
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitBadInput;
  } catch (const ExitError& e) {
    if (!e.message.empty()) std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace reelgan::cli
