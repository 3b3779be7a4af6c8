#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "reelgan/abc.hpp"
#include "reelgan/gan.hpp"
#include "reelgan/grid.hpp"
#include "reelgan/metrics.hpp"
#include "reelgan/tsne.hpp"

namespace py = pybind11;

using reelgan::grid::kCols;
using reelgan::grid::kRows;
using reelgan::grid::kSlots;
using reelgan::grid::MelodyGrid;

namespace {

std::vector<MelodyGrid> array_to_grids(const py::array_t<float>& array) {
  auto buf = array.request();
  std::size_t count = 0;
  if (buf.ndim == 3 && buf.shape[1] == kRows && buf.shape[2] == kCols) {
    count = static_cast<std::size_t>(buf.shape[0]);
  } else if (buf.ndim == 2 && buf.shape[0] == kRows && buf.shape[1] == kCols) {
    count = 1;
  } else {
    throw std::invalid_argument("expected an array of shape (n, 4, 64) or (4, 64)");
  }
  auto contiguous = py::array_t<float, py::array::c_style | py::array::forcecast>(array);
  const float* src = contiguous.data();
  std::vector<MelodyGrid> grids(count);
  for (std::size_t i = 0; i < count; ++i)
    std::memcpy(grids[i].values.data(), src + i * kSlots, sizeof(float) * kSlots);
  return grids;
}

py::array_t<float> grids_to_array(const std::vector<MelodyGrid>& grids) {
  py::array_t<float> out({static_cast<py::ssize_t>(grids.size()),
                          static_cast<py::ssize_t>(kRows), static_cast<py::ssize_t>(kCols)});
  float* dst = out.mutable_data();
  for (std::size_t i = 0; i < grids.size(); ++i)
    std::memcpy(dst + i * kSlots, grids[i].values.data(), sizeof(float) * kSlots);
  return out;
}

}  // namespace

PYBIND11_MODULE(_reelgan, m) {
  m.doc() = "Irish reel curation, grid encoding, adversarial training and evaluation";

  m.def(
      "curate",
      [](const std::string& corpus_text, int bars, bool transpose) {
        auto blocks = reelgan::abc::split_tune_blocks(corpus_text);
        reelgan::abc::CurationConfig cfg;
        cfg.required_bar_count = bars;
        cfg.transpose = transpose;
        auto result = reelgan::abc::filter_corpus(blocks, cfg);
        py::dict report;
        report["total_seen"] = result.report.total_seen;
        report["kept"] = result.report.kept;
        py::dict rejected;
        for (const auto& [reason, count] : result.report.rejected_by_reason)
          rejected[reelgan::abc::reason_name(reason)] = count;
        report["rejected"] = rejected;
        return py::make_tuple(reelgan::abc::corpus_to_abc(result.kept), report);
      },
      py::arg("corpus_text"), py::arg("bars") = 16, py::arg("transpose") = true,
      "Filter raw ABC text into curated reels; returns (curated_abc, report_dict)");

  m.def(
      "encode",
      [](const std::string& corpus_text) {
        auto blocks = reelgan::abc::split_tune_blocks(corpus_text);
        std::vector<MelodyGrid> grids;
        for (const auto& block : blocks) {
          auto parsed = reelgan::abc::parse_tune(block);
          if (!parsed.ok()) throw std::invalid_argument("tune failed to parse: " + parsed.error->detail);
          auto tune = *parsed.tune;
          tune.bars = reelgan::abc::unroll_repeats(tune.bars, parsed.repeats);
          grids.push_back(reelgan::grid::tune_to_grid(tune));
        }
        return grids_to_array(grids);
      },
      py::arg("corpus_text"), "Encode curated ABC text as an (n, 4, 64) grid array");

  m.def(
      "decode",
      [](const py::array_t<float>& array) {
        const auto table = reelgan::grid::ScaleTable::d_major_two_octaves();
        auto grids = array_to_grids(array);
        std::vector<reelgan::abc::Tune> tunes;
        for (std::size_t i = 0; i < grids.size(); ++i) {
          auto tune = reelgan::grid::grid_to_tune(grids[i], table);
          tune.header.source_id = std::to_string(i + 1);
          tunes.push_back(std::move(tune));
        }
        return reelgan::abc::corpus_to_abc(tunes);
      },
      py::arg("grids"), "Decode grids to ABC text (quantized to the D major scale)");

  m.def(
      "quantize_pitch",
      [](double value) {
        return reelgan::grid::quantize_pitch(value, reelgan::grid::ScaleTable::d_major_two_octaves());
      },
      py::arg("value"), "Nearest D-major scale MIDI pitch for a normalized value");

  m.def(
      "read_grids", [](const std::string& path) { return grids_to_array(reelgan::grid::read_grid_file(path)); },
      py::arg("path"), "Read a binary grid dataset");

  m.def(
      "write_grids",
      [](const std::string& path, const py::array_t<float>& array) {
        reelgan::grid::write_grid_file(path, array_to_grids(array));
      },
      py::arg("path"), py::arg("grids"), "Write a binary grid dataset");

  m.def(
      "discrete_frechet",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return reelgan::metrics::discrete_frechet(a, b);
      },
      py::arg("a"), py::arg("b"), "Discrete Frechet distance between two sequences");

  m.def(
      "phrase_profile",
      [](const py::array_t<float>& array) {
        auto grids = array_to_grids(array);
        if (grids.size() != 1) throw std::invalid_argument("expected one (4, 64) grid");
        auto profile = reelgan::metrics::phrase_profile(grids.front());
        return std::vector<double>(profile.distances.begin(), profile.distances.end());
      },
      py::arg("grid"), "Six phrase-pair Frechet distances of one grid");

  m.def(
      "distribution_profile",
      [](const py::array_t<float>& array, const std::string& normalize) {
        auto grids = array_to_grids(array);
        auto norm = normalize == "sum" ? reelgan::metrics::ProfileNormalization::divide_by_sum
                                       : reelgan::metrics::ProfileNormalization::divide_by_max;
        auto profile = reelgan::metrics::distribution_profile(grids, norm);
        py::dict out;
        out["mean"] = std::vector<double>(profile.mean.distances.begin(),
                                          profile.mean.distances.end());
        out["normalized"] = std::vector<double>(profile.normalized.distances.begin(),
                                                profile.normalized.distances.end());
        return out;
      },
      py::arg("grids"), py::arg("normalize") = "max",
      "Mean and normalized phrase-pair distance profile over a grid set");

  m.def(
      "note_histogram",
      [](const py::array_t<float>& array) {
        auto grids = array_to_grids(array);
        auto hist = reelgan::metrics::note_histogram(
            grids, reelgan::grid::ScaleTable::d_major_two_octaves());
        return std::vector<std::int64_t>(hist.counts.begin(), hist.counts.end());
      },
      py::arg("grids"), "Per-MIDI-pitch slot counts after quantization");

  m.def(
      "tsne",
      [](const py::array_t<double>& array, double perplexity, int iterations,
         std::uint64_t seed) {
        auto buf = array.request();
        if (buf.ndim != 2) throw std::invalid_argument("expected an (n, d) array");
        auto contiguous =
            py::array_t<double, py::array::c_style | py::array::forcecast>(array);
        const auto n = static_cast<std::size_t>(buf.shape[0]);
        const auto dim = static_cast<std::size_t>(buf.shape[1]);
        std::vector<std::vector<double>> points(n, std::vector<double>(dim));
        for (std::size_t i = 0; i < n; ++i)
          std::memcpy(points[i].data(), contiguous.data() + i * dim, sizeof(double) * dim);
        reelgan::tsne::TsneConfig cfg;
        cfg.perplexity = perplexity;
        cfg.iterations = iterations;
        cfg.seed = seed;
        auto result = reelgan::tsne::tsne_embed(points, cfg);
        py::array_t<double> embedding(
            {static_cast<py::ssize_t>(result.embedding.size()), static_cast<py::ssize_t>(2)});
        double* dst = embedding.mutable_data();
        for (std::size_t i = 0; i < result.embedding.size(); ++i) {
          dst[2 * i] = result.embedding[i][0];
          dst[2 * i + 1] = result.embedding[i][1];
        }
        return py::make_tuple(embedding, result.kl_trace, result.max_entropy_error_bits);
      },
      py::arg("points"), py::arg("perplexity") = 50.0, py::arg("iterations") = 1000,
      py::arg("seed") = 0,
      "Exact t-SNE to 2D; returns (embedding, kl_trace, max_entropy_error_bits)");

  m.def(
      "train",
      [](const py::array_t<float>& array, int epochs, int batch, std::uint64_t seed,
         const std::string& out_dir, bool miniature) {
        auto grids = array_to_grids(array);
        reelgan::nn::RandomSource init_rng(reelgan::nn::derive_seed(seed, 0, 0));
        auto dspec = miniature ? reelgan::gan::miniature_discriminator_spec()
                               : reelgan::gan::default_discriminator_spec();
        auto gspec = miniature ? reelgan::gan::miniature_generator_spec()
                               : reelgan::gan::default_generator_spec();
        reelgan::gan::Discriminator<float> d(dspec, init_rng);
        reelgan::gan::Generator<float> g(gspec, init_rng);
        reelgan::gan::TrainConfig cfg;
        cfg.batch_size = batch;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.out_dir = out_dir;
        reelgan::nn::AdamState<float> d_opt(cfg.d_adam), g_opt(cfg.g_adam);
        auto result = reelgan::gan::train(d, g, d_opt, g_opt, grids, cfg);
        std::vector<std::vector<double>> losses;
        for (const auto& row : result.losses)
          losses.push_back({static_cast<double>(row.epoch), static_cast<double>(row.step),
                            row.losses.d_real, row.losses.d_fake, row.losses.g});
        py::dict out;
        out["losses"] = losses;
        out["checkpoint"] = result.final_checkpoint_path;
        out["loss_csv"] = result.loss_csv_path;
        return out;
      },
      py::arg("grids"), py::arg("epochs") = 1, py::arg("batch") = 64, py::arg("seed") = 0,
      py::arg("out_dir") = "run", py::arg("miniature") = false,
      "Train the adversarial model on grids; writes checkpoints and returns losses");

  m.def(
      "sample",
      [](const std::string& checkpoint_path, int n, std::uint64_t seed, bool miniature) {
        reelgan::nn::RandomSource init_rng(reelgan::nn::derive_seed(seed, 0, 0));
        auto dspec = miniature ? reelgan::gan::miniature_discriminator_spec()
                               : reelgan::gan::default_discriminator_spec();
        auto gspec = miniature ? reelgan::gan::miniature_generator_spec()
                               : reelgan::gan::default_generator_spec();
        reelgan::gan::Discriminator<float> d(dspec, init_rng);
        reelgan::gan::Generator<float> g(gspec, init_rng);
        reelgan::nn::AdamState<float> d_opt, g_opt;
        reelgan::gan::restore_checkpoint(reelgan::gan::load_checkpoint(checkpoint_path), d, g,
                                         d_opt, g_opt);
        return grids_to_array(reelgan::gan::sample(g, n, seed));
      },
      py::arg("checkpoint"), py::arg("n") = 10, py::arg("seed") = 0,
      py::arg("miniature") = false, "Sample n grids from a checkpoint");
}
