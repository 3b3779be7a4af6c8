#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "reelgan/grid.hpp"
#include "reelgan/nn.hpp"
#include "reelgan/optim.hpp"
#include "reelgan/tensor.hpp"

namespace reelgan::gan {

struct TowerSpec {
  std::string label;
  nn::ConvSpec conv;
};

enum class TowerMerge { channel_concat, width_concat };

struct DiscriminatorSpec {
  std::vector<TowerSpec> towers;
  TowerMerge merge = TowerMerge::channel_concat;
  nn::ConvSpec head_conv;
  int head_dense_units = 1024;
  double leaky_alpha = 0.2;
  int input_rows = grid::kRows;
  int input_cols = grid::kCols;
};

/// Six towers over the 4x64 grid: one contiguous 2x9 patch plus five dilated
/// patterns spanning beats, bars and phrases; 32 filters each, merged by
/// channel concatenation, then conv(64, 3x3, stride 2x2, valid) -> dense 1024
/// -> dense 1 -> sigmoid. No batch normalization anywhere.
DiscriminatorSpec default_discriminator_spec();

/// Same topology shrunk for end-to-end gradient checks: 2 filters per conv,
/// 8 dense units.
DiscriminatorSpec miniature_discriminator_spec();

struct GeneratorSpec {
  int latent_dim = 100;
  int seed_rows = 2;
  int seed_cols = 32;
  int seed_channels = 256;
  /// Transposed-convolution stack; the last entry is the tanh output layer.
  std::vector<nn::ConvSpec> deconvs;
  /// Hidden layers are always normalized; this extends batch norm to the
  /// output layer as well.
  bool batch_norm_output = false;
};

/// Dense to a 2x32x256 seed, then deconv 128 and 64 (2x5, stride 1x1) and a
/// final deconv to one channel (2x5, stride 2x2) under tanh, restoring 4x64.
/// Batch normalization after the dense and each hidden deconv.
GeneratorSpec default_generator_spec();

/// Shrunk clone for gradient checks: latent 8, seed channels 2, 2 filters.
GeneratorSpec miniature_generator_spec();

struct AuditInfo {
  std::int64_t parameter_count = 0;
  int tower_count = 0;
  int dilated_tower_count = 0;
  /// Head conv input/output for one sample, [H,W,C].
  nn::Shape head_input_shape;
  nn::Shape head_output_shape;
  std::int64_t flatten_units = 0;
  int batch_norm_layers = 0;
};

AuditInfo audit_discriminator(const DiscriminatorSpec& spec);
AuditInfo audit_generator(const GeneratorSpec& spec);

namespace detail {

template <typename T>
nn::TensorPtr<T> init_weights(nn::Shape shape, nn::RandomSource& rng, double stddev) {
  auto t = nn::make_tensor<T>(std::move(shape), true);
  nn::fill_normal(*t, rng, stddev);
  return t;
}

template <typename T>
nn::TensorPtr<T> init_const(nn::Shape shape, T value) {
  auto t = nn::make_tensor<T>(std::move(shape), true);
  std::fill(t->v.begin(), t->v.end(), value);
  return t;
}

}  // namespace detail

template <typename T>
class Discriminator {
 public:
  DiscriminatorSpec spec;
  std::vector<nn::TensorPtr<T>> tower_w, tower_b;
  nn::TensorPtr<T> head_w, head_b, fc_w, fc_b, out_w, out_b;

  /// Weights drawn normal(0, init_stddev) in declaration order, biases zero.
  Discriminator(const DiscriminatorSpec& s, nn::RandomSource& rng, double init_stddev = 0.02)
      : spec(s) {
    const AuditInfo info = audit_discriminator(s);
    for (const auto& tower : s.towers) {
      tower_w.push_back(detail::init_weights<T>(
          {tower.conv.kernel_rows, tower.conv.kernel_cols, 1, tower.conv.filters}, rng,
          init_stddev));
      tower_b.push_back(detail::init_const<T>({tower.conv.filters}, T(0)));
    }
    head_w = detail::init_weights<T>({s.head_conv.kernel_rows, s.head_conv.kernel_cols,
                                      info.head_input_shape[2], s.head_conv.filters},
                                     rng, init_stddev);
    head_b = detail::init_const<T>({s.head_conv.filters}, T(0));
    fc_w = detail::init_weights<T>({static_cast<int>(info.flatten_units), s.head_dense_units},
                                   rng, init_stddev);
    fc_b = detail::init_const<T>({s.head_dense_units}, T(0));
    out_w = detail::init_weights<T>({s.head_dense_units, 1}, rng, init_stddev);
    out_b = detail::init_const<T>({1}, T(0));
  }

  /// [N, rows, cols, 1] -> [N] probabilities in (0,1).
  nn::TensorPtr<T> forward(nn::Tape<T>& tape, const nn::TensorPtr<T>& input) const {
    if (input->ndim() != 4 || input->dim(1) != spec.input_rows ||
        input->dim(2) != spec.input_cols || input->dim(3) != 1)
      throw std::invalid_argument("discriminator: input must be [N," +
                                  std::to_string(spec.input_rows) + "," +
                                  std::to_string(spec.input_cols) + ",1]");
    const T alpha = static_cast<T>(spec.leaky_alpha);
    std::vector<nn::TensorPtr<T>> branches;
    branches.reserve(spec.towers.size());
    for (std::size_t i = 0; i < spec.towers.size(); ++i) {
      auto conv = nn::conv2d(tape, input, tower_w[i], tower_b[i], spec.towers[i].conv);
      branches.push_back(nn::leaky_relu(tape, conv, alpha));
    }
    auto merged = nn::concat(tape, branches, spec.merge == TowerMerge::channel_concat ? 3 : 2);
    auto head = nn::leaky_relu(tape, nn::conv2d(tape, merged, head_w, head_b, spec.head_conv),
                               alpha);
    auto flat = nn::flatten(tape, head);
    auto hidden = nn::leaky_relu(tape, nn::dense(tape, flat, fc_w, fc_b), alpha);
    auto logits = nn::dense(tape, hidden, out_w, out_b);
    auto probs = nn::sigmoid(tape, logits);
    return nn::reshape(tape, probs, {input->dim(0)});
  }

  std::vector<std::pair<std::string, nn::TensorPtr<T>>> named_parameters() const {
    std::vector<std::pair<std::string, nn::TensorPtr<T>>> out;
    for (std::size_t i = 0; i < tower_w.size(); ++i) {
      out.emplace_back("d.tower" + std::to_string(i) + ".w", tower_w[i]);
      out.emplace_back("d.tower" + std::to_string(i) + ".b", tower_b[i]);
    }
    out.emplace_back("d.head.w", head_w);
    out.emplace_back("d.head.b", head_b);
    out.emplace_back("d.fc.w", fc_w);
    out.emplace_back("d.fc.b", fc_b);
    out.emplace_back("d.out.w", out_w);
    out.emplace_back("d.out.b", out_b);
    return out;
  }

  std::vector<nn::TensorPtr<T>> parameters() const {
    std::vector<nn::TensorPtr<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
  }

  void set_requires_grad(bool value) const {
    for (auto& p : parameters()) p->requires_grad = value;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (auto& p : parameters()) n += p->size();
    return n;
  }
};

template <typename T>
class Generator {
 public:
  GeneratorSpec spec;
  nn::TensorPtr<T> dense_w, dense_b;
  nn::TensorPtr<T> dense_bn_gamma, dense_bn_beta;
  nn::BatchNormState<T> dense_bn_state;
  std::vector<nn::TensorPtr<T>> deconv_w, deconv_b;
  /// Entries are null for layers without batch norm (the output layer unless
  /// batch_norm_output is set).
  std::vector<nn::TensorPtr<T>> bn_gamma, bn_beta;
  std::vector<nn::BatchNormState<T>> bn_state;

  Generator(const GeneratorSpec& s, nn::RandomSource& rng, double init_stddev = 0.02)
      : spec(s) {
    const int seed_units = s.seed_rows * s.seed_cols * s.seed_channels;
    dense_w = detail::init_weights<T>({s.latent_dim, seed_units}, rng, init_stddev);
    dense_b = detail::init_const<T>({seed_units}, T(0));
    dense_bn_gamma = detail::init_const<T>({seed_units}, T(1));
    dense_bn_beta = detail::init_const<T>({seed_units}, T(0));
    dense_bn_state = nn::BatchNormState<T>(seed_units);
    int channels_in = s.seed_channels;
    for (std::size_t i = 0; i < s.deconvs.size(); ++i) {
      const auto& conv = s.deconvs[i];
      deconv_w.push_back(detail::init_weights<T>(
          {conv.kernel_rows, conv.kernel_cols, conv.filters, channels_in}, rng, init_stddev));
      deconv_b.push_back(detail::init_const<T>({conv.filters}, T(0)));
      if (layer_has_bn(i)) {
        bn_gamma.push_back(detail::init_const<T>({conv.filters}, T(1)));
        bn_beta.push_back(detail::init_const<T>({conv.filters}, T(0)));
        bn_state.emplace_back(conv.filters);
      } else {
        bn_gamma.push_back(nullptr);
        bn_beta.push_back(nullptr);
        bn_state.emplace_back(0);
      }
      channels_in = conv.filters;
    }
  }

  bool layer_has_bn(std::size_t layer) const {
    return layer + 1 < spec.deconvs.size() || spec.batch_norm_output;
  }

  /// [N, latent_dim] -> [N, rows, cols, 1] in (-1,1). Train mode uses batch
  /// statistics and updates running stats; infer mode reads running stats.
  nn::TensorPtr<T> forward(nn::Tape<T>& tape, const nn::TensorPtr<T>& z, nn::NnMode mode) {
    if (z->ndim() != 2 || z->dim(1) != spec.latent_dim)
      throw std::invalid_argument("generator: latent must be [N," +
                                  std::to_string(spec.latent_dim) + "]");
    auto h = nn::dense(tape, z, dense_w, dense_b);
    h = nn::batch_norm(tape, h, dense_bn_gamma, dense_bn_beta, dense_bn_state, mode);
    h = nn::relu(tape, h);
    auto grid4 = nn::reshape(tape, h, {z->dim(0), spec.seed_rows, spec.seed_cols,
                                       spec.seed_channels});
    for (std::size_t i = 0; i < spec.deconvs.size(); ++i) {
      grid4 = nn::conv2d_transpose(tape, grid4, deconv_w[i], deconv_b[i], spec.deconvs[i]);
      if (layer_has_bn(i))
        grid4 = nn::batch_norm(tape, grid4, bn_gamma[i], bn_beta[i], bn_state[i], mode);
      const bool last = i + 1 == spec.deconvs.size();
      grid4 = last ? nn::tanh_act(tape, grid4) : nn::relu(tape, grid4);
    }
    return grid4;
  }

  std::vector<std::pair<std::string, nn::TensorPtr<T>>> named_parameters() const {
    std::vector<std::pair<std::string, nn::TensorPtr<T>>> out;
    out.emplace_back("g.dense.w", dense_w);
    out.emplace_back("g.dense.b", dense_b);
    out.emplace_back("g.dense.bn.gamma", dense_bn_gamma);
    out.emplace_back("g.dense.bn.beta", dense_bn_beta);
    for (std::size_t i = 0; i < deconv_w.size(); ++i) {
      const std::string base = "g.deconv" + std::to_string(i);
      out.emplace_back(base + ".w", deconv_w[i]);
      out.emplace_back(base + ".b", deconv_b[i]);
      if (bn_gamma[i]) {
        out.emplace_back(base + ".bn.gamma", bn_gamma[i]);
        out.emplace_back(base + ".bn.beta", bn_beta[i]);
      }
    }
    return out;
  }

  std::vector<nn::TensorPtr<T>> parameters() const {
    std::vector<nn::TensorPtr<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
  }

  void set_requires_grad(bool value) const {
    for (auto& p : parameters()) p->requires_grad = value;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (auto& p : parameters()) n += p->size();
    return n;
  }
};

/// Draws a [batch, latent_dim] standard-normal latent tensor.
template <typename T>
nn::TensorPtr<T> draw_latents(int batch, int latent_dim, nn::RandomSource& rng) {
  auto z = nn::make_tensor<T>({batch, latent_dim});
  for (auto& v : z->v) v = static_cast<T>(rng.normal());
  return z;
}

/// Packs grids into a [N,4,64,1] batch tensor.
nn::TensorPtr<float> grids_to_tensor(const std::vector<const grid::MelodyGrid*>& batch);

/// Extracts sample `row` of a [N,4,64,1] tensor as a grid.
grid::MelodyGrid tensor_row_to_grid(const nn::Tensor<float>& batch, int row);

struct TrainConfig {
  int batch_size = 64;
  int epochs = 1;
  std::uint64_t seed = 0;
  nn::AdamConfig d_adam{};
  nn::AdamConfig g_adam{};
  int checkpoint_cadence = 100;
  std::string out_dir = ".";
};

struct StepLosses {
  double d_real = 0.0;
  double d_fake = 0.0;
  double g = 0.0;
};

/// One adversarial step: discriminator update on the real chunk (label 1)
/// and a detached fake batch (label 0), then a generator update on fresh
/// fakes against label 1 (non-saturating). Fake batches always use
/// latent_batch samples regardless of the real chunk size.
StepLosses train_step(Discriminator<float>& d, Generator<float>& g,
                      nn::AdamState<float>& d_opt, nn::AdamState<float>& g_opt,
                      const std::vector<const grid::MelodyGrid*>& real_chunk, int latent_batch,
                      nn::RandomSource& rng);

struct LossRow {
  int epoch = 0;
  int step = 0;
  StepLosses losses;
};

struct TrainResult {
  std::vector<LossRow> losses;
  std::string loss_csv_path;
  std::string final_checkpoint_path;
  int epochs_completed = 0;
};

/// Runs epochs of seeded shuffled minibatches from start_epoch to
/// config.epochs. Shuffle and latent streams are re-derived from
/// (seed, epoch) so a resumed run reproduces an uninterrupted one. Writes
/// out_dir/losses.csv (appending when start_epoch > 0), a checkpoint every
/// checkpoint_cadence epochs and checkpoint_final.rgan at the end. A dataset
/// smaller than one batch trains as a single chunk with a warning.
TrainResult train(Discriminator<float>& d, Generator<float>& g, nn::AdamState<float>& d_opt,
                  nn::AdamState<float>& g_opt, const std::vector<grid::MelodyGrid>& dataset,
                  const TrainConfig& config, int start_epoch = 0, std::ostream* log = nullptr);

/// Draws n latents and runs the generator in inference mode.
std::vector<grid::MelodyGrid> sample(Generator<float>& g, int n, std::uint64_t seed,
                                     int batch = 64);

/// Named-tensor container mirroring the on-disk layout: a text manifest over
/// a float32 blob plus named scalars.
struct Checkpoint {
  std::map<std::string, std::pair<nn::Shape, std::vector<float>>> tensors;
  std::map<std::string, double> scalars;
};

/// File format: magic "RGAN", u32 version, u32 manifest byte length, text
/// manifest (one `tensor <name> <ndim> <dims..> <offset> <count>` or
/// `scalar <name> <value>` per line), then the little-endian float32 blob.
/// Offsets must partition the blob exactly.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Discriminator<float>& d, const Generator<float>& g,
                           const nn::AdamState<float>& d_opt, const nn::AdamState<float>& g_opt,
                           const TrainConfig& config, int epoch);

/// Restores parameters, batch-norm running stats and optimizer state;
/// returns the stored epoch. Throws on any missing name or shape mismatch.
int restore_checkpoint(const Checkpoint& checkpoint, Discriminator<float>& d,
                       Generator<float>& g, nn::AdamState<float>& d_opt,
                       nn::AdamState<float>& g_opt);

}  // namespace reelgan::gan
