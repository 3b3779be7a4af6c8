#include "reelgan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace reelgan::gan {

namespace {

nn::ConvSpec tower_conv(int kr, int kc, int dr, int dc, int filters) {
  nn::ConvSpec s;
  s.kernel_rows = kr;
  s.kernel_cols = kc;
  s.dilation_rows = dr;
  s.dilation_cols = dc;
  s.stride_rows = 1;
  s.stride_cols = 1;
  s.padding = nn::Padding::same_zero;
  s.filters = filters;
  return s;
}

DiscriminatorSpec discriminator_spec_with(int tower_filters, int head_filters, int dense_units) {
  DiscriminatorSpec spec;
  spec.towers = {
      {"patch2x9", tower_conv(2, 9, 1, 1, tower_filters)},
      {"beat1x3", tower_conv(1, 3, 1, 4, tower_filters)},
      {"bar1x3", tower_conv(1, 3, 1, 16, tower_filters)},
      {"column4x1", tower_conv(4, 1, 1, 1, tower_filters)},
      {"phrase2x3", tower_conv(2, 3, 2, 16, tower_filters)},
      {"beat2x5", tower_conv(2, 5, 1, 4, tower_filters)},
  };
  spec.merge = TowerMerge::channel_concat;
  nn::ConvSpec head;
  head.kernel_rows = 3;
  head.kernel_cols = 3;
  head.stride_rows = 2;
  head.stride_cols = 2;
  head.padding = nn::Padding::valid;
  head.filters = head_filters;
  spec.head_conv = head;
  spec.head_dense_units = dense_units;
  return spec;
}

GeneratorSpec generator_spec_with(int latent_dim, int seed_channels, int f1, int f2) {
  GeneratorSpec spec;
  spec.latent_dim = latent_dim;
  spec.seed_rows = 2;
  spec.seed_cols = 32;
  spec.seed_channels = seed_channels;
  auto deconv = [](int filters, int sr, int sc) {
    nn::ConvSpec s;
    s.kernel_rows = 2;
    s.kernel_cols = 5;
    s.stride_rows = sr;
    s.stride_cols = sc;
    s.padding = nn::Padding::same_zero;
    s.filters = filters;
    return s;
  };
  spec.deconvs = {deconv(f1, 1, 1), deconv(f2, 1, 1), deconv(1, 2, 2)};
  return spec;
}

}  // namespace

DiscriminatorSpec default_discriminator_spec() { return discriminator_spec_with(32, 64, 1024); }

DiscriminatorSpec miniature_discriminator_spec() { return discriminator_spec_with(2, 2, 8); }

GeneratorSpec default_generator_spec() { return generator_spec_with(100, 256, 128, 64); }

GeneratorSpec miniature_generator_spec() { return generator_spec_with(8, 2, 2, 2); }

AuditInfo audit_discriminator(const DiscriminatorSpec& spec) {
  if (spec.towers.empty()) throw std::invalid_argument("audit: discriminator needs towers");
  AuditInfo info;
  info.tower_count = static_cast<int>(spec.towers.size());
  std::int64_t params = 0;
  int merged_rows = -1, merged_cols = 0, merged_channels = 0;
  for (const auto& tower : spec.towers) {
    const auto& c = tower.conv;
    if (c.dilation_rows > 1 || c.dilation_cols > 1) info.dilated_tower_count += 1;
    params += static_cast<std::int64_t>(c.kernel_rows) * c.kernel_cols * c.filters + c.filters;
    const auto geo = nn::detail::conv_geometry(spec.input_rows, spec.input_cols, c);
    if (merged_rows < 0) {
      merged_rows = geo.out_rows;
      merged_cols = geo.out_cols;
      merged_channels = c.filters;
    } else if (spec.merge == TowerMerge::channel_concat) {
      if (geo.out_rows != merged_rows || geo.out_cols != merged_cols)
        throw std::invalid_argument("audit: channel merge needs equal tower output sizes");
      merged_channels += c.filters;
    } else {
      if (geo.out_rows != merged_rows || c.filters != merged_channels)
        throw std::invalid_argument("audit: width merge needs equal rows and filters");
      merged_cols += geo.out_cols;
    }
  }
  info.head_input_shape = {merged_rows, merged_cols, merged_channels};
  const auto head_geo = nn::detail::conv_geometry(merged_rows, merged_cols, spec.head_conv);
  info.head_output_shape = {head_geo.out_rows, head_geo.out_cols, spec.head_conv.filters};
  params += static_cast<std::int64_t>(spec.head_conv.kernel_rows) * spec.head_conv.kernel_cols *
                merged_channels * spec.head_conv.filters +
            spec.head_conv.filters;
  info.flatten_units = static_cast<std::int64_t>(head_geo.out_rows) * head_geo.out_cols *
                       spec.head_conv.filters;
  params += info.flatten_units * spec.head_dense_units + spec.head_dense_units;
  params += spec.head_dense_units + 1;
  info.parameter_count = params;
  info.batch_norm_layers = 0;
  return info;
}

AuditInfo audit_generator(const GeneratorSpec& spec) {
  if (spec.deconvs.empty()) throw std::invalid_argument("audit: generator needs deconv layers");
  AuditInfo info;
  const std::int64_t seed_units =
      static_cast<std::int64_t>(spec.seed_rows) * spec.seed_cols * spec.seed_channels;
  std::int64_t params = static_cast<std::int64_t>(spec.latent_dim) * seed_units + seed_units;
  params += 2 * seed_units;
  info.batch_norm_layers = 1;
  info.head_input_shape = {spec.seed_rows, spec.seed_cols, spec.seed_channels};
  info.flatten_units = seed_units;
  int rows = spec.seed_rows, cols = spec.seed_cols, channels = spec.seed_channels;
  for (std::size_t i = 0; i < spec.deconvs.size(); ++i) {
    const auto& c = spec.deconvs[i];
    if (c.dilation_rows != 1 || c.dilation_cols != 1)
      throw std::invalid_argument("audit: transposed convolutions do not support dilation");
    params += static_cast<std::int64_t>(c.kernel_rows) * c.kernel_cols * c.filters * channels +
              c.filters;
    const bool has_bn = i + 1 < spec.deconvs.size() || spec.batch_norm_output;
    if (has_bn) {
      params += 2 * c.filters;
      info.batch_norm_layers += 1;
    }
    const auto geo = nn::detail::conv_transpose_geometry(rows, cols, c);
    rows = geo.out_rows;
    cols = geo.out_cols;
    channels = c.filters;
  }
  info.head_output_shape = {rows, cols, channels};
  info.parameter_count = params;
  return info;
}

nn::TensorPtr<float> grids_to_tensor(const std::vector<const grid::MelodyGrid*>& batch) {
  if (batch.empty()) throw std::invalid_argument("grids_to_tensor: empty batch");
  auto t = nn::make_tensor<float>(
      {static_cast<int>(batch.size()), grid::kRows, grid::kCols, 1});
  float* dst = t->v.data();
  for (const auto* g : batch) {
    if (g == nullptr) throw std::invalid_argument("grids_to_tensor: null grid");
    std::memcpy(dst, g->values.data(), sizeof(float) * grid::kSlots);
    dst += grid::kSlots;
  }
  return t;
}

grid::MelodyGrid tensor_row_to_grid(const nn::Tensor<float>& batch, int row) {
  if (batch.ndim() != 4 || batch.dim(1) != grid::kRows || batch.dim(2) != grid::kCols ||
      batch.dim(3) != 1)
    throw std::invalid_argument("tensor_row_to_grid: tensor must be [N,4,64,1]");
  if (row < 0 || row >= batch.dim(0))
    throw std::invalid_argument("tensor_row_to_grid: row out of range");
  grid::MelodyGrid out;
  std::memcpy(out.values.data(), batch.v.data() + static_cast<std::size_t>(row) * grid::kSlots,
              sizeof(float) * grid::kSlots);
  return out;
}

StepLosses train_step(Discriminator<float>& d, Generator<float>& g,
                      nn::AdamState<float>& d_opt, nn::AdamState<float>& g_opt,
                      const std::vector<const grid::MelodyGrid*>& real_chunk, int latent_batch,
                      nn::RandomSource& rng) {
  if (real_chunk.empty()) throw std::invalid_argument("train_step: empty real chunk");
  if (latent_batch < 2) throw std::invalid_argument("train_step: latent batch must be >= 2");
  StepLosses losses;

  // Fakes for the discriminator phase are generated off the training tape and
  // detached, so this pass never backpropagates into the generator.
  nn::TensorPtr<float> fake_detached;
  {
    nn::Tape<float> scratch;
    auto z = draw_latents<float>(latent_batch, g.spec.latent_dim, rng);
    fake_detached = nn::detach(g.forward(scratch, z, nn::NnMode::train));
  }

  {
    nn::Tape<float> tape;
    auto real = grids_to_tensor(real_chunk);
    auto p_real = d.forward(tape, real);
    auto p_fake = d.forward(tape, fake_detached);
    auto ones = nn::make_tensor<float>({static_cast<int>(real_chunk.size())});
    std::fill(ones->v.begin(), ones->v.end(), 1.0f);
    auto zeros = nn::make_tensor<float>({latent_batch});
    auto loss_real = nn::bce_loss(tape, p_real, ones);
    auto loss_fake = nn::bce_loss(tape, p_fake, zeros);
    auto total = nn::add(tape, loss_real, loss_fake);
    for (auto& p : d.parameters()) p->zero_grad();
    tape.backward(total);
    nn::adam_step(d_opt, d.parameters());
    losses.d_real = static_cast<double>(loss_real->v[0]);
    losses.d_fake = static_cast<double>(loss_fake->v[0]);
  }

  {
    // Non-saturating generator update on fresh latents; discriminator
    // parameters are frozen for this pass.
    d.set_requires_grad(false);
    nn::Tape<float> tape;
    auto z = draw_latents<float>(latent_batch, g.spec.latent_dim, rng);
    auto fake = g.forward(tape, z, nn::NnMode::train);
    auto p = d.forward(tape, fake);
    auto ones = nn::make_tensor<float>({latent_batch});
    std::fill(ones->v.begin(), ones->v.end(), 1.0f);
    auto loss_g = nn::bce_loss(tape, p, ones);
    for (auto& p2 : g.parameters()) p2->zero_grad();
    tape.backward(loss_g);
    nn::adam_step(g_opt, g.parameters());
    d.set_requires_grad(true);
    losses.g = static_cast<double>(loss_g->v[0]);
  }
  return losses;
}

namespace {

std::string format_loss(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

}  // namespace

TrainResult train(Discriminator<float>& d, Generator<float>& g, nn::AdamState<float>& d_opt,
                  nn::AdamState<float>& g_opt, const std::vector<grid::MelodyGrid>& dataset,
                  const TrainConfig& config, int start_epoch, std::ostream* log) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.batch_size < 2) throw std::invalid_argument("train: batch size must be >= 2");
  if (start_epoch < 0 || start_epoch > config.epochs)
    throw std::invalid_argument("train: start epoch out of range");

  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);

  if (d_opt.moments.empty()) d_opt.attach(d.parameters());
  if (g_opt.moments.empty()) g_opt.attach(g.parameters());

  TrainResult result;
  result.loss_csv_path = (fs::path(config.out_dir) / "losses.csv").string();
  std::ofstream csv(result.loss_csv_path,
                    start_epoch > 0 ? std::ios::app : std::ios::trunc);
  if (!csv) throw std::runtime_error("train: cannot open " + result.loss_csv_path);
  if (start_epoch == 0) csv << "epoch,step,d_loss_real,d_loss_fake,g_loss\n";

  const std::size_t n = dataset.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  if (n < batch && log)
    *log << "warning: dataset has " << n << " grids, smaller than batch size "
         << config.batch_size << "; training on single full-dataset chunks\n";

  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    nn::RandomSource shuffle_rng(nn::derive_seed(config.seed, static_cast<std::uint64_t>(epoch), 1));
    nn::RandomSource latent_rng(nn::derive_seed(config.seed, static_cast<std::uint64_t>(epoch), 2));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);

    int step = 0;
    std::size_t pos = 0;
    while (pos < n) {
      const std::size_t count = n < batch ? n : batch;
      if (pos + count > n) break;  // drop the tail partial chunk
      std::vector<const grid::MelodyGrid*> chunk(count);
      for (std::size_t i = 0; i < count; ++i) chunk[i] = &dataset[order[pos + i]];
      auto losses = train_step(d, g, d_opt, g_opt, chunk, config.batch_size, latent_rng);
      result.losses.push_back({epoch, step, losses});
      csv << epoch << ',' << step << ',' << format_loss(losses.d_real) << ','
          << format_loss(losses.d_fake) << ',' << format_loss(losses.g) << '\n';
      pos += count;
      step += 1;
    }
    csv.flush();

    const int completed = epoch + 1;
    if (log)
      *log << "epoch " << completed << "/" << config.epochs
           << " d_real=" << format_loss(result.losses.back().losses.d_real)
           << " d_fake=" << format_loss(result.losses.back().losses.d_fake)
           << " g=" << format_loss(result.losses.back().losses.g) << "\n";
    if (config.checkpoint_cadence > 0 && completed % config.checkpoint_cadence == 0 &&
        completed != config.epochs) {
      const auto path =
          (fs::path(config.out_dir) / ("checkpoint_epoch_" + std::to_string(completed) + ".rgan"))
              .string();
      save_checkpoint(path, make_checkpoint(d, g, d_opt, g_opt, config, completed));
    }
  }

  result.final_checkpoint_path = (fs::path(config.out_dir) / "checkpoint_final.rgan").string();
  save_checkpoint(result.final_checkpoint_path,
                  make_checkpoint(d, g, d_opt, g_opt, config, config.epochs));
  result.epochs_completed = config.epochs - start_epoch;
  return result;
}

std::vector<grid::MelodyGrid> sample(Generator<float>& g, int n, std::uint64_t seed, int batch) {
  if (n < 1) return {};
  if (batch < 1) throw std::invalid_argument("sample: batch must be >= 1");
  nn::RandomSource rng(seed);
  std::vector<grid::MelodyGrid> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int start = 0; start < n; start += batch) {
    const int count = std::min(batch, n - start);
    nn::Tape<float> tape;
    auto z = draw_latents<float>(count, g.spec.latent_dim, rng);
    auto y = g.forward(tape, z, nn::NnMode::infer);
    for (int i = 0; i < count; ++i) out.push_back(tensor_row_to_grid(*y, i));
  }
  return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'R', 'G', 'A', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

void append_u32(std::string& out, std::uint32_t value) {
  char buf[4];
  std::memcpy(buf, &value, 4);
  out.append(buf, 4);
}

std::uint32_t read_u32(const std::string& data, std::size_t offset) {
  std::uint32_t value = 0;
  std::memcpy(&value, data.data() + offset, 4);
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ostringstream manifest;
  std::uint64_t offset = 0;
  for (const auto& [name, entry] : checkpoint.tensors) {
    if (name.find_first_of(" \n") != std::string::npos)
      throw std::invalid_argument("checkpoint: tensor name contains whitespace: " + name);
    const auto& [shape, values] = entry;
    std::int64_t product = 1;
    for (int dim : shape) product *= dim;
    if (product != static_cast<std::int64_t>(values.size()))
      throw std::invalid_argument("checkpoint: shape does not match data for " + name);
    manifest << "tensor " << name << ' ' << shape.size();
    for (int dim : shape) manifest << ' ' << dim;
    manifest << ' ' << offset << ' ' << values.size() << '\n';
    offset += values.size();
  }
  for (const auto& [name, value] : checkpoint.scalars) {
    if (name.find_first_of(" \n") != std::string::npos)
      throw std::invalid_argument("checkpoint: scalar name contains whitespace: " + name);
    manifest << "scalar " << name << ' ' << std::setprecision(17) << value << '\n';
  }
  const std::string text = manifest.str();

  std::string header;
  header.append(kCheckpointMagic, 4);
  append_u32(header, kCheckpointVersion);
  append_u32(header, static_cast<std::uint32_t>(text.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, entry] : checkpoint.tensors) {
    const auto& values = entry.second;
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 12) throw std::runtime_error("checkpoint: truncated header in " + path);
  if (std::memcmp(data.data(), kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t version = read_u32(data, 4);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                             " in " + path);
  const std::uint32_t manifest_bytes = read_u32(data, 8);
  if (data.size() < 12 + static_cast<std::size_t>(manifest_bytes))
    throw std::runtime_error("checkpoint: truncated manifest in " + path);
  const std::string text = data.substr(12, manifest_bytes);
  const std::size_t blob_begin = 12 + manifest_bytes;
  if ((data.size() - blob_begin) % sizeof(float) != 0)
    throw std::runtime_error("checkpoint: blob size not a multiple of 4 in " + path);
  const std::size_t blob_count = (data.size() - blob_begin) / sizeof(float);

  Checkpoint checkpoint;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> extents;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string kind, name;
    fields >> kind >> name;
    if (kind == "tensor") {
      std::size_t ndim = 0;
      fields >> ndim;
      if (!fields || ndim > 8)
        throw std::runtime_error("checkpoint: malformed tensor line: " + line);
      nn::Shape shape(ndim);
      std::int64_t product = 1;
      for (std::size_t i = 0; i < ndim; ++i) {
        fields >> shape[i];
        product *= shape[i];
      }
      std::uint64_t offset = 0, count = 0;
      fields >> offset >> count;
      if (!fields) throw std::runtime_error("checkpoint: malformed tensor line: " + line);
      if (product < 0 || static_cast<std::uint64_t>(product) != count)
        throw std::runtime_error("checkpoint: count does not match shape for " + name);
      if (offset + count > blob_count)
        throw std::runtime_error("checkpoint: tensor " + name + " extends past the blob");
      if (checkpoint.tensors.count(name))
        throw std::runtime_error("checkpoint: duplicate tensor " + name);
      std::vector<float> values(count);
      std::memcpy(values.data(), data.data() + blob_begin + offset * sizeof(float),
                  count * sizeof(float));
      checkpoint.tensors[name] = {std::move(shape), std::move(values)};
      extents.emplace_back(offset, count);
    } else if (kind == "scalar") {
      double value = 0.0;
      fields >> value;
      if (!fields) throw std::runtime_error("checkpoint: malformed scalar line: " + line);
      if (checkpoint.scalars.count(name))
        throw std::runtime_error("checkpoint: duplicate scalar " + name);
      checkpoint.scalars[name] = value;
    } else {
      throw std::runtime_error("checkpoint: unknown manifest entry: " + line);
    }
  }

  std::sort(extents.begin(), extents.end());
  std::uint64_t cursor = 0;
  for (const auto& [offset, count] : extents) {
    if (offset != cursor)
      throw std::runtime_error("checkpoint: tensor offsets do not partition the blob");
    cursor += count;
  }
  if (cursor != blob_count)
    throw std::runtime_error("checkpoint: blob length does not match the manifest");
  return checkpoint;
}

namespace {

/// Running batch-norm statistics stored alongside the generator parameters.
std::vector<std::pair<std::string, const std::vector<float>*>> generator_stat_entries(
    const Generator<float>& g) {
  std::vector<std::pair<std::string, const std::vector<float>*>> out;
  out.emplace_back("g.dense.bn.mean", &g.dense_bn_state.running_mean);
  out.emplace_back("g.dense.bn.var", &g.dense_bn_state.running_var);
  for (std::size_t i = 0; i < g.bn_state.size(); ++i) {
    if (!g.layer_has_bn(i)) continue;
    const std::string base = "g.deconv" + std::to_string(i);
    out.emplace_back(base + ".bn.mean", &g.bn_state[i].running_mean);
    out.emplace_back(base + ".bn.var", &g.bn_state[i].running_var);
  }
  return out;
}

}  // namespace

Checkpoint make_checkpoint(const Discriminator<float>& d, const Generator<float>& g,
                           const nn::AdamState<float>& d_opt, const nn::AdamState<float>& g_opt,
                           const TrainConfig& config, int epoch) {
  Checkpoint c;
  auto put_params = [&](const auto& named, const nn::AdamState<float>& opt,
                        const char* which) {
    if (opt.moments.size() != named.size())
      throw std::invalid_argument(std::string("make_checkpoint: ") + which +
                                  " optimizer is not attached");
    for (std::size_t i = 0; i < named.size(); ++i) {
      const auto& [name, p] = named[i];
      c.tensors[name] = {p->shape, p->v};
      const int count = static_cast<int>(p->v.size());
      c.tensors["opt." + name + ".m"] = {{count}, opt.moments[i].m};
      c.tensors["opt." + name + ".v"] = {{count}, opt.moments[i].v};
    }
  };
  put_params(d.named_parameters(), d_opt, "discriminator");
  put_params(g.named_parameters(), g_opt, "generator");
  for (const auto& [name, stats] : generator_stat_entries(g))
    c.tensors[name] = {{static_cast<int>(stats->size())}, *stats};
  c.scalars["epoch"] = static_cast<double>(epoch);
  c.scalars["opt.d.step"] = static_cast<double>(d_opt.step);
  c.scalars["opt.g.step"] = static_cast<double>(g_opt.step);
  c.scalars["cfg.batch_size"] = static_cast<double>(config.batch_size);
  c.scalars["cfg.epochs"] = static_cast<double>(config.epochs);
  c.scalars["cfg.checkpoint_cadence"] = static_cast<double>(config.checkpoint_cadence);
  c.scalars["cfg.seed_lo"] = static_cast<double>(config.seed & 0xffffffffu);
  c.scalars["cfg.seed_hi"] = static_cast<double>(config.seed >> 32);
  return c;
}

int restore_checkpoint(const Checkpoint& checkpoint, Discriminator<float>& d, Generator<float>& g,
                       nn::AdamState<float>& d_opt, nn::AdamState<float>& g_opt) {
  auto take = [&](const std::string& name, const nn::Shape& want) -> const std::vector<float>& {
    auto it = checkpoint.tensors.find(name);
    if (it == checkpoint.tensors.end())
      throw std::runtime_error("checkpoint: missing tensor " + name);
    if (it->second.first != want)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    return it->second.second;
  };
  auto scalar = [&](const std::string& name) {
    auto it = checkpoint.scalars.find(name);
    if (it == checkpoint.scalars.end())
      throw std::runtime_error("checkpoint: missing scalar " + name);
    return it->second;
  };

  auto restore_params = [&](const auto& named, nn::AdamState<float>& opt) {
    for (const auto& [name, p] : named) p->v = take(name, p->shape);
    opt.moments.clear();
    opt.moments.reserve(named.size());
    for (const auto& [name, p] : named) {
      const nn::Shape flat{static_cast<int>(p->v.size())};
      opt.moments.push_back({take("opt." + name + ".m", flat), take("opt." + name + ".v", flat)});
    }
  };
  restore_params(d.named_parameters(), d_opt);
  restore_params(g.named_parameters(), g_opt);

  for (const auto& [name, stats] : generator_stat_entries(g)) {
    const auto& values = take(name, {static_cast<int>(stats->size())});
    *const_cast<std::vector<float>*>(stats) = values;
  }

  d_opt.step = static_cast<std::int64_t>(std::llround(scalar("opt.d.step")));
  g_opt.step = static_cast<std::int64_t>(std::llround(scalar("opt.g.step")));
  return static_cast<int>(std::llround(scalar("epoch")));
}

}  // namespace reelgan::gan
