#pragma once

#include <array>
#include <cassert>

#include "reelgan/tensor.hpp"

namespace reelgan::nn {

enum class Padding { same_zero, valid };

/// Convolution geometry. `filters` is the output channel count; effective
/// kernel extent per axis is kernel + (kernel-1)*(dilation-1).
struct ConvSpec {
  int kernel_rows = 1, kernel_cols = 1;
  int dilation_rows = 1, dilation_cols = 1;
  int stride_rows = 1, stride_cols = 1;
  Padding padding = Padding::same_zero;
  int filters = 1;

  int extent_rows() const { return kernel_rows + (kernel_rows - 1) * (dilation_rows - 1); }
  int extent_cols() const { return kernel_cols + (kernel_cols - 1) * (dilation_cols - 1); }

  void validate() const {
    if (kernel_rows < 1 || kernel_cols < 1 || dilation_rows < 1 || dilation_cols < 1 ||
        stride_rows < 1 || stride_cols < 1 || filters < 1)
      throw std::invalid_argument("ConvSpec: all entries must be positive");
  }
};

namespace detail {

struct ConvGeometry {
  int out_rows = 0, out_cols = 0;
  int pad_top = 0, pad_left = 0;
};

inline ConvGeometry conv_geometry(int in_rows, int in_cols, const ConvSpec& s) {
  ConvGeometry g;
  int er = s.extent_rows(), ec = s.extent_cols();
  if (s.padding == Padding::same_zero) {
    g.out_rows = (in_rows + s.stride_rows - 1) / s.stride_rows;
    g.out_cols = (in_cols + s.stride_cols - 1) / s.stride_cols;
    int pr = std::max((g.out_rows - 1) * s.stride_rows + er - in_rows, 0);
    int pc = std::max((g.out_cols - 1) * s.stride_cols + ec - in_cols, 0);
    g.pad_top = pr / 2;
    g.pad_left = pc / 2;
    if (er > in_rows + pr || ec > in_cols + pc)
      throw std::invalid_argument("conv2d: kernel extent exceeds padded input");
  } else {
    if (er > in_rows || ec > in_cols)
      throw std::invalid_argument("conv2d: kernel extent exceeds input under valid padding");
    g.out_rows = (in_rows - er) / s.stride_rows + 1;
    g.out_cols = (in_cols - ec) / s.stride_cols + 1;
  }
  return g;
}

// Padding the transposed op inherits from its forward-conv counterpart when
// out = in * stride ("same-style").
inline ConvGeometry conv_transpose_geometry(int in_rows, int in_cols, const ConvSpec& s) {
  ConvGeometry g;
  g.out_rows = in_rows * s.stride_rows;
  g.out_cols = in_cols * s.stride_cols;
  g.pad_top = std::max(s.kernel_rows - s.stride_rows, 0) / 2;
  g.pad_left = std::max(s.kernel_cols - s.stride_cols, 0) / 2;
  return g;
}

}  // namespace detail

/// 2-D cross-correlation with dilation over channels-last batches.
/// input [N,H,W,Cin], weights [kr,kc,Cin,F], bias [F] -> [N,H',W',F].
template <typename T>
TensorPtr<T> conv2d(Tape<T>& tape, const TensorPtr<T>& input, const TensorPtr<T>& weights,
                    const TensorPtr<T>& bias, const ConvSpec& spec) {
  spec.validate();
  if (input->ndim() != 4) throw std::invalid_argument("conv2d: input must be [N,H,W,C]");
  const int n_batch = input->dim(0), in_r = input->dim(1), in_c = input->dim(2), cin = input->dim(3);
  const int kr = spec.kernel_rows, kc = spec.kernel_cols, nf = spec.filters;
  if (weights->shape != Shape{kr, kc, cin, nf})
    throw std::invalid_argument("conv2d: weights must be [kr,kc,Cin,F], got " +
                                shape_to_string(weights->shape));
  if (bias->shape != Shape{nf}) throw std::invalid_argument("conv2d: bias must be [F]");
  const auto geo = detail::conv_geometry(in_r, in_c, spec);

  auto out = make_tensor<T>({n_batch, geo.out_rows, geo.out_cols, nf});
  const T* x = input->v.data();
  const T* w = weights->v.data();
  const auto xat = [=](int n, int r, int c) { return x + (((std::int64_t)n * in_r + r) * in_c + c) * cin; };
  const auto wat = [=](int i, int j) { return w + ((std::int64_t)i * kc + j) * (std::int64_t)cin * nf; };

  std::vector<double> acc(static_cast<std::size_t>(nf));
  T* o = out->v.data();
  for (int n = 0; n < n_batch; ++n)
    for (int oy = 0; oy < geo.out_rows; ++oy)
      for (int ox = 0; ox < geo.out_cols; ++ox) {
        for (int f = 0; f < nf; ++f) acc[f] = static_cast<double>(bias->v[f]);
        for (int i = 0; i < kr; ++i) {
          int iy = oy * spec.stride_rows + i * spec.dilation_rows - geo.pad_top;
          if (iy < 0 || iy >= in_r) continue;
          for (int j = 0; j < kc; ++j) {
            int ix = ox * spec.stride_cols + j * spec.dilation_cols - geo.pad_left;
            if (ix < 0 || ix >= in_c) continue;
            const T* xr = xat(n, iy, ix);
            const T* wr = wat(i, j);
            for (int c = 0; c < cin; ++c) {
              double xv = static_cast<double>(xr[c]);
              const T* wf = wr + (std::int64_t)c * nf;
              for (int f = 0; f < nf; ++f) acc[f] += xv * static_cast<double>(wf[f]);
            }
          }
        }
        for (int f = 0; f < nf; ++f) *o++ = static_cast<T>(acc[f]);
      }

  out->requires_grad = input->requires_grad || weights->requires_grad || bias->requires_grad;
  if (out->requires_grad) {
    auto geo_c = geo;
    tape.record([input, weights, bias, out, spec, geo_c, n_batch, in_r, in_c, cin, kr, kc, nf]() {
      if (out->g.empty()) return;
      const T* go = out->g.data();
      const auto gout = [&](int n, int r, int c) {
        return go + (((std::int64_t)n * geo_c.out_rows + r) * geo_c.out_cols + c) * nf;
      };
      const T* x = input->v.data();
      const auto xat = [&](int n, int r, int c) { return x + (((std::int64_t)n * in_r + r) * in_c + c) * cin; };
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (int f = 0; f < nf; ++f) {
          double acc = 0.0;
          const T* p = go + f;
          std::int64_t count = (std::int64_t)n_batch * geo_c.out_rows * geo_c.out_cols;
          for (std::int64_t k = 0; k < count; ++k) acc += static_cast<double>(p[k * nf]);
          bias->g[f] += static_cast<T>(acc);
        }
      }
      if (weights->requires_grad) {
        weights->ensure_grad();
        std::vector<double> dw(weights->v.size(), 0.0);
        for (int n = 0; n < n_batch; ++n)
          for (int oy = 0; oy < geo_c.out_rows; ++oy)
            for (int ox = 0; ox < geo_c.out_cols; ++ox) {
              const T* gr = gout(n, oy, ox);
              for (int i = 0; i < kr; ++i) {
                int iy = oy * spec.stride_rows + i * spec.dilation_rows - geo_c.pad_top;
                if (iy < 0 || iy >= in_r) continue;
                for (int j = 0; j < kc; ++j) {
                  int ix = ox * spec.stride_cols + j * spec.dilation_cols - geo_c.pad_left;
                  if (ix < 0 || ix >= in_c) continue;
                  const T* xr = xat(n, iy, ix);
                  double* dwr = dw.data() + ((std::int64_t)i * kc + j) * cin * nf;
                  for (int c = 0; c < cin; ++c) {
                    double xv = static_cast<double>(xr[c]);
                    double* dwf = dwr + (std::int64_t)c * nf;
                    for (int f = 0; f < nf; ++f) dwf[f] += xv * static_cast<double>(gr[f]);
                  }
                }
              }
            }
        for (std::size_t k = 0; k < dw.size(); ++k) weights->g[k] += static_cast<T>(dw[k]);
      }
      if (input->requires_grad) {
        input->ensure_grad();
        const T* w = weights->v.data();
        const auto wat = [&](int i, int j) { return w + ((std::int64_t)i * kc + j) * (std::int64_t)cin * nf; };
        for (int n = 0; n < n_batch; ++n)
          for (int iy = 0; iy < in_r; ++iy)
            for (int ix = 0; ix < in_c; ++ix) {
              T* gx = input->g.data() + (((std::int64_t)n * in_r + iy) * in_c + ix) * cin;
              for (int i = 0; i < kr; ++i) {
                int oy_num = iy + geo_c.pad_top - i * spec.dilation_rows;
                if (oy_num < 0 || oy_num % spec.stride_rows != 0) continue;
                int oy = oy_num / spec.stride_rows;
                if (oy >= geo_c.out_rows) continue;
                for (int j = 0; j < kc; ++j) {
                  int ox_num = ix + geo_c.pad_left - j * spec.dilation_cols;
                  if (ox_num < 0 || ox_num % spec.stride_cols != 0) continue;
                  int ox = ox_num / spec.stride_cols;
                  if (ox >= geo_c.out_cols) continue;
                  const T* gr = gout(n, oy, ox);
                  const T* wr = wat(i, j);
                  for (int c = 0; c < cin; ++c) {
                    double acc = 0.0;
                    const T* wf = wr + (std::int64_t)c * nf;
                    for (int f = 0; f < nf; ++f) acc += static_cast<double>(wf[f]) * static_cast<double>(gr[f]);
                    gx[c] += static_cast<T>(acc);
                  }
                }
              }
            }
      }
    });
  }
  return out;
}

/// Transposed convolution (gradient-of-convolution semantics): every input
/// pixel scatters a stride-spaced kernel stamp, overlaps summed. Output
/// spatial size is input*stride. input [N,H,W,C], weights [kr,kc,F,C],
/// bias [F] -> [N,H*sr,W*sc,F]. Dilation must be 1.
template <typename T>
TensorPtr<T> conv2d_transpose(Tape<T>& tape, const TensorPtr<T>& input, const TensorPtr<T>& weights,
                              const TensorPtr<T>& bias, const ConvSpec& spec) {
  spec.validate();
  if (spec.dilation_rows != 1 || spec.dilation_cols != 1)
    throw std::invalid_argument("conv2d_transpose: dilation must be 1");
  if (input->ndim() != 4) throw std::invalid_argument("conv2d_transpose: input must be [N,H,W,C]");
  const int n_batch = input->dim(0), in_r = input->dim(1), in_c = input->dim(2), cin = input->dim(3);
  const int kr = spec.kernel_rows, kc = spec.kernel_cols, nf = spec.filters;
  if (weights->shape != Shape{kr, kc, nf, cin})
    throw std::invalid_argument("conv2d_transpose: weights must be [kr,kc,F,C], got " +
                                shape_to_string(weights->shape));
  if (bias->shape != Shape{nf}) throw std::invalid_argument("conv2d_transpose: bias must be [F]");
  const auto geo = detail::conv_transpose_geometry(in_r, in_c, spec);

  auto out = make_tensor<T>({n_batch, geo.out_rows, geo.out_cols, nf});
  const T* x = input->v.data();
  const T* w = weights->v.data();
  const auto xat = [=](int n, int r, int c) { return x + (((std::int64_t)n * in_r + r) * in_c + c) * cin; };
  const auto wat = [=](int i, int j, int f) {
    return w + (((std::int64_t)i * kc + j) * nf + f) * cin;
  };

  T* o = out->v.data();
  for (int n = 0; n < n_batch; ++n)
    for (int h = 0; h < geo.out_rows; ++h)
      for (int wcol = 0; wcol < geo.out_cols; ++wcol)
        for (int f = 0; f < nf; ++f) {
          double acc = static_cast<double>(bias->v[f]);
          for (int i = 0; i < kr; ++i) {
            int ynum = h + geo.pad_top - i;
            if (ynum < 0 || ynum % spec.stride_rows != 0) continue;
            int y = ynum / spec.stride_rows;
            if (y >= in_r) continue;
            for (int j = 0; j < kc; ++j) {
              int xnum = wcol + geo.pad_left - j;
              if (xnum < 0 || xnum % spec.stride_cols != 0) continue;
              int xcol = xnum / spec.stride_cols;
              if (xcol >= in_c) continue;
              const T* xr = xat(n, y, xcol);
              const T* wr = wat(i, j, f);
              for (int c = 0; c < cin; ++c) acc += static_cast<double>(xr[c]) * static_cast<double>(wr[c]);
            }
          }
          *o++ = static_cast<T>(acc);
        }

  out->requires_grad = input->requires_grad || weights->requires_grad || bias->requires_grad;
  if (out->requires_grad) {
    auto geo_c = geo;
    tape.record([input, weights, bias, out, spec, geo_c, n_batch, in_r, in_c, cin, kr, kc, nf]() {
      if (out->g.empty()) return;
      const T* go = out->g.data();
      const auto gout = [&](int n, int r, int c) {
        return go + (((std::int64_t)n * geo_c.out_rows + r) * geo_c.out_cols + c) * nf;
      };
      const T* x = input->v.data();
      const auto xat = [&](int n, int r, int c) { return x + (((std::int64_t)n * in_r + r) * in_c + c) * cin; };
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (int f = 0; f < nf; ++f) {
          double acc = 0.0;
          const T* p = go + f;
          std::int64_t count = (std::int64_t)n_batch * geo_c.out_rows * geo_c.out_cols;
          for (std::int64_t k = 0; k < count; ++k) acc += static_cast<double>(p[k * nf]);
          bias->g[f] += static_cast<T>(acc);
        }
      }
      if (weights->requires_grad) {
        weights->ensure_grad();
        std::vector<double> dw(weights->v.size(), 0.0);
        // dw(i,j,f,c) = sum over input pixels of x(n,y,x,c) * gout(n, y*sr+i-pt, x*sc+j-pl, f)
        for (int n = 0; n < n_batch; ++n)
          for (int y = 0; y < in_r; ++y)
            for (int xcol = 0; xcol < in_c; ++xcol) {
              const T* xr = xat(n, y, xcol);
              for (int i = 0; i < kr; ++i) {
                int h = y * spec.stride_rows + i - geo_c.pad_top;
                if (h < 0 || h >= geo_c.out_rows) continue;
                for (int j = 0; j < kc; ++j) {
                  int wcol = xcol * spec.stride_cols + j - geo_c.pad_left;
                  if (wcol < 0 || wcol >= geo_c.out_cols) continue;
                  const T* gr = gout(n, h, wcol);
                  double* dwr = dw.data() + ((std::int64_t)i * kc + j) * nf * cin;
                  for (int f = 0; f < nf; ++f) {
                    double gv = static_cast<double>(gr[f]);
                    double* dwc = dwr + (std::int64_t)f * cin;
                    for (int c = 0; c < cin; ++c) dwc[c] += gv * static_cast<double>(xr[c]);
                  }
                }
              }
            }
        for (std::size_t k = 0; k < dw.size(); ++k) weights->g[k] += static_cast<T>(dw[k]);
      }
      if (input->requires_grad) {
        input->ensure_grad();
        const T* w = weights->v.data();
        const auto wat = [&](int i, int j, int f) {
          return w + (((std::int64_t)i * kc + j) * nf + f) * cin;
        };
        // dx(n,y,x,c) = sum over kernel taps of gout(n, y*sr+i-pt, x*sc+j-pl, f) * w(i,j,f,c)
        for (int n = 0; n < n_batch; ++n)
          for (int y = 0; y < in_r; ++y)
            for (int xcol = 0; xcol < in_c; ++xcol) {
              T* gx = input->g.data() + (((std::int64_t)n * in_r + y) * in_c + xcol) * cin;
              std::vector<double> acc(static_cast<std::size_t>(cin), 0.0);
              for (int i = 0; i < kr; ++i) {
                int h = y * spec.stride_rows + i - geo_c.pad_top;
                if (h < 0 || h >= geo_c.out_rows) continue;
                for (int j = 0; j < kc; ++j) {
                  int wcol2 = xcol * spec.stride_cols + j - geo_c.pad_left;
                  if (wcol2 < 0 || wcol2 >= geo_c.out_cols) continue;
                  const T* gr = gout(n, h, wcol2);
                  for (int f = 0; f < nf; ++f) {
                    double gv = static_cast<double>(gr[f]);
                    const T* wr = wat(i, j, f);
                    for (int c = 0; c < cin; ++c) acc[c] += gv * static_cast<double>(wr[c]);
                  }
                }
              }
              for (int c = 0; c < cin; ++c) gx[c] += static_cast<T>(acc[c]);
            }
      }
    });
  }
  return out;
}

/// Affine map: input [N,K] x weights [K,M] + bias [M] -> [N,M].
template <typename T>
TensorPtr<T> dense(Tape<T>& tape, const TensorPtr<T>& input, const TensorPtr<T>& weights,
                   const TensorPtr<T>& bias) {
  if (input->ndim() != 2) throw std::invalid_argument("dense: input must be [N,K]");
  const int n_batch = input->dim(0), k_in = input->dim(1);
  if (weights->ndim() != 2 || weights->dim(0) != k_in)
    throw std::invalid_argument("dense: weights must be [K,M] with K matching input, got " +
                                shape_to_string(weights->shape));
  const int m_out = weights->dim(1);
  if (bias->shape != Shape{m_out}) throw std::invalid_argument("dense: bias must be [M]");

  auto out = make_tensor<T>({n_batch, m_out});
  std::vector<double> acc(static_cast<std::size_t>(m_out));
  for (int n = 0; n < n_batch; ++n) {
    for (int m = 0; m < m_out; ++m) acc[m] = static_cast<double>(bias->v[m]);
    const T* xr = input->v.data() + (std::int64_t)n * k_in;
    for (int k = 0; k < k_in; ++k) {
      double xv = static_cast<double>(xr[k]);
      const T* wr = weights->v.data() + (std::int64_t)k * m_out;
      for (int m = 0; m < m_out; ++m) acc[m] += xv * static_cast<double>(wr[m]);
    }
    T* o = out->v.data() + (std::int64_t)n * m_out;
    for (int m = 0; m < m_out; ++m) o[m] = static_cast<T>(acc[m]);
  }

  out->requires_grad = input->requires_grad || weights->requires_grad || bias->requires_grad;
  if (out->requires_grad) {
    tape.record([input, weights, bias, out, n_batch, k_in, m_out]() {
      if (out->g.empty()) return;
      const T* go = out->g.data();
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (int m = 0; m < m_out; ++m) {
          double acc = 0.0;
          for (int n = 0; n < n_batch; ++n) acc += static_cast<double>(go[(std::int64_t)n * m_out + m]);
          bias->g[m] += static_cast<T>(acc);
        }
      }
      if (weights->requires_grad) {
        weights->ensure_grad();
        for (int k = 0; k < k_in; ++k)
          for (int m = 0; m < m_out; ++m) {
            double acc = 0.0;
            for (int n = 0; n < n_batch; ++n)
              acc += static_cast<double>(input->v[(std::int64_t)n * k_in + k]) *
                     static_cast<double>(go[(std::int64_t)n * m_out + m]);
            weights->g[(std::int64_t)k * m_out + m] += static_cast<T>(acc);
          }
      }
      if (input->requires_grad) {
        input->ensure_grad();
        for (int n = 0; n < n_batch; ++n)
          for (int k = 0; k < k_in; ++k) {
            double acc = 0.0;
            const T* wr = weights->v.data() + (std::int64_t)k * m_out;
            const T* gr = go + (std::int64_t)n * m_out;
            for (int m = 0; m < m_out; ++m) acc += static_cast<double>(wr[m]) * static_cast<double>(gr[m]);
            input->g[(std::int64_t)n * k_in + k] += static_cast<T>(acc);
          }
      }
    });
  }
  return out;
}

enum class NnMode { train, infer };

/// Per-channel running statistics owned by one batch-norm layer.
template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNormState(int channels = 0)
      : running_mean(static_cast<std::size_t>(channels), T(0)),
        running_var(static_cast<std::size_t>(channels), T(1)) {}
};

/// Normalizes over every axis except the last (channels-last convention), so
/// it serves both dense [N,C] and convolutional [N,H,W,C] activations.
/// Train mode uses batch statistics (biased variance) and folds them into the
/// running stats: running += momentum * (batch - running).
template <typename T>
TensorPtr<T> batch_norm(Tape<T>& tape, const TensorPtr<T>& input, const TensorPtr<T>& gamma,
                        const TensorPtr<T>& beta, BatchNormState<T>& state, NnMode mode,
                        T momentum = T(0.1), T eps = T(1e-5)) {
  if (input->ndim() < 2) throw std::invalid_argument("batch_norm: input must have a channel axis");
  const int channels = input->dim(input->ndim() - 1);
  const std::int64_t reduce = input->size() / channels;
  if (gamma->shape != Shape{channels} || beta->shape != Shape{channels})
    throw std::invalid_argument("batch_norm: gamma/beta must be [C]");
  if (static_cast<int>(state.running_mean.size()) != channels)
    throw std::invalid_argument("batch_norm: running stats have wrong channel count");
  if (mode == NnMode::train && input->dim(0) < 2)
    throw std::invalid_argument("batch_norm: train mode requires batch size >= 2");

  std::vector<double> mean(channels, 0.0), var(channels, 0.0);
  const T* x = input->v.data();
  if (mode == NnMode::train) {
    for (int c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::int64_t r = 0; r < reduce; ++r) acc += static_cast<double>(x[r * channels + c]);
      mean[c] = acc / static_cast<double>(reduce);
    }
    for (int c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::int64_t r = 0; r < reduce; ++r) {
        double d = static_cast<double>(x[r * channels + c]) - mean[c];
        acc += d * d;
      }
      var[c] = acc / static_cast<double>(reduce);
    }
    for (int c = 0; c < channels; ++c) {
      state.running_mean[c] += static_cast<T>(momentum * (static_cast<T>(mean[c]) - state.running_mean[c]));
      state.running_var[c] += static_cast<T>(momentum * (static_cast<T>(var[c]) - state.running_var[c]));
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      mean[c] = static_cast<double>(state.running_mean[c]);
      var[c] = static_cast<double>(state.running_var[c]);
    }
  }

  auto out = make_tensor<T>(input->shape);
  auto xhat = std::make_shared<std::vector<T>>(input->v.size());
  std::vector<double> inv_std(channels);
  for (int c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + static_cast<double>(eps));
  for (std::int64_t r = 0; r < reduce; ++r)
    for (int c = 0; c < channels; ++c) {
      double h = (static_cast<double>(x[r * channels + c]) - mean[c]) * inv_std[c];
      (*xhat)[r * channels + c] = static_cast<T>(h);
      out->v[r * channels + c] =
          static_cast<T>(h * static_cast<double>(gamma->v[c]) + static_cast<double>(beta->v[c]));
    }

  out->requires_grad = input->requires_grad || gamma->requires_grad || beta->requires_grad;
  if (out->requires_grad) {
    auto inv_std_c = std::make_shared<std::vector<double>>(std::move(inv_std));
    tape.record([input, gamma, beta, out, xhat, inv_std_c, mode, channels, reduce]() {
      if (out->g.empty()) return;
      const T* go = out->g.data();
      const T* xh = xhat->data();
      if (beta->requires_grad) {
        beta->ensure_grad();
        for (int c = 0; c < channels; ++c) {
          double acc = 0.0;
          for (std::int64_t r = 0; r < reduce; ++r) acc += static_cast<double>(go[r * channels + c]);
          beta->g[c] += static_cast<T>(acc);
        }
      }
      if (gamma->requires_grad) {
        gamma->ensure_grad();
        for (int c = 0; c < channels; ++c) {
          double acc = 0.0;
          for (std::int64_t r = 0; r < reduce; ++r)
            acc += static_cast<double>(go[r * channels + c]) * static_cast<double>(xh[r * channels + c]);
          gamma->g[c] += static_cast<T>(acc);
        }
      }
      if (input->requires_grad) {
        input->ensure_grad();
        if (mode == NnMode::train) {
          for (int c = 0; c < channels; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::int64_t r = 0; r < reduce; ++r) {
              double dy = static_cast<double>(go[r * channels + c]);
              sum_dy += dy;
              sum_dy_xhat += dy * static_cast<double>(xh[r * channels + c]);
            }
            double mean_dy = sum_dy / static_cast<double>(reduce);
            double mean_dy_xhat = sum_dy_xhat / static_cast<double>(reduce);
            double scale = static_cast<double>(gamma->v[c]) * (*inv_std_c)[c];
            for (std::int64_t r = 0; r < reduce; ++r) {
              double dy = static_cast<double>(go[r * channels + c]);
              double h = static_cast<double>(xh[r * channels + c]);
              input->g[r * channels + c] += static_cast<T>(scale * (dy - mean_dy - h * mean_dy_xhat));
            }
          }
        } else {
          for (int c = 0; c < channels; ++c) {
            double scale = static_cast<double>(gamma->v[c]) * (*inv_std_c)[c];
            for (std::int64_t r = 0; r < reduce; ++r)
              input->g[r * channels + c] += static_cast<T>(scale * static_cast<double>(go[r * channels + c]));
          }
        }
      }
    });
  }
  return out;
}

namespace detail {

template <typename T, typename Fwd, typename Bwd>
TensorPtr<T> elementwise(Tape<T>& tape, const TensorPtr<T>& x, Fwd fwd, Bwd bwd_from_in_out) {
  auto out = make_tensor<T>(x->shape);
  for (std::size_t i = 0; i < x->v.size(); ++i) out->v[i] = fwd(x->v[i]);
  out->requires_grad = x->requires_grad;
  if (out->requires_grad) {
    tape.record([x, out, bwd_from_in_out]() {
      if (out->g.empty() || !x->requires_grad) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < x->v.size(); ++i)
        x->g[i] += out->g[i] * bwd_from_in_out(x->v[i], out->v[i]);
    });
  }
  return out;
}

}  // namespace detail

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, const TensorPtr<T>& x) {
  return detail::elementwise(
      tape, x, [](T a) { return a > T(0) ? a : T(0); },
      [](T a, T) { return a > T(0) ? T(1) : T(0); });
}

template <typename T>
TensorPtr<T> leaky_relu(Tape<T>& tape, const TensorPtr<T>& x, T alpha = T(0.2)) {
  return detail::elementwise(
      tape, x, [alpha](T a) { return a > T(0) ? a : alpha * a; },
      [alpha](T a, T) { return a > T(0) ? T(1) : alpha; });
}

template <typename T>
TensorPtr<T> sigmoid(Tape<T>& tape, const TensorPtr<T>& x) {
  return detail::elementwise(
      tape, x, [](T a) { return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(a)))); },
      [](T, T o) { return o * (T(1) - o); });
}

template <typename T>
TensorPtr<T> tanh_act(Tape<T>& tape, const TensorPtr<T>& x) {
  return detail::elementwise(
      tape, x, [](T a) { return static_cast<T>(std::tanh(static_cast<double>(a))); },
      [](T, T o) { return T(1) - o * o; });
}

/// Mean binary cross-entropy over the batch; probabilities are clamped to
/// [1e-7, 1-1e-7] before the logs (gradient is zero in the clamped region).
template <typename T>
TensorPtr<T> bce_loss(Tape<T>& tape, const TensorPtr<T>& pred, const TensorPtr<T>& labels) {
  if (pred->size() != labels->size())
    throw std::invalid_argument("bce_loss: prediction and label sizes differ");
  const std::int64_t n = pred->size();
  if (n == 0) throw std::invalid_argument("bce_loss: empty batch");
  const double lo = 1e-7, hi = 1.0 - 1e-7;
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double p = std::clamp(static_cast<double>(pred->v[i]), lo, hi);
    double y = static_cast<double>(labels->v[i]);
    acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  auto out = make_tensor<T>({1});
  out->v[0] = static_cast<T>(acc / static_cast<double>(n));
  out->requires_grad = pred->requires_grad;
  if (out->requires_grad) {
    tape.record([pred, labels, out, n, lo, hi]() {
      if (out->g.empty() || !pred->requires_grad) return;
      pred->ensure_grad();
      double gscale = static_cast<double>(out->g[0]) / static_cast<double>(n);
      for (std::int64_t i = 0; i < n; ++i) {
        double p = static_cast<double>(pred->v[i]);
        if (p <= lo || p >= hi) continue;
        double y = static_cast<double>(labels->v[i]);
        pred->g[i] += static_cast<T>(gscale * (-y / p + (1.0 - y) / (1.0 - p)));
      }
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> sum(Tape<T>& tape, const TensorPtr<T>& x) {
  auto out = make_tensor<T>({1});
  double acc = 0.0;
  for (const T& a : x->v) acc += static_cast<double>(a);
  out->v[0] = static_cast<T>(acc);
  out->requires_grad = x->requires_grad;
  if (out->requires_grad) {
    tape.record([x, out]() {
      if (out->g.empty() || !x->requires_grad) return;
      x->ensure_grad();
      for (auto& gi : x->g) gi += out->g[0];
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> mean(Tape<T>& tape, const TensorPtr<T>& x) {
  auto out = sum(tape, x);
  auto scaled = make_tensor<T>({1});
  T inv = static_cast<T>(1.0 / static_cast<double>(x->size()));
  scaled->v[0] = out->v[0] * inv;
  scaled->requires_grad = out->requires_grad;
  if (scaled->requires_grad) {
    tape.record([out, scaled, inv]() {
      if (scaled->g.empty()) return;
      out->ensure_grad();
      out->g[0] += scaled->g[0] * inv;
    });
  }
  return scaled;
}

/// Copies into a new shape of equal size; gradients flow straight back.
template <typename T>
TensorPtr<T> reshape(Tape<T>& tape, const TensorPtr<T>& x, Shape shape) {
  if (shape_size(shape) != x->size())
    throw std::invalid_argument("reshape: size mismatch between " + shape_to_string(x->shape) +
                                " and " + shape_to_string(shape));
  auto out = make_tensor<T>(std::move(shape));
  out->v = x->v;
  out->requires_grad = x->requires_grad;
  if (out->requires_grad) {
    tape.record([x, out]() {
      if (out->g.empty() || !x->requires_grad) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < x->g.size(); ++i) x->g[i] += out->g[i];
    });
  }
  return out;
}

template <typename T>
TensorPtr<T> flatten(Tape<T>& tape, const TensorPtr<T>& x) {
  int n = x->dim(0);
  return reshape(tape, x, {n, static_cast<int>(x->size() / n)});
}

/// Elementwise sum of two same-shape tensors.
template <typename T>
TensorPtr<T> add(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape != b->shape)
    throw std::invalid_argument("add: shape mismatch between " + shape_to_string(a->shape) +
                                " and " + shape_to_string(b->shape));
  auto out = make_tensor<T>(a->shape);
  for (std::size_t i = 0; i < a->v.size(); ++i) out->v[i] = a->v[i] + b->v[i];
  out->requires_grad = a->requires_grad || b->requires_grad;
  if (out->requires_grad) {
    tape.record([a, b, out]() {
      if (out->g.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->g.size(); ++i) a->g[i] += out->g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->g.size(); ++i) b->g[i] += out->g[i];
      }
    });
  }
  return out;
}

/// Concatenates along `axis`; all other dimensions must agree.
template <typename T>
TensorPtr<T> concat(Tape<T>& tape, const std::vector<TensorPtr<T>>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape out_shape = parts[0]->shape;
  if (axis < 0 || axis >= static_cast<int>(out_shape.size()))
    throw std::invalid_argument("concat: axis out of range");
  int axis_total = 0;
  for (const auto& p : parts) {
    if (p->ndim() != static_cast<int>(out_shape.size()))
      throw std::invalid_argument("concat: rank mismatch");
    for (int d = 0; d < p->ndim(); ++d)
      if (d != axis && p->dim(d) != out_shape[d])
        throw std::invalid_argument("concat: non-axis dimension mismatch");
    axis_total += p->dim(axis);
  }
  out_shape[axis] = axis_total;
  auto out = make_tensor<T>(out_shape);

  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[d];
  for (int d = axis + 1; d < static_cast<int>(out_shape.size()); ++d) inner *= out_shape[d];

  std::int64_t offset = 0;
  bool rg = false;
  for (const auto& p : parts) {
    std::int64_t span = p->dim(axis) * inner;
    for (std::int64_t o = 0; o < outer; ++o)
      std::copy_n(p->v.data() + o * span, span,
                  out->v.data() + o * axis_total * inner + offset);
    offset += span;
    rg = rg || p->requires_grad;
  }
  out->requires_grad = rg;
  if (rg) {
    tape.record([parts, out, outer, inner, axis_total]() {
      if (out->g.empty()) return;
      std::int64_t offset = 0;
      for (const auto& p : parts) {
        std::int64_t span = p->v.size() / static_cast<std::size_t>(outer);
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::int64_t o = 0; o < outer; ++o) {
            const T* src = out->g.data() + o * axis_total * inner + offset;
            T* dst = p->g.data() + o * span;
            for (std::int64_t k = 0; k < span; ++k) dst[k] += src[k];
          }
        }
        offset += span;
      }
    });
  }
  return out;
}

}  // namespace reelgan::nn
