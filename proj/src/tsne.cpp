#include "reelgan/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "reelgan/tensor.hpp"

namespace reelgan::tsne {

namespace {

constexpr double kProbFloor = 1e-12;

/// Row entropy (nats) and conditionals for one point at a given precision
/// beta = 1/(2 sigma^2). Distances are shifted by the row minimum before
/// exponentiation; the shift cancels in both the probabilities and the
/// entropy.
double row_entropy(const std::vector<double>& sq_dist, std::size_t self, double beta,
                   std::vector<double>& p_out) {
  const std::size_t n = sq_dist.size();
  double shift = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    if (j != self) shift = std::min(shift, sq_dist[j]);
  double sum = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == self) {
      p_out[j] = 0.0;
      continue;
    }
    double e = std::exp(-beta * (sq_dist[j] - shift));
    p_out[j] = e;
    sum += e;
    weighted += e * (sq_dist[j] - shift);
  }
  for (std::size_t j = 0; j < n; ++j)
    if (j != self) p_out[j] /= sum;
  return std::log(sum) + beta * weighted / sum;
}

}  // namespace

TsneResult tsne_embed(const std::vector<std::vector<double>>& points, const TsneConfig& config) {
  const std::size_t n = points.size();
  if (config.perplexity < 1.0) throw std::invalid_argument("tsne: perplexity must be >= 1");
  if (static_cast<double>(n) < 3.0 * config.perplexity)
    throw std::invalid_argument("tsne: need at least 3*perplexity points, got " +
                                std::to_string(n));
  if (config.iterations < 1) throw std::invalid_argument("tsne: iterations must be >= 1");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw std::invalid_argument("tsne: inconsistent point dimensions");
    for (double v : p)
      if (!std::isfinite(v)) throw std::invalid_argument("tsne: non-finite input");
  }

  std::vector<std::vector<double>> sq_dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        double d = points[i][k] - points[j][k];
        acc += d * d;
      }
      sq_dist[i][j] = acc;
      sq_dist[j][i] = acc;
    }

  // Per-point bandwidth search so each conditional entropy matches
  // log2(perplexity). Entropies are compared in bits; the 1e-5 internal
  // tolerance leaves headroom under the documented 1e-4 bound.
  const double target_bits = std::log2(config.perplexity);
  const double tol_bits = 1e-5;
  const double ln2 = std::log(2.0);
  TsneResult result;
  result.max_entropy_error_bits = 0.0;

  std::vector<std::vector<double>> p_cond(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    double err = 0.0;
    for (int it = 0; it < 64; ++it) {
      double h_bits = row_entropy(sq_dist[i], i, beta, p_cond[i]) / ln2;
      err = h_bits - target_bits;
      if (std::abs(err) < tol_bits) break;
      if (err > 0.0) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = beta_lo == 0.0 ? beta * 0.5 : 0.5 * (beta + beta_lo);
      }
    }
    result.max_entropy_error_bits = std::max(result.max_entropy_error_bits, std::abs(err));
  }

  // Symmetrized joint distribution, floored away from zero.
  std::vector<std::vector<double>> p(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      p[i][j] = std::max((p_cond[i][j] + p_cond[j][i]) / (2.0 * static_cast<double>(n)),
                         kProbFloor);
    }

  nn::RandomSource rng(config.seed);
  std::vector<std::array<double, 2>> y(n), inc(n, {0.0, 0.0}), gains(n, {1.0, 1.0});
  for (auto& yi : y) {
    yi[0] = rng.normal() * 1e-4;
    yi[1] = rng.normal() * 1e-4;
  }

  std::vector<std::vector<double>> num(n, std::vector<double>(n, 0.0));
  std::vector<std::array<double, 2>> grad(n);
  result.kl_trace.reserve(config.iterations);

  for (int iter = 1; iter <= config.iterations; ++iter) {
    const double p_scale = iter <= config.exaggeration_iters ? config.exaggeration : 1.0;
    const double momentum =
        iter <= config.momentum_switch_iter ? config.momentum_initial : config.momentum_final;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) {
          num[i][j] = 0.0;
          continue;
        }
        double dx = y[i][0] - y[j][0];
        double dy = y[i][1] - y[j][1];
        num[i][j] = 1.0 / (1.0 + dx * dx + dy * dy);
        z += num[i][j];
      }

    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = {0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        double q = std::max(num[i][j] / z, kProbFloor);
        double mult = (p_scale * p[i][j] - q) * num[i][j];
        grad[i][0] += 4.0 * mult * (y[i][0] - y[j][0]);
        grad[i][1] += 4.0 * mult * (y[i][1] - y[j][1]);
      }
    }

    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) {
        bool same_sign = (grad[i][d] > 0.0) == (inc[i][d] > 0.0);
        gains[i][d] = same_sign ? gains[i][d] * 0.8 : gains[i][d] + 0.2;
        gains[i][d] = std::max(gains[i][d], 0.01);
        inc[i][d] = momentum * inc[i][d] - config.learning_rate * gains[i][d] * grad[i][d];
        y[i][d] += inc[i][d];
      }
      mean_x += y[i][0];
      mean_y += y[i][1];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    for (auto& yi : y) {
      yi[0] -= mean_x;
      yi[1] -= mean_y;
    }

    // KL against the true (un-exaggerated) P.
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        double q = std::max(num[i][j] / z, kProbFloor);
        kl += p[i][j] * std::log(p[i][j] / q);
      }
    result.kl_trace.push_back(kl);
  }

  result.embedding = std::move(y);
  return result;
}

}  // namespace reelgan::tsne
