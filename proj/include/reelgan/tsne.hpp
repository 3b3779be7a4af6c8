#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace reelgan::tsne {

struct TsneConfig {
  double perplexity = 50.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iters = 250;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  int momentum_switch_iter = 250;
  std::uint64_t seed = 0;
};

struct TsneResult {
  std::vector<std::array<double, 2>> embedding;
  /// KL(P||Q) against the un-exaggerated P, one entry per iteration.
  std::vector<double> kl_trace;
  /// Worst | conditional entropy - log2(perplexity) | over all points, in
  /// bits, after the bandwidth search.
  double max_entropy_error_bits = 0.0;
};

/// Exact O(N^2) t-SNE to 2 dimensions. Per-point Gaussian bandwidths are
/// found by bracketed bisection so each conditional entropy matches
/// log2(perplexity); affinities are symmetrized and floored at 1e-12;
/// low-dimensional similarities use the Student-t kernel with one degree of
/// freedom. Gradient descent runs with the configured early exaggeration,
/// momentum switch and adaptive per-coordinate gains from a seeded Gaussian
/// init. Throws if any input is non-finite or N < 3 * perplexity.
TsneResult tsne_embed(const std::vector<std::vector<double>>& points, const TsneConfig& config);

}  // namespace reelgan::tsne
