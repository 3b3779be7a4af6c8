#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "reelgan/tensor.hpp"
#include "reelgan/tsne.hpp"

using namespace reelgan;

namespace {

std::vector<std::vector<double>> two_blobs(int per_cluster, int dim, double separation,
                                           double spread, std::uint64_t seed) {
  nn::RandomSource rng(seed);
  std::vector<std::vector<double>> points;
  points.reserve(static_cast<std::size_t>(2 * per_cluster));
  for (int cluster = 0; cluster < 2; ++cluster) {
    for (int i = 0; i < per_cluster; ++i) {
      std::vector<double> p(static_cast<std::size_t>(dim));
      for (auto& v : p) v = rng.normal() * spread;
      p[0] += cluster == 0 ? 0.0 : separation;
      points.push_back(std::move(p));
    }
  }
  return points;
}

double mean_over(const std::vector<double>& trace, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += trace[i];
  return acc / static_cast<double>(end - begin);
}

}  // namespace

TEST_CASE("tsne rejects undersized or malformed inputs") {
  tsne::TsneConfig config;
  config.perplexity = 5.0;
  config.iterations = 10;

  std::vector<std::vector<double>> few(10, std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(tsne::tsne_embed(few, config), std::invalid_argument);

  auto points = two_blobs(10, 3, 10.0, 0.5, 1);
  points[4][1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(tsne::tsne_embed(points, config), std::invalid_argument);

  auto ragged = two_blobs(10, 3, 10.0, 0.5, 2);
  ragged[7].push_back(0.0);
  CHECK_THROWS_AS(tsne::tsne_embed(ragged, config), std::invalid_argument);

  tsne::TsneConfig bad = config;
  bad.perplexity = 0.5;
  CHECK_THROWS_AS(tsne::tsne_embed(two_blobs(10, 3, 10.0, 0.5, 3), bad),
                  std::invalid_argument);
}

TEST_CASE("bandwidth search pins every conditional entropy to the target") {
  auto points = two_blobs(20, 5, 20.0, 0.5, 11);
  tsne::TsneConfig config;
  config.perplexity = 10.0;
  config.iterations = 50;
  config.seed = 7;
  auto result = tsne::tsne_embed(points, config);
  CHECK(result.max_entropy_error_bits < 1e-4);
  CHECK(result.kl_trace.size() == 50);
  REQUIRE(result.embedding.size() == points.size());
  for (const auto& y : result.embedding) {
    CHECK(std::isfinite(y[0]));
    CHECK(std::isfinite(y[1]));
  }
}

TEST_CASE("the embedding is centered and seed-deterministic") {
  auto points = two_blobs(18, 4, 15.0, 0.6, 21);
  tsne::TsneConfig config;
  config.perplexity = 8.0;
  config.iterations = 60;
  config.seed = 42;

  auto a = tsne::tsne_embed(points, config);
  auto b = tsne::tsne_embed(points, config);
  REQUIRE(a.embedding.size() == b.embedding.size());
  for (std::size_t i = 0; i < a.embedding.size(); ++i) {
    CHECK(a.embedding[i][0] == b.embedding[i][0]);
    CHECK(a.embedding[i][1] == b.embedding[i][1]);
  }
  CHECK(a.kl_trace == b.kl_trace);

  double cx = 0.0, cy = 0.0;
  for (const auto& y : a.embedding) {
    cx += y[0];
    cy += y[1];
  }
  CHECK(std::abs(cx / a.embedding.size()) < 1e-9);
  CHECK(std::abs(cy / a.embedding.size()) < 1e-9);

  tsne::TsneConfig other = config;
  other.seed = 43;
  auto c = tsne::tsne_embed(points, other);
  bool any_different = false;
  for (std::size_t i = 0; i < a.embedding.size(); ++i)
    any_different = any_different || a.embedding[i][0] != c.embedding[i][0];
  CHECK(any_different);
}

TEST_CASE("kl divergence keeps shrinking after the exaggeration phase") {
  auto points = two_blobs(30, 6, 12.0, 1.0, 31);
  tsne::TsneConfig config;
  config.perplexity = 15.0;
  config.iterations = 300;
  config.exaggeration_iters = 100;
  config.seed = 5;
  auto result = tsne::tsne_embed(points, config);
  REQUIRE(result.kl_trace.size() == 300);
  for (double kl : result.kl_trace) {
    CHECK(std::isfinite(kl));
    CHECK(kl >= 0.0);
  }
  // Windows count from the end of exaggeration: iterations 51..100 of the
  // plain phase against the final 50 of the run.
  double early = mean_over(result.kl_trace, 150, 200);
  double late = mean_over(result.kl_trace, 250, 300);
  CHECK(late < early);
}

TEST_CASE("well-separated clusters stay separated in two dimensions") {
  const int per_cluster = 20;
  auto points = two_blobs(per_cluster, 5, 40.0, 0.25, 41);
  tsne::TsneConfig config;
  config.perplexity = 8.0;
  config.iterations = 600;
  config.seed = 11;
  auto result = tsne::tsne_embed(points, config);

  std::array<double, 2> centroid0{}, centroid1{};
  for (int i = 0; i < per_cluster; ++i) {
    centroid0[0] += result.embedding[i][0];
    centroid0[1] += result.embedding[i][1];
    centroid1[0] += result.embedding[per_cluster + i][0];
    centroid1[1] += result.embedding[per_cluster + i][1];
  }
  for (auto& v : centroid0) v /= per_cluster;
  for (auto& v : centroid1) v /= per_cluster;

  int correct = 0;
  for (std::size_t i = 0; i < result.embedding.size(); ++i) {
    const auto& y = result.embedding[i];
    double d0 = std::hypot(y[0] - centroid0[0], y[1] - centroid0[1]);
    double d1 = std::hypot(y[0] - centroid1[0], y[1] - centroid1[1]);
    bool in_first = i < per_cluster;
    if ((d0 < d1) == in_first) ++correct;
  }
  CHECK(correct == 2 * per_cluster);
}

TEST_CASE("coincident points keep the solver finite") {
  // Identical points defeat the entropy target but must not produce NaNs.
  std::vector<std::vector<double>> points(24, std::vector<double>{1.0, 2.0});
  tsne::TsneConfig config;
  config.perplexity = 8.0;
  config.iterations = 30;
  config.seed = 3;
  auto result = tsne::tsne_embed(points, config);
  for (const auto& y : result.embedding) {
    CHECK(std::isfinite(y[0]));
    CHECK(std::isfinite(y[1]));
  }
  for (double kl : result.kl_trace) CHECK(std::isfinite(kl));
}
