#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace reelgan::nn {

using Shape = std::vector<int>;

inline std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape dimensions must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense n-dimensional array in row-major order. `g` is the gradient
/// accumulator; it is allocated (zero-filled) only for tensors that take part
/// in differentiation. Values are immutable once written by an op; gradients
/// accumulate across backward passes until zero_grad().
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> v;
  std::vector<T> g;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s, bool rg = false)
      : shape(std::move(s)), v(static_cast<std::size_t>(shape_size(shape)), T(0)), requires_grad(rg) {
    if (requires_grad) g.assign(v.size(), T(0));
  }

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), T(0));
  }
  void zero_grad() {
    if (!g.empty()) std::fill(g.begin(), g.end(), T(0));
  }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape shape, bool requires_grad = false) {
  return std::make_shared<Tensor<T>>(std::move(shape), requires_grad);
}

template <typename T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<T>>(std::move(shape), requires_grad);
  if (static_cast<std::int64_t>(values.size()) != t->size())
    throw std::invalid_argument("make_tensor: value count does not match shape");
  t->v = std::move(values);
  return t;
}

/// Leaf copy of `x`: same values, no gradient link to the producing graph.
template <typename T>
TensorPtr<T> detach(const TensorPtr<T>& x) {
  auto t = std::make_shared<Tensor<T>>(x->shape);
  t->v = x->v;
  return t;
}

/// Reverse-mode tape. Each forward op appends one backward closure; backward()
/// seeds the scalar loss with gradient 1 and replays the closures in reverse.
/// A tape covers exactly one forward pass: build, backward, discard (or clear).
template <typename T>
class Tape {
 public:
  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

  void backward(const TensorPtr<T>& loss) {
    if (loss->size() != 1)
      throw std::invalid_argument("backward: loss must be a scalar tensor, got shape " +
                                  shape_to_string(loss->shape));
    loss->ensure_grad();
    loss->g[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

 private:
  std::vector<std::function<void()>> ops_;
};

/// Mixes a base seed with tagging words into a fresh seed (splitmix64 rounds).
/// Used to derive independent, reproducible sub-streams (per epoch, per role).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ tag_a) ^ tag_b);
}

/// Deterministic random stream. Box-Muller on top of mt19937_64 so the values
/// do not depend on the standard library's distribution implementations.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t integer(std::uint64_t bound) {  // [0, bound)
    if (bound == 0) throw std::invalid_argument("RandomSource::integer: bound must be positive");
    // rejection sampling keeps the draw unbiased
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  /// Fisher-Yates shuffle with this stream.
  template <typename V>
  void shuffle(std::vector<V>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(integer(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

template <typename T>
void fill_normal(Tensor<T>& t, RandomSource& rng, double stddev) {
  for (auto& x : t.v) x = static_cast<T>(rng.normal() * stddev);
}

}  // namespace reelgan::nn
