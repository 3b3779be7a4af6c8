#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "reelgan/nn.hpp"
#include "reelgan/optim.hpp"

using namespace reelgan::nn;

namespace {

TensorPtr<double> random_tensor(Shape shape, std::uint64_t seed, bool requires_grad,
                                double scale = 1.0, double offset = 0.0) {
  auto t = make_tensor<double>(std::move(shape), requires_grad);
  RandomSource rng(seed);
  for (auto& v : t->v) v = rng.normal() * scale + offset;
  return t;
}

/// Scalar readout through fixed dense weights so every output element carries
/// a distinct gradient.
TensorPtr<double> weighted_sum(Tape<double>& tape, const TensorPtr<double>& x,
                               std::uint64_t seed) {
  auto flat = flatten(tape, x);
  auto w = random_tensor({flat->dim(1), 1}, seed, false);
  auto b = make_tensor<double>({1});
  return sum(tape, dense(tape, flat, w, b));
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

TEST_CASE("conv2d same padding forward matches a hand-computed row") {
  // 1x4 input, 1x3 kernel, zero padding of one column each side.
  auto x = make_tensor<double>({1, 1, 4, 1}, {1.0, 2.0, 3.0, 4.0});
  auto w = make_tensor<double>({1, 3, 1, 1}, {10.0, 100.0, 1000.0});
  auto b = make_tensor<double>({1}, std::vector<double>{0.5});
  ConvSpec spec;
  spec.kernel_rows = 1;
  spec.kernel_cols = 3;
  spec.filters = 1;
  Tape<double> tape;
  auto out = conv2d(tape, x, w, b, spec);
  REQUIRE(out->shape == Shape{1, 1, 4, 1});
  CHECK(out->v[0] == doctest::Approx(2100.5));
  CHECK(out->v[1] == doctest::Approx(3210.5));
  CHECK(out->v[2] == doctest::Approx(4320.5));
  CHECK(out->v[3] == doctest::Approx(430.5));
}

TEST_CASE("conv2d dilation reaches stride-spaced taps") {
  // Kernel 1x3 with column dilation 4 reads x[c-4], x[c], x[c+4].
  auto x = make_tensor<double>({1, 1, 8, 1}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto w = make_tensor<double>({1, 3, 1, 1}, {1.0, 10.0, 100.0});
  auto b = make_tensor<double>({1});
  ConvSpec spec;
  spec.kernel_cols = 3;
  spec.dilation_cols = 4;
  spec.filters = 1;
  Tape<double> tape;
  auto out = conv2d(tape, x, w, b, spec);
  REQUIRE(out->shape == Shape{1, 1, 8, 1});
  const std::vector<double> want = {510, 620, 730, 840, 51, 62, 73, 84};
  for (int i = 0; i < 8; ++i) CHECK(out->v[i] == doctest::Approx(want[i]));
}

TEST_CASE("conv2d valid padding with stride drops the padded border") {
  auto x = make_tensor<double>({1, 1, 6, 1}, {1, 2, 3, 4, 5, 6});
  auto w = make_tensor<double>({1, 3, 1, 1}, {1.0, 1.0, 1.0});
  auto b = make_tensor<double>({1});
  ConvSpec spec;
  spec.kernel_cols = 3;
  spec.stride_cols = 2;
  spec.padding = Padding::valid;
  spec.filters = 1;
  Tape<double> tape;
  auto out = conv2d(tape, x, w, b, spec);
  REQUIRE(out->shape == Shape{1, 1, 2, 1});
  CHECK(out->v[0] == doctest::Approx(6.0));
  CHECK(out->v[1] == doctest::Approx(12.0));
}

TEST_CASE("conv2d output size follows ceil(in/stride) under same padding") {
  auto x = make_tensor<double>({1, 5, 7, 2});
  auto w = make_tensor<double>({3, 3, 2, 4});
  auto b = make_tensor<double>({4});
  ConvSpec spec;
  spec.kernel_rows = 3;
  spec.kernel_cols = 3;
  spec.stride_rows = 2;
  spec.stride_cols = 2;
  spec.filters = 4;
  Tape<double> tape;
  auto out = conv2d(tape, x, w, b, spec);
  CHECK(out->shape == Shape{1, 3, 4, 4});
}

TEST_CASE("conv2d rejects mismatched weight and bias shapes") {
  auto x = make_tensor<double>({1, 4, 4, 2});
  ConvSpec spec;
  spec.kernel_rows = 2;
  spec.kernel_cols = 2;
  spec.filters = 3;
  Tape<double> tape;
  auto bias = make_tensor<double>({3});
  CHECK_THROWS_AS(conv2d(tape, x, make_tensor<double>({2, 2, 1, 3}), bias, spec),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv2d(tape, x, make_tensor<double>({2, 2, 2, 3}), make_tensor<double>({2}),
                         spec),
                  std::invalid_argument);
  ConvSpec big = spec;
  big.kernel_rows = 5;
  big.padding = Padding::valid;
  CHECK_THROWS_AS(conv2d(tape, x, make_tensor<double>({5, 2, 2, 3}), bias, big),
                  std::invalid_argument);
}

TEST_CASE("conv2d gradients match central differences") {
  struct Case {
    const char* name;
    Shape input;
    ConvSpec spec;
  };
  std::vector<Case> cases;
  {
    ConvSpec s;
    s.kernel_rows = 2;
    s.kernel_cols = 3;
    s.filters = 3;
    cases.push_back({"same stride 1", {2, 4, 6, 2}, s});
  }
  {
    ConvSpec s;
    s.kernel_rows = 3;
    s.kernel_cols = 3;
    s.stride_rows = 2;
    s.stride_cols = 2;
    s.filters = 2;
    cases.push_back({"same stride 2", {1, 4, 6, 1}, s});
  }
  {
    ConvSpec s;
    s.kernel_rows = 1;
    s.kernel_cols = 3;
    s.dilation_cols = 4;
    s.filters = 2;
    cases.push_back({"dilated columns", {1, 2, 12, 1}, s});
  }
  {
    ConvSpec s;
    s.kernel_rows = 2;
    s.kernel_cols = 3;
    s.dilation_rows = 2;
    s.dilation_cols = 16;
    s.filters = 2;
    cases.push_back({"dilated rows and columns", {1, 4, 64, 1}, s});
  }
  {
    ConvSpec s;
    s.kernel_rows = 3;
    s.kernel_cols = 3;
    s.stride_rows = 2;
    s.stride_cols = 2;
    s.padding = Padding::valid;
    s.filters = 2;
    cases.push_back({"valid stride 2", {1, 5, 7, 2}, s});
  }

  for (const auto& c : cases) {
    CAPTURE(c.name);
    auto x = random_tensor(c.input, 11, true);
    auto w = random_tensor({c.spec.kernel_rows, c.spec.kernel_cols, c.input[3], c.spec.filters},
                           12, true, 0.5);
    auto b = random_tensor({c.spec.filters}, 13, true, 0.1);
    auto report = grad_check<double>({x, w, b}, [&](Tape<double>& tape) {
      return weighted_sum(tape, conv2d(tape, x, w, b, c.spec), 14);
    });
    CHECK(report.checked == x->size() + w->size() + b->size());
    CHECK_MESSAGE(report.passed(), c.name, " max rel error ", report.max_rel_error);
  }
}

TEST_CASE("conv2d_transpose stamps stride-spaced kernels") {
  // Two input pixels scatter a 1x3 kernel at stride 2: overlap lands on h=2.
  auto x = make_tensor<double>({1, 1, 2, 1}, {1.0, 2.0});
  auto w = make_tensor<double>({1, 3, 1, 1}, {7.0, 11.0, 13.0});
  auto b = make_tensor<double>({1});
  ConvSpec spec;
  spec.kernel_cols = 3;
  spec.stride_cols = 2;
  spec.filters = 1;
  Tape<double> tape;
  auto out = conv2d_transpose(tape, x, w, b, spec);
  REQUIRE(out->shape == Shape{1, 1, 4, 1});
  CHECK(out->v[0] == doctest::Approx(7.0));
  CHECK(out->v[1] == doctest::Approx(11.0));
  CHECK(out->v[2] == doctest::Approx(27.0));
  CHECK(out->v[3] == doctest::Approx(22.0));
}

TEST_CASE("conv2d_transpose doubles each spatial axis at stride 2") {
  auto x = make_tensor<double>({1, 2, 6, 2});
  auto w = make_tensor<double>({2, 5, 1, 2});
  auto b = make_tensor<double>({1});
  ConvSpec spec;
  spec.kernel_rows = 2;
  spec.kernel_cols = 5;
  spec.stride_rows = 2;
  spec.stride_cols = 2;
  spec.filters = 1;
  Tape<double> tape;
  auto out = conv2d_transpose(tape, x, w, b, spec);
  CHECK(out->shape == Shape{1, 4, 12, 1});
}

TEST_CASE("conv2d_transpose rejects dilation and wrong weight layout") {
  auto x = make_tensor<double>({1, 2, 4, 2});
  Tape<double> tape;
  ConvSpec spec;
  spec.kernel_rows = 2;
  spec.kernel_cols = 5;
  spec.filters = 3;
  ConvSpec dilated = spec;
  dilated.dilation_cols = 2;
  CHECK_THROWS_AS(conv2d_transpose(tape, x, make_tensor<double>({2, 5, 3, 2}),
                                   make_tensor<double>({3}), dilated),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv2d_transpose(tape, x, make_tensor<double>({2, 5, 2, 3}),
                                   make_tensor<double>({3}), spec),
                  std::invalid_argument);
}

TEST_CASE("conv2d_transpose gradients match central differences") {
  struct Case {
    const char* name;
    Shape input;
    ConvSpec spec;
  };
  std::vector<Case> cases;
  {
    ConvSpec s;
    s.kernel_rows = 2;
    s.kernel_cols = 5;
    s.filters = 2;
    cases.push_back({"stride 1", {2, 2, 8, 3}, s});
  }
  {
    ConvSpec s;
    s.kernel_rows = 2;
    s.kernel_cols = 5;
    s.stride_rows = 2;
    s.stride_cols = 2;
    s.filters = 1;
    cases.push_back({"stride 2", {1, 2, 6, 2}, s});
  }

  for (const auto& c : cases) {
    CAPTURE(c.name);
    auto x = random_tensor(c.input, 21, true);
    auto w = random_tensor({c.spec.kernel_rows, c.spec.kernel_cols, c.spec.filters, c.input[3]},
                           22, true, 0.5);
    auto b = random_tensor({c.spec.filters}, 23, true, 0.1);
    auto report = grad_check<double>({x, w, b}, [&](Tape<double>& tape) {
      return weighted_sum(tape, conv2d_transpose(tape, x, w, b, c.spec), 24);
    });
    CHECK_MESSAGE(report.passed(), c.name, " max rel error ", report.max_rel_error);
  }
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  // <conv(x), y> must equal <x, conv_transpose(y)> when the transposed op
  // reuses the same kernel tensor and swaps the filter count for the input
  // channel count. Transpose weights are stored [kr, kc, F, C] with F equal
  // to the forward input channels, so the forward kernel passes unchanged.
  const int kr = 2, kc = 3, cin = 2, nf = 3;
  auto x = random_tensor({1, 4, 6, cin}, 31, false);
  auto w = random_tensor({kr, kc, cin, nf}, 32, false);
  auto y = random_tensor({1, 4, 3, nf}, 33, false);

  ConvSpec fwd;
  fwd.kernel_rows = kr;
  fwd.kernel_cols = kc;
  fwd.stride_rows = 1;
  fwd.stride_cols = 2;
  fwd.filters = nf;

  ConvSpec bwd = fwd;
  bwd.filters = cin;

  Tape<double> tape;
  auto zero_f = make_tensor<double>({nf});
  auto zero_c = make_tensor<double>({cin});
  auto conv_out = conv2d(tape, x, w, zero_f, fwd);
  REQUIRE(conv_out->shape == y->shape);
  auto adj_out = conv2d_transpose(tape, y, w, zero_c, bwd);
  REQUIRE(adj_out->shape == x->shape);
  CHECK(dot(conv_out->v, y->v) == doctest::Approx(dot(x->v, adj_out->v)).epsilon(1e-10));
}

TEST_CASE("dense forward and gradients") {
  auto x = make_tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6});
  auto w = make_tensor<double>({3, 2}, {1, 10, 2, 20, 3, 30});
  auto b = make_tensor<double>({2}, {0.5, -0.5});
  Tape<double> tape;
  auto out = dense(tape, x, w, b);
  REQUIRE(out->shape == Shape{2, 2});
  CHECK(out->v[0] == doctest::Approx(14.5));
  CHECK(out->v[1] == doctest::Approx(139.5));
  CHECK(out->v[2] == doctest::Approx(32.5));
  CHECK(out->v[3] == doctest::Approx(319.5));

  auto xg = random_tensor({3, 4}, 41, true);
  auto wg = random_tensor({4, 5}, 42, true);
  auto bg = random_tensor({5}, 43, true);
  auto report = grad_check<double>({xg, wg, bg}, [&](Tape<double>& t) {
    return weighted_sum(t, dense(t, xg, wg, bg), 44);
  });
  CHECK(report.passed());

  CHECK_THROWS_AS(dense(tape, x, make_tensor<double>({2, 4}), b), std::invalid_argument);
  CHECK_THROWS_AS(dense(tape, x, w, make_tensor<double>({3})), std::invalid_argument);
}

TEST_CASE("batch_norm train mode normalizes with biased batch statistics") {
  auto x = make_tensor<double>({4, 2}, {1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0});
  auto gamma = make_tensor<double>({2}, {2.0, 0.5});
  auto beta = make_tensor<double>({2}, {1.0, -1.0});
  BatchNormState<double> state(2);
  Tape<double> tape;
  auto out = batch_norm(tape, x, gamma, beta, state, NnMode::train);

  // Channel 0: mean 2.5, biased variance 1.25. Channel 1: mean 25, var 125.
  const double eps = 1e-5;
  for (int r = 0; r < 4; ++r) {
    double h0 = (x->v[r * 2 + 0] - 2.5) / std::sqrt(1.25 + eps);
    double h1 = (x->v[r * 2 + 1] - 25.0) / std::sqrt(125.0 + eps);
    CHECK(out->v[r * 2 + 0] == doctest::Approx(2.0 * h0 + 1.0));
    CHECK(out->v[r * 2 + 1] == doctest::Approx(0.5 * h1 - 1.0));
  }

  // running += 0.1 * (batch - running), starting from mean 0 / var 1.
  CHECK(state.running_mean[0] == doctest::Approx(0.25));
  CHECK(state.running_mean[1] == doctest::Approx(2.5));
  CHECK(state.running_var[0] == doctest::Approx(1.0 + 0.1 * (1.25 - 1.0)));
  CHECK(state.running_var[1] == doctest::Approx(1.0 + 0.1 * (125.0 - 1.0)));
}

TEST_CASE("batch_norm infer mode reads running statistics") {
  auto x = make_tensor<double>({1, 2}, {3.0, 7.0});
  auto gamma = make_tensor<double>({2}, {1.0, 2.0});
  auto beta = make_tensor<double>({2}, {0.0, 1.0});
  BatchNormState<double> state(2);
  state.running_mean = {1.0, 5.0};
  state.running_var = {4.0, 9.0};
  Tape<double> tape;
  auto out = batch_norm(tape, x, gamma, beta, state, NnMode::infer);
  CHECK(out->v[0] == doctest::Approx((3.0 - 1.0) / std::sqrt(4.0 + 1e-5)));
  CHECK(out->v[1] == doctest::Approx(2.0 * (7.0 - 5.0) / std::sqrt(9.0 + 1e-5) + 1.0));
  // Inference must not move the running stats.
  CHECK(state.running_mean[0] == 1.0);
  CHECK(state.running_var[1] == 9.0);
}

TEST_CASE("batch_norm rejects single-sample training batches") {
  auto x = make_tensor<double>({1, 3});
  auto gamma = make_tensor<double>({3}, {1, 1, 1});
  auto beta = make_tensor<double>({3});
  BatchNormState<double> state(3);
  Tape<double> tape;
  CHECK_THROWS_AS(batch_norm(tape, x, gamma, beta, state, NnMode::train),
                  std::invalid_argument);
  CHECK_NOTHROW(batch_norm(tape, x, gamma, beta, state, NnMode::infer));
}

TEST_CASE("batch_norm gradients match central differences in both modes") {
  auto x = random_tensor({4, 3}, 51, true);
  auto gamma = random_tensor({3}, 52, true, 0.5, 1.0);
  auto beta = random_tensor({3}, 53, true, 0.5);

  {
    // Batch statistics are recomputed inside every probe, so the FD loss
    // includes the mean/variance dependence on x.
    BatchNormState<double> state(3);
    auto report = grad_check<double>({x, gamma, beta}, [&](Tape<double>& t) {
      return weighted_sum(t, batch_norm(t, x, gamma, beta, state, NnMode::train), 54);
    });
    CHECK_MESSAGE(report.passed(), "train mode max rel error ", report.max_rel_error);
  }
  {
    BatchNormState<double> state(3);
    state.running_mean = {0.3, -0.2, 0.1};
    state.running_var = {1.5, 0.8, 2.0};
    auto report = grad_check<double>({x, gamma, beta}, [&](Tape<double>& t) {
      return weighted_sum(t, batch_norm(t, x, gamma, beta, state, NnMode::infer), 55);
    });
    CHECK_MESSAGE(report.passed(), "infer mode max rel error ", report.max_rel_error);
  }
  {
    // Channels-last reduction over a 4-D activation.
    auto x4 = random_tensor({2, 2, 3, 2}, 56, true);
    auto g4 = random_tensor({2}, 57, true, 0.5, 1.0);
    auto b4 = random_tensor({2}, 58, true, 0.5);
    BatchNormState<double> state(2);
    auto report = grad_check<double>({x4, g4, b4}, [&](Tape<double>& t) {
      return weighted_sum(t, batch_norm(t, x4, g4, b4, state, NnMode::train), 59);
    });
    CHECK_MESSAGE(report.passed(), "4-D max rel error ", report.max_rel_error);
  }
}

TEST_CASE("activation forwards hit their defining values") {
  auto x = make_tensor<double>({5}, {-2.0, -0.5, 0.0, 0.5, 2.0});
  Tape<double> tape;
  auto r = relu(tape, x);
  CHECK(r->v == std::vector<double>{0.0, 0.0, 0.0, 0.5, 2.0});
  auto l = leaky_relu(tape, x, 0.2);
  CHECK(l->v[0] == doctest::Approx(-0.4));
  CHECK(l->v[1] == doctest::Approx(-0.1));
  CHECK(l->v[4] == doctest::Approx(2.0));
  auto s = sigmoid(tape, x);
  CHECK(s->v[2] == doctest::Approx(0.5));
  CHECK(s->v[4] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  auto t = tanh_act(tape, x);
  CHECK(t->v[0] == doctest::Approx(std::tanh(-2.0)));
  CHECK(t->v[2] == 0.0);
}

TEST_CASE("activation gradients match central differences away from kinks") {
  // Offsets keep every input at least 0.05 from zero so the probe never
  // crosses a relu kink.
  auto pos = random_tensor({3, 4}, 61, true, 0.5, 1.0);
  auto neg = random_tensor({3, 4}, 62, true, 0.5, -1.5);
  for (auto& v : pos->v) v = std::abs(v) + 0.05;
  for (auto& v : neg->v) v = -std::abs(v) - 0.05;

  auto check = [&](const char* name, auto fn) {
    for (auto x : {pos, neg}) {
      auto report = grad_check<double>({x}, [&](Tape<double>& t) {
        return weighted_sum(t, fn(t, x), 63);
      });
      CHECK_MESSAGE(report.passed(), name, " max rel error ", report.max_rel_error);
    }
  };
  check("relu", [](Tape<double>& t, const TensorPtr<double>& x) { return relu(t, x); });
  check("leaky_relu",
        [](Tape<double>& t, const TensorPtr<double>& x) { return leaky_relu(t, x, 0.2); });
  check("sigmoid", [](Tape<double>& t, const TensorPtr<double>& x) { return sigmoid(t, x); });
  check("tanh", [](Tape<double>& t, const TensorPtr<double>& x) { return tanh_act(t, x); });
}

TEST_CASE("bce_loss analytic values") {
  Tape<double> tape;
  {
    auto pred = make_tensor<double>({4}, {0.5, 0.5, 0.5, 0.5});
    auto ones = make_tensor<double>({4}, {1, 1, 1, 1});
    auto loss = bce_loss(tape, pred, ones);
    CHECK(loss->v[0] == doctest::Approx(std::log(2.0)));
  }
  {
    auto pred = make_tensor<double>({1}, std::vector<double>{0.9});
    auto zero = make_tensor<double>({1}, std::vector<double>{0.0});
    auto loss = bce_loss(tape, pred, zero);
    CHECK(loss->v[0] == doctest::Approx(-std::log(0.1)));
  }
  {
    // Saturated predictions clamp to 1e-7 before the log.
    auto pred = make_tensor<double>({1}, std::vector<double>{1.0});
    auto zero = make_tensor<double>({1}, std::vector<double>{0.0});
    auto loss = bce_loss(tape, pred, zero);
    CHECK(loss->v[0] == doctest::Approx(-std::log(1e-7)));
  }
  CHECK_THROWS_AS(bce_loss(tape, make_tensor<double>({2}), make_tensor<double>({3})),
                  std::invalid_argument);
}

TEST_CASE("bce_loss gradient is exact inside the clamp and zero outside") {
  auto pred = make_tensor<double>({3}, {0.2, 0.7, 0.9}, true);
  auto labels = make_tensor<double>({3}, {0.0, 1.0, 1.0});
  auto report = grad_check<double>({pred}, [&](Tape<double>& t) {
    return bce_loss(t, pred, labels);
  });
  CHECK(report.passed());

  auto saturated = make_tensor<double>({2}, {1.0, 0.0}, true);
  auto targets = make_tensor<double>({2}, {0.0, 1.0});
  Tape<double> tape;
  auto loss = bce_loss(tape, saturated, targets);
  tape.backward(loss);
  CHECK(saturated->g[0] == 0.0);
  CHECK(saturated->g[1] == 0.0);
}

TEST_CASE("sigmoid into bce_loss gradients survive the chain") {
  auto logits = random_tensor({6}, 71, true, 2.0);
  auto labels = make_tensor<double>({6}, {1, 0, 1, 1, 0, 0});
  auto report = grad_check<double>({logits}, [&](Tape<double>& t) {
    return bce_loss(t, sigmoid(t, logits), labels);
  });
  CHECK(report.passed());
}

TEST_CASE("sum, mean, reshape and add behave as linear ops") {
  auto x = make_tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tape<double> tape;
  auto s = sum(tape, x);
  CHECK(s->v[0] == 21.0);
  auto m = mean(tape, x);
  CHECK(m->v[0] == doctest::Approx(3.5));

  auto y = random_tensor({2, 3}, 81, true);
  auto report = grad_check<double>({x, y}, [&](Tape<double>& t) {
    auto summed = add(t, x, y);
    auto shaped = reshape(t, summed, {3, 2});
    return weighted_sum(t, shaped, 82);
  });
  CHECK(report.passed());

  CHECK_THROWS_AS(reshape(tape, x, {4, 2}), std::invalid_argument);
  CHECK_THROWS_AS(add(tape, x, make_tensor<double>({3, 2})), std::invalid_argument);
}

TEST_CASE("concat lays parts out along the axis and routes gradients") {
  auto a = make_tensor<double>({2, 2}, {1, 2, 3, 4});
  auto b = make_tensor<double>({2, 1}, {5, 6});
  Tape<double> tape;
  auto out = concat(tape, {a, b}, 1);
  REQUIRE(out->shape == Shape{2, 3});
  CHECK(out->v == std::vector<double>{1, 2, 5, 3, 4, 6});

  // Channel concat (axis 3) and width concat (axis 2) both back-propagate.
  auto c1 = random_tensor({1, 2, 3, 2}, 91, true);
  auto c2 = random_tensor({1, 2, 3, 1}, 92, true);
  auto c3 = random_tensor({1, 2, 3, 4}, 93, true);
  auto report = grad_check<double>({c1, c2, c3}, [&](Tape<double>& t) {
    return weighted_sum(t, concat(t, {c1, c2, c3}, 3), 94);
  });
  CHECK(report.passed());

  auto w1 = random_tensor({1, 2, 3, 2}, 95, true);
  auto w2 = random_tensor({1, 2, 5, 2}, 96, true);
  auto report_w = grad_check<double>({w1, w2}, [&](Tape<double>& t) {
    return weighted_sum(t, concat(t, {w1, w2}, 2), 97);
  });
  CHECK(report_w.passed());

  CHECK_THROWS_AS(concat(tape, {a, make_tensor<double>({3, 1})}, 1), std::invalid_argument);
  CHECK_THROWS_AS(concat(tape, std::vector<TensorPtr<double>>{}, 0), std::invalid_argument);
}

TEST_CASE("adam first step moves each weight by the sign-scaled learning rate") {
  auto p = make_tensor<double>({3}, {1.0, -2.0, 0.5}, true);
  p->g = {0.3, -0.7, 0.0};
  AdamState<double> opt;
  opt.attach({p});
  adam_step(opt, {p});

  // With bias correction the first step reduces to lr * g / (|g| + eps).
  const auto& c = opt.config;
  CHECK(p->v[0] == doctest::Approx(1.0 - c.learning_rate * 0.3 / (0.3 + c.epsilon)));
  CHECK(p->v[1] == doctest::Approx(-2.0 + c.learning_rate * 0.7 / (0.7 + c.epsilon)));
  CHECK(p->v[2] == 0.5);
  CHECK(opt.step == 1);
}

TEST_CASE("adam trajectory matches an independent reimplementation") {
  auto p = make_tensor<double>({2}, {0.4, -1.1}, true);
  AdamState<double> opt;
  opt.attach({p});

  double ref[2] = {0.4, -1.1};
  double m[2] = {0, 0}, v[2] = {0, 0};
  const auto& c = opt.config;
  for (int step = 1; step <= 5; ++step) {
    double grads[2] = {0.1 * step, -0.05 * step};
    p->g = {grads[0], grads[1]};
    adam_step(opt, {p});
    for (int k = 0; k < 2; ++k) {
      m[k] = c.beta1 * m[k] + (1 - c.beta1) * grads[k];
      v[k] = c.beta2 * v[k] + (1 - c.beta2) * grads[k] * grads[k];
      double mhat = m[k] / (1 - std::pow(c.beta1, step));
      double vhat = v[k] / (1 - std::pow(c.beta2, step));
      ref[k] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
  CHECK(p->v[0] == doctest::Approx(ref[0]).epsilon(1e-12));
  CHECK(p->v[1] == doctest::Approx(ref[1]).epsilon(1e-12));
  CHECK(opt.step == 5);
}

TEST_CASE("adam rejects a detached or resized parameter list") {
  auto p = make_tensor<double>({2}, {0.0, 0.0}, true);
  AdamState<double> opt;
  CHECK_THROWS_AS(adam_step(opt, {p}), std::invalid_argument);
  opt.attach({p});
  auto q = make_tensor<double>({3}, {0.0, 0.0, 0.0}, true);
  CHECK_THROWS_AS(adam_step(opt, {q}), std::invalid_argument);
}

TEST_CASE("gradients accumulate across backward passes until zero_grad") {
  auto x = make_tensor<double>({2}, {1.0, 2.0}, true);
  for (int pass = 0; pass < 2; ++pass) {
    Tape<double> tape;
    auto loss = sum(tape, x);
    tape.backward(loss);
  }
  CHECK(x->g[0] == 2.0);
  x->zero_grad();
  CHECK(x->g[0] == 0.0);
}
