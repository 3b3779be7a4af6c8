#pragma once

#include "reelgan/tensor.hpp"

namespace reelgan::nn {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers for one parameter tensor. Stored in the
/// parameter's scalar type so checkpoints capture optimizer state exactly.
template <typename T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<AdamMoments<T>> moments;

  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}

  void attach(const std::vector<TensorPtr<T>>& params) {
    moments.clear();
    moments.reserve(params.size());
    for (const auto& p : params)
      moments.push_back({std::vector<T>(p->v.size(), T(0)),
                         std::vector<T>(p->v.size(), T(0))});
  }
};

/// One Adam update over `params` using their accumulated gradients. Update
/// arithmetic runs in double; moments round-trip through the parameter
/// scalar type between steps so a checkpoint captures them exactly.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<TensorPtr<T>>& params) {
  if (state.moments.size() != params.size())
    throw std::invalid_argument("adam_step: state not attached to this parameter list");
  const auto& c = state.config;
  state.step += 1;
  double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& mom = state.moments[i];
    if (mom.m.size() != p.v.size())
      throw std::invalid_argument("adam_step: parameter size changed since attach");
    p.ensure_grad();
    for (std::size_t k = 0; k < p.v.size(); ++k) {
      double g = static_cast<double>(p.g[k]);
      mom.m[k] = static_cast<T>(c.beta1 * static_cast<double>(mom.m[k]) + (1.0 - c.beta1) * g);
      mom.v[k] = static_cast<T>(c.beta2 * static_cast<double>(mom.v[k]) + (1.0 - c.beta2) * g * g);
      double mhat = static_cast<double>(mom.m[k]) / bc1;
      double vhat = static_cast<double>(mom.v[k]) / bc2;
      p.v[k] -= static_cast<T>(c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon));
    }
  }
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::int64_t checked = 0;
  bool passed(double tol = 1e-4) const { return checked > 0 && max_rel_error < tol; }
};

/// Central-difference check of analytic gradients for a scalar-valued graph.
/// `build` must construct the graph from current parameter values and return
/// the scalar loss; it runs once per probe, so it must be deterministic.
/// Relative error is |a - n| / max(|a| + |n|, 1e-6).
template <typename T, typename BuildFn>
GradCheckReport grad_check(const std::vector<TensorPtr<T>>& params, BuildFn build,
                           double eps = 1e-3) {
  GradCheckReport report;

  for (const auto& p : params) p->zero_grad();
  {
    Tape<T> tape;
    auto loss = build(tape);
    tape.backward(loss);
  }
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    p->ensure_grad();
    analytic.push_back(p->g);
  }

  auto eval = [&]() {
    Tape<T> tape;
    auto loss = build(tape);
    return static_cast<double>(loss->v[0]);
  };

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    for (std::size_t k = 0; k < p.v.size(); ++k) {
      T saved = p.v[k];
      p.v[k] = static_cast<T>(static_cast<double>(saved) + eps);
      double up = eval();
      p.v[k] = static_cast<T>(static_cast<double>(saved) - eps);
      double down = eval();
      p.v[k] = saved;
      double numeric = (up - down) / (2.0 * eps);
      double a = static_cast<double>(analytic[i][k]);
      double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
      report.max_rel_error = std::max(report.max_rel_error, rel);
      report.checked += 1;
    }
  }
  return report;
}

}  // namespace reelgan::nn
