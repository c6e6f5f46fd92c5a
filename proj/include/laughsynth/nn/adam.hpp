#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "laughsynth/nn/parameters.hpp"

namespace laughsynth::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamMoments {
  Matrix<Scalar> first;
  Matrix<Scalar> second;
};

/// Per-parameter moments keyed by parameter name, plus the shared step.
template <typename Scalar>
struct AdamState {
  std::map<std::string, AdamMoments<Scalar>> moments;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every trainable parameter.
/// Throws NonFiniteError naming the first parameter with a NaN/Inf
/// gradient; in that case nothing is modified.
template <typename Scalar>
void adam_step(ParameterStore<Scalar>& params, AdamState<Scalar>& state, const AdamConfig& cfg) {
  if (!(cfg.lr > 0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  for (const auto& p : params) {
    if (p.trainable && !p.grad.allFinite()) throw NonFiniteError("non-finite gradient in parameter " + p.name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  const auto step_size = static_cast<Scalar>(cfg.lr / c1);
  const auto inv_sqrt_c2 = static_cast<Scalar>(1.0 / std::sqrt(c2));
  const auto eps = static_cast<Scalar>(cfg.eps);

  for (auto& p : params) {
    if (!p.trainable) continue;
    auto& m = state.moments[p.name];
    if (m.first.size() != p.value.size()) {
      m.first.setZero(p.value.rows(), p.value.cols());
      m.second.setZero(p.value.rows(), p.value.cols());
    }
    m.first = b1 * m.first + (Scalar(1) - b1) * p.grad;
    m.second = b2 * m.second + (Scalar(1) - b2) * p.grad.cwiseAbs2();
    p.value.array() -= step_size * m.first.array() / (m.second.array().sqrt() * inv_sqrt_c2 + eps);
  }
}

}  // namespace laughsynth::nn
