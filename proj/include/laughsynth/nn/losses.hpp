#pragma once

#include <cmath>
#include <stdexcept>

#include "laughsynth/nn/ops.hpp"

namespace laughsynth::nn {

/// Binary entropy with 0·log 0 = 0.
template <typename Scalar>
Scalar binary_entropy(Scalar p) {
  Scalar h = 0;
  if (p > 0) h -= p * std::log(p);
  if (p < 1) h -= (Scalar(1) - p) * std::log(Scalar(1) - p);
  return h;
}

/// Mean absolute error against a constant target.
template <typename Scalar>
Var l1_loss(Tape<Scalar>& t, Var pred, const Matrix<Scalar>& target) {
  const auto& p = t.value(pred);
  detail::require(p.rows() == target.rows() && p.cols() == target.cols(), "l1_loss: shape mismatch");
  const Scalar n = static_cast<Scalar>(p.size());
  Matrix<Scalar> y(1, 1);
  y(0, 0) = (p - target).cwiseAbs().sum() / n;
  return t.record(
      std::move(y), {pred},
      [pred, target, n](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* gp = tp.grad_target(pred)) {
          const Scalar s = g(0, 0) / n;
          *gp += (tp.value(pred) - target).unaryExpr([s](Scalar d) { return d > 0 ? s : (d < 0 ? -s : Scalar(0)); });
        }
      },
      "l1_loss");
}

/// Mean binary cross-entropy minus the target's own entropy, so a perfect
/// prediction scores zero. Predictions must lie strictly inside (0, 1).
template <typename Scalar>
Var binary_divergence(Tape<Scalar>& t, Var pred, const Matrix<Scalar>& target) {
  const auto& p = t.value(pred);
  detail::require(p.rows() == target.rows() && p.cols() == target.cols(), "binary_divergence: shape mismatch");
  if (!((p.array() > 0).all() && (p.array() < 1).all()))
    throw std::domain_error("binary_divergence: predictions must lie in (0, 1)");
  if (!((target.array() >= 0).all() && (target.array() <= 1).all()))
    throw std::domain_error("binary_divergence: targets must lie in [0, 1]");
  const Scalar n = static_cast<Scalar>(p.size());
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p(i), ti = target(i);
    acc += -ti * std::log(pi) - (Scalar(1) - ti) * std::log(Scalar(1) - pi) - binary_entropy(ti);
  }
  Matrix<Scalar> y(1, 1);
  y(0, 0) = acc / n;
  return t.record(
      std::move(y), {pred},
      [pred, target, n](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* gp = tp.grad_target(pred)) {
          const Scalar s = g(0, 0) / n;
          *gp += tp.value(pred).binaryExpr(
              target, [s](Scalar pi, Scalar ti) { return s * (-ti / pi + (Scalar(1) - ti) / (Scalar(1) - pi)); });
        }
      },
      "binary_divergence");
}

/// binary_divergence(sigmoid(logits), target) evaluated directly on the
/// logits: softplus(z) − t·z − H(t). Stable when the sigmoid saturates.
template <typename Scalar>
Var sigmoid_binary_divergence(Tape<Scalar>& t, Var logits, const Matrix<Scalar>& target) {
  const auto& z = t.value(logits);
  detail::require(z.rows() == target.rows() && z.cols() == target.cols(), "sigmoid_binary_divergence: shape mismatch");
  const Scalar n = static_cast<Scalar>(z.size());
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const Scalar zi = z(i), ti = target(i);
    const Scalar softplus = std::max(zi, Scalar(0)) + std::log1p(std::exp(-std::abs(zi)));
    acc += softplus - ti * zi - binary_entropy(ti);
  }
  Matrix<Scalar> y(1, 1);
  y(0, 0) = acc / n;
  return t.record(
      std::move(y), {logits},
      [logits, target, n](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* gz = tp.grad_target(logits)) {
          const Scalar s = g(0, 0) / n;
          *gz += tp.value(logits).binaryExpr(target, [s](Scalar zi, Scalar ti) {
            return s * (Scalar(1) / (Scalar(1) + std::exp(-zi)) - ti);
          });
        }
      },
      "sigmoid_binary_divergence");
}

/// Penalty matrix W[n,t] = 1 − exp(−(n/N − t/T)² / (2g²)), zero on the
/// time-linear diagonal.
template <typename Scalar>
Matrix<Scalar> guided_attention_weights(Eigen::Index n_symbols, Eigen::Index n_frames, Scalar g) {
  Matrix<Scalar> w(n_symbols, n_frames);
  const Scalar denom = Scalar(2) * g * g;
  for (Eigen::Index c = 0; c < n_frames; ++c) {
    for (Eigen::Index r = 0; r < n_symbols; ++r) {
      const Scalar d = static_cast<Scalar>(r) / static_cast<Scalar>(n_symbols) -
                       static_cast<Scalar>(c) / static_cast<Scalar>(n_frames);
      w(r, c) = Scalar(1) - std::exp(-d * d / denom);
    }
  }
  return w;
}

/// Mean of A∘W over the N x T alignment.
template <typename Scalar>
Var guided_attention_loss(Tape<Scalar>& t, Var alignment, Scalar g) {
  if (!(g > 0)) throw std::domain_error("guided_attention_loss: g must be positive");
  const Matrix<Scalar> w = guided_attention_weights<Scalar>(t.rows(alignment), t.cols(alignment), g);
  return scale(t, weighted_sum(t, alignment, w), Scalar(1) / static_cast<Scalar>(w.size()));
}

}  // namespace laughsynth::nn
