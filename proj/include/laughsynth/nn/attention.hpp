#pragma once

#include <cmath>

#include "laughsynth/nn/ops.hpp"

namespace laughsynth::nn {

struct AttentionResult {
  Var context;    // R: d x T
  Var alignment;  // A: N x T, column-stochastic
};

/// Scaled dot-product attention with keys/values (d x N) and queries
/// (d x T): A = softmax over N of KᵀQ/√d, R = V·A.
template <typename Scalar>
AttentionResult scaled_dot_attention(Tape<Scalar>& t, Var queries, Var keys, Var values) {
  detail::require(t.rows(keys) == t.rows(queries), "attention: keys and queries differ in dimension");
  detail::require(t.cols(keys) == t.cols(values), "attention: keys and values differ in length");
  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(t.rows(queries)));
  Var logits = scale(t, matmul_tn(t, keys, queries), inv_sqrt_d);
  Var align = softmax_cols(t, logits);
  return {matmul(t, values, align), align};
}

/// Like scaled_dot_attention but with some alignment columns imposed
/// from outside (used by constrained decoding). `forced` has the full
/// N x T shape; columns where `mask(c)` is true replace the softmax
/// output and block its gradient.
template <typename Scalar>
AttentionResult scaled_dot_attention_forced(Tape<Scalar>& t, Var queries, Var keys, Var values,
                                            const Matrix<Scalar>& forced,
                                            const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
  auto free = scaled_dot_attention(t, queries, keys, values);
  Matrix<Scalar> a = t.value(free.alignment);
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    if (mask(c)) a.col(c) = forced.col(c);
  Var align = t.record(
      std::move(a), {free.alignment},
      [src = free.alignment, mask](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* gs = tp.grad_target(src))
          for (Eigen::Index c = 0; c < g.cols(); ++c)
            if (!mask(c)) gs->col(c) += g.col(c);
      },
      "forced_alignment");
  return {matmul(t, values, align), align};
}

}  // namespace laughsynth::nn
