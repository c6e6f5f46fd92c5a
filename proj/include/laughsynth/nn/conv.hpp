#pragma once

#include <algorithm>

#include "laughsynth/nn/ops.hpp"

namespace laughsynth::nn {

struct ConvSpec {
  int kernel = 1;
  int dilation = 1;
  bool causal = false;
};

/// Same-length 1-D convolution over (channels x time) input.
///
/// `weight` is (out x kernel*in) with the taps stacked as row blocks of
/// `in` channels, so the forward pass is a single GEMM against the
/// im2col matrix. Non-causal padding is split symmetrically (extra on the
/// right); causal padding is all on the left, so output column t only
/// reads input columns <= t.
template <typename Scalar>
Var conv1d(Tape<Scalar>& t, Var x, Var weight, Var bias, ConvSpec spec) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(weight);
  const Eigen::Index in = xv.rows();
  const Eigen::Index len = xv.cols();
  const Eigen::Index k = spec.kernel;
  detail::require(spec.kernel >= 1 && spec.dilation >= 1, "conv1d: kernel and dilation must be >= 1");
  detail::require(wv.cols() == k * in, "conv1d: weight columns must equal kernel * input channels");
  detail::require(t.rows(bias) == wv.rows() && t.cols(bias) == 1, "conv1d: bias shape mismatch");

  const Eigen::Index total_pad = static_cast<Eigen::Index>(spec.dilation) * (k - 1);
  const Eigen::Index left = spec.causal ? total_pad : total_pad / 2;

  // Column ranges [dst, dst+n) in the output that tap j reads from
  // [dst+shift, dst+shift+n) in the input.
  auto tap_range = [=](Eigen::Index j, Eigen::Index& dst, Eigen::Index& n, Eigen::Index& shift) {
    shift = j * spec.dilation - left;
    dst = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index end = std::min<Eigen::Index>(len, len - shift);
    n = std::max<Eigen::Index>(0, end - dst);
  };

  Matrix<Scalar> cols;
  if (k == 1) {
    cols = xv;
  } else {
    cols.setZero(k * in, len);
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::Index dst, n, shift;
      tap_range(j, dst, n, shift);
      if (n > 0) cols.block(j * in, dst, in, n) = xv.middleCols(dst + shift, n);
    }
  }

  Matrix<Scalar> y = wv * cols;
  y.colwise() += t.value(bias).col(0);

  return t.record(
      std::move(y), {x, weight, bias},
      [=, cols = std::move(cols)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* gw = tp.grad_target(weight)) gw->noalias() += g * cols.transpose();
        if (auto* gb = tp.grad_target(bias)) *gb += g.rowwise().sum();
        if (auto* gx = tp.grad_target(x)) {
          Matrix<Scalar> gcols = tp.value(weight).transpose() * g;
          if (k == 1) {
            *gx += gcols;
          } else {
            for (Eigen::Index j = 0; j < k; ++j) {
              Eigen::Index dst, n, shift;
              tap_range(j, dst, n, shift);
              if (n > 0) gx->middleCols(dst + shift, n) += gcols.block(j * in, dst, in, n);
            }
          }
        }
      },
      "conv1d");
}

/// Transposed 1-D convolution with output length exactly stride * input
/// length. The full result has (T-1)*stride + kernel columns; (kernel -
/// stride)/2 are trimmed on the left and the rest on the right.
///
/// `weight` is (kernel*out x in), tap j occupying row block j.
template <typename Scalar>
Var transposed_conv1d(Tape<Scalar>& t, Var x, Var weight, Var bias, int stride, int kernel) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(weight);
  detail::require(stride >= 1 && kernel >= stride, "transposed_conv1d: need kernel >= stride >= 1");
  detail::require(wv.rows() % kernel == 0 && wv.cols() == xv.rows(),
                  "transposed_conv1d: weight shape does not match input channels / kernel");
  const Eigen::Index out = wv.rows() / kernel;
  detail::require(t.rows(bias) == out && t.cols(bias) == 1, "transposed_conv1d: bias shape mismatch");
  const Eigen::Index len = xv.cols();
  const Eigen::Index out_len = len * stride;
  const Eigen::Index trim = (kernel - stride) / 2;

  Matrix<Scalar> z = wv * xv;
  Matrix<Scalar> y(out, out_len);
  y.colwise() = t.value(bias).col(0);
  for (Eigen::Index s = 0; s < len; ++s) {
    for (Eigen::Index j = 0; j < kernel; ++j) {
      const Eigen::Index u = s * stride + j - trim;
      if (u >= 0 && u < out_len) y.col(u) += z.block(j * out, s, out, 1);
    }
  }

  return t.record(
      std::move(y), {x, weight, bias},
      [=](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* gb = tp.grad_target(bias)) *gb += g.rowwise().sum();
        const bool need_w = tp.requires_grad(weight);
        const bool need_x = tp.requires_grad(x);
        if (!need_w && !need_x) return;
        Matrix<Scalar> gz = Matrix<Scalar>::Zero(kernel * out, len);
        for (Eigen::Index s = 0; s < len; ++s) {
          for (Eigen::Index j = 0; j < kernel; ++j) {
            const Eigen::Index u = s * stride + j - trim;
            if (u >= 0 && u < out_len) gz.block(j * out, s, out, 1) = g.col(u);
          }
        }
        if (auto* gw = tp.grad_target(weight)) gw->noalias() += gz * tp.value(x).transpose();
        if (auto* gx = tp.grad_target(x)) gx->noalias() += tp.value(weight).transpose() * gz;
      },
      "transposed_conv1d");
}

/// Highway gate: with h = [h1; h2] (2C x T) and carry x (C x T),
/// returns σ(h1)∘h2 + (1 − σ(h1))∘x.
template <typename Scalar>
Var highway_gate(Tape<Scalar>& t, Var h, Var x) {
  const Eigen::Index c = t.rows(x);
  detail::require(t.rows(h) == 2 * c && t.cols(h) == t.cols(x), "highway_gate: expected h with twice the rows of x");
  const auto& hv = t.value(h);
  const auto& xv = t.value(x);
  Matrix<Scalar> gate = hv.topRows(c).unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
  Matrix<Scalar> y = xv + gate.cwiseProduct(hv.bottomRows(c) - xv);
  return t.record(
      std::move(y), {h, x},
      [h, x, c, gate = std::move(gate)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        const auto& hv = tp.value(h);
        const auto& xv = tp.value(x);
        if (auto* gh = tp.grad_target(h)) {
          const Matrix<Scalar> dgate = gate.array() * (Scalar(1) - gate.array());
          gh->topRows(c) += g.cwiseProduct((hv.bottomRows(c) - xv).cwiseProduct(dgate));
          gh->bottomRows(c) += g.cwiseProduct(gate);
        }
        if (auto* gx = tp.grad_target(x)) *gx += g.cwiseProduct((Scalar(1) - gate.array()).matrix());
      },
      "highway_gate");
}

/// Gated residual convolution block: a conv producing 2C channels
/// followed by highway_gate. Shape preserving.
template <typename Scalar>
Var highway_block(Tape<Scalar>& t, Var x, Var weight, Var bias, ConvSpec spec) {
  detail::require(t.rows(weight) == 2 * t.rows(x), "highway_block: weight must produce twice the input channels");
  return highway_gate(t, conv1d(t, x, weight, bias, spec), x);
}

}  // namespace laughsynth::nn
