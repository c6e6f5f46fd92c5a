#pragma once

// Differentiable building blocks over channel-major activations: every
// activation is a (channels x time) matrix, one column per time step.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "laughsynth/nn/tape.hpp"

namespace laughsynth::nn {

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename Scalar>
void require_same_shape(const Tape<Scalar>& t, Var a, Var b, const char* op) {
  require(t.rows(a) == t.rows(b) && t.cols(a) == t.cols(b),
          std::string(op) + ": operand shapes differ");
}

}  // namespace detail

template <typename Scalar>
Var add(Tape<Scalar>& t, Var a, Var b) {
  detail::require_same_shape(t, a, b, "add");
  return t.record(
      t.value(a) + t.value(b), {a, b},
      [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) *ga += g;
        if (auto* gb = tp.grad_target(b)) *gb += g;
      },
      "add");
}

template <typename Scalar>
Var sub(Tape<Scalar>& t, Var a, Var b) {
  detail::require_same_shape(t, a, b, "sub");
  return t.record(
      t.value(a) - t.value(b), {a, b},
      [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) *ga += g;
        if (auto* gb = tp.grad_target(b)) *gb -= g;
      },
      "sub");
}

template <typename Scalar>
Var mul(Tape<Scalar>& t, Var a, Var b) {
  detail::require_same_shape(t, a, b, "mul");
  return t.record(
      t.value(a).cwiseProduct(t.value(b)), {a, b},
      [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) *ga += g.cwiseProduct(tp.value(b));
        if (auto* gb = tp.grad_target(b)) *gb += g.cwiseProduct(tp.value(a));
      },
      "mul");
}

template <typename Scalar>
Var scale(Tape<Scalar>& t, Var a, Scalar s) {
  return t.record(
      t.value(a) * s, {a},
      [a, s](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) *ga += g * s;
      },
      "scale");
}

template <typename Scalar>
Var sigmoid(Tape<Scalar>& t, Var a) {
  Matrix<Scalar> y = t.value(a).unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
  Matrix<Scalar> dy = y.array() * (Scalar(1) - y.array());
  return t.record(
      std::move(y), {a},
      [a, dy = std::move(dy)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) *ga += g.cwiseProduct(dy);
      },
      "sigmoid");
}

template <typename Scalar>
Var tanh(Tape<Scalar>& t, Var a) {
  Matrix<Scalar> y = t.value(a).array().tanh().matrix();
  Matrix<Scalar> dy = (Scalar(1) - y.array().square()).matrix();
  return t.record(
      std::move(y), {a},
      [a, dy = std::move(dy)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) *ga += g.cwiseProduct(dy);
      },
      "tanh");
}

template <typename Scalar>
Var leaky_relu(Tape<Scalar>& t, Var a, Scalar slope) {
  const auto& x = t.value(a);
  Matrix<Scalar> y = x.unaryExpr([slope](Scalar v) { return v > 0 ? v : slope * v; });
  return t.record(
      std::move(y), {a},
      [a, slope](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) {
          const auto& x = tp.value(a);
          *ga += g.binaryExpr(x, [slope](Scalar gv, Scalar xv) { return xv > 0 ? gv : slope * gv; });
        }
      },
      "leaky_relu");
}

template <typename Scalar>
Var relu(Tape<Scalar>& t, Var a) {
  return leaky_relu(t, a, Scalar(0));
}

/// a * b (ordinary matrix product).
template <typename Scalar>
Var matmul(Tape<Scalar>& t, Var a, Var b) {
  detail::require(t.cols(a) == t.rows(b), "matmul: inner dimensions differ");
  return t.record(
      t.value(a) * t.value(b), {a, b},
      [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) ga->noalias() += g * tp.value(b).transpose();
        if (auto* gb = tp.grad_target(b)) gb->noalias() += tp.value(a).transpose() * g;
      },
      "matmul");
}

/// aᵀ * b without materializing the transpose.
template <typename Scalar>
Var matmul_tn(Tape<Scalar>& t, Var a, Var b) {
  detail::require(t.rows(a) == t.rows(b), "matmul_tn: inner dimensions differ");
  return t.record(
      t.value(a).transpose() * t.value(b), {a, b},
      [a, b](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) ga->noalias() += tp.value(b) * g.transpose();
        if (auto* gb = tp.grad_target(b)) gb->noalias() += tp.value(a) * g;
      },
      "matmul_tn");
}

template <typename Scalar>
Var concat_rows(Tape<Scalar>& t, Var a, Var b) {
  detail::require(t.cols(a) == t.cols(b), "concat_rows: column counts differ");
  const Eigen::Index ra = t.rows(a);
  Matrix<Scalar> y(ra + t.rows(b), t.cols(a));
  y << t.value(a), t.value(b);
  return t.record(
      std::move(y), {a, b},
      [a, b, ra](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) *ga += g.topRows(ra);
        if (auto* gb = tp.grad_target(b)) *gb += g.bottomRows(g.rows() - ra);
      },
      "concat_rows");
}

template <typename Scalar>
Var slice_rows(Tape<Scalar>& t, Var a, Eigen::Index start, Eigen::Index count) {
  detail::require(start >= 0 && count >= 0 && start + count <= t.rows(a), "slice_rows: out of range");
  return t.record(
      t.value(a).middleRows(start, count), {a},
      [a, start, count](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) ga->middleRows(start, count) += g;
      },
      "slice_rows");
}

template <typename Scalar>
Var slice_cols(Tape<Scalar>& t, Var a, Eigen::Index start, Eigen::Index count) {
  detail::require(start >= 0 && count >= 0 && start + count <= t.cols(a), "slice_cols: out of range");
  return t.record(
      t.value(a).middleCols(start, count), {a},
      [a, start, count](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) ga->middleCols(start, count) += g;
      },
      "slice_cols");
}

/// Column-wise softmax: every column of the result sums to one.
template <typename Scalar>
Var softmax_cols(Tape<Scalar>& t, Var a) {
  Matrix<Scalar> y = t.value(a);
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    auto col = y.col(c);
    col.array() = (col.array() - col.maxCoeff()).exp();
    col /= col.sum();
  }
  Matrix<Scalar> saved = y;
  return t.record(
      std::move(y), {a},
      [a, y = std::move(saved)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) {
          // d/dx softmax: y ∘ (g − <g, y>) per column.
          const auto dots = (g.cwiseProduct(y)).colwise().sum();
          *ga += y.cwiseProduct(g - dots.replicate(g.rows(), 1));
        }
      },
      "softmax_cols");
}

/// Looks up columns of `table` (dim x vocab) for each id.
template <typename Scalar>
Var embedding(Tape<Scalar>& t, Var table, std::span<const int> ids) {
  const auto& w = t.value(table);
  Matrix<Scalar> y(w.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t n = 0; n < ids.size(); ++n) {
    detail::require(ids[n] >= 0 && ids[n] < w.cols(), "embedding: id out of range");
    y.col(static_cast<Eigen::Index>(n)) = w.col(ids[n]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return t.record(
      std::move(y), {table},
      [table, idx = std::move(idx)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* gt = tp.grad_target(table)) {
          for (std::size_t n = 0; n < idx.size(); ++n) gt->col(idx[n]) += g.col(static_cast<Eigen::Index>(n));
        }
      },
      "embedding");
}

template <typename Scalar>
Var sum(Tape<Scalar>& t, Var a) {
  Matrix<Scalar> y(1, 1);
  y(0, 0) = t.value(a).sum();
  return t.record(
      std::move(y), {a},
      [a](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) ga->array() += g(0, 0);
      },
      "sum");
}

template <typename Scalar>
Var mean(Tape<Scalar>& t, Var a) {
  const auto n = static_cast<Scalar>(t.value(a).size());
  return scale(t, sum(t, a), Scalar(1) / n);
}

/// Frobenius inner product with a constant weight matrix; reduces any
/// output to a scalar for gradient checking.
template <typename Scalar>
Var weighted_sum(Tape<Scalar>& t, Var a, const Matrix<Scalar>& weights) {
  detail::require(weights.rows() == t.rows(a) && weights.cols() == t.cols(a), "weighted_sum: shape mismatch");
  Matrix<Scalar> y(1, 1);
  y(0, 0) = t.value(a).cwiseProduct(weights).sum();
  return t.record(
      std::move(y), {a},
      [a, weights](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        if (auto* ga = tp.grad_target(a)) *ga += weights * g(0, 0);
      },
      "weighted_sum");
}

}  // namespace laughsynth::nn
