#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "laughsynth/nn/adam.hpp"
#include "laughsynth/nn/attention.hpp"
#include "laughsynth/nn/conv.hpp"
#include "laughsynth/gradcheck/catalog.hpp"
#include "laughsynth/nn/grad_check.hpp"
#include "laughsynth/nn/losses.hpp"
#include "laughsynth/nn/parameters.hpp"
#include "laughsynth/random.hpp"

using namespace laughsynth;
using namespace laughsynth::nn;
using Mat = Matrix<double>;

namespace {

constexpr double kGradTol = 1e-4;
constexpr int kSeeds = 20;

Mat randn(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
  return m;
}

Mat rand_open_unit(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(0.05, 0.95);
  return m;
}

}  // namespace

TEST_CASE("every op passes the finite-difference gradient check over 20 seeds") {
  const auto reports = gradcheck::run_catalog(kSeeds);
  CHECK(reports.size() >= 20);
  for (const auto& r : reports) {
    INFO(r.name << " max relative error " << r.worst);
    CHECK(r.worst < kGradTol);
  }
}

TEST_CASE("grad_check detects a wrong backward") {
  GraphBuilder broken = [](Tape<double>& t, const std::vector<Var>& v) {
    Var y = t.record(t.value(v[0]).array().square().matrix(), {v[0]},
                     [x = v[0]](Tape<double>& tp, const Mat& g) {
                       if (auto* gx = tp.grad_target(x)) *gx += g.cwiseProduct(tp.value(x));  // missing factor 2
                     },
                     "broken_square");
    return sum(t, y);
  };
  Rng rng(1);
  CHECK(grad_check(broken, {randn(rng, 2, 3)}).max_relative_error > 0.1);
}

TEST_CASE("conv1d kernel 1 with identity weight is the identity") {
  Rng rng(3);
  Tape<double> t;
  const Mat xv = randn(rng, 4, 7);
  Var y = conv1d(t, t.constant(xv), t.constant(Mat::Identity(4, 4)), t.constant(Mat::Zero(4, 1)), {});
  CHECK(t.value(y) == xv);
}

TEST_CASE("causal conv1d: impulse at t=5 gives zero output before 5") {
  Rng rng(5);
  Tape<double> t;
  Mat x = Mat::Zero(2, 12);
  x(0, 5) = 1.0;
  x(1, 5) = -2.0;
  Var y = conv1d(t, t.constant(x), t.constant(randn(rng, 3, 6)), t.constant(Mat::Zero(3, 1)), {3, 1, true});
  CHECK(t.value(y).leftCols(5).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.value(y).col(5).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("property: causal conv output before t is unaffected by perturbing input at t") {
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    Rng rng(seed);
    const auto in = rng.range(1, 4), out = rng.range(1, 4), len = rng.range(2, 16);
    const ConvSpec spec{static_cast<int>(rng.range(1, 5)), static_cast<int>(rng.range(1, 4)), true};
    const Mat w = randn(rng, out, spec.kernel * in), b = randn(rng, out, 1);
    const Mat x = randn(rng, in, len);
    const auto at = rng.range(0, len - 1);
    Mat x2 = x;
    x2.col(at) += randn(rng, in, 1);
    Tape<double> t;
    const Mat y1 = t.value(conv1d(t, t.constant(x), t.constant(w), t.constant(b), spec));
    const Mat y2 = t.value(conv1d(t, t.constant(x2), t.constant(w), t.constant(b), spec));
    if (at > 0) CHECK((y1.leftCols(at) - y2.leftCols(at)).cwiseAbs().maxCoeff() == 0.0);
    // Highway blocks built on causal convs inherit the property.
    const Mat hw = randn(rng, 2 * in, spec.kernel * in), hb = randn(rng, 2 * in, 1);
    const Mat h1 = t.value(highway_block(t, t.constant(x), t.constant(hw), t.constant(hb), spec));
    const Mat h2 = t.value(highway_block(t, t.constant(x2), t.constant(hw), t.constant(hb), spec));
    if (at > 0) CHECK((h1.leftCols(at) - h2.leftCols(at)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("conv1d rejects mismatched shapes") {
  Tape<double> t;
  Var x = t.constant(Mat::Zero(3, 5));
  CHECK_THROWS_AS(conv1d(t, x, t.constant(Mat::Zero(2, 4)), t.constant(Mat::Zero(2, 1)), {2}), ShapeError);
  CHECK_THROWS_AS(conv1d(t, x, t.constant(Mat::Zero(2, 6)), t.constant(Mat::Zero(3, 1)), {2}), ShapeError);
  CHECK_THROWS_AS(conv1d(t, x, t.constant(Mat::Zero(2, 6)), t.constant(Mat::Zero(2, 1)), {2, 0}), ShapeError);
}

TEST_CASE("transposed_conv1d length contract and identity") {
  Rng rng(8);
  Tape<double> t;
  const Mat x = randn(rng, 3, 10);
  Var id = transposed_conv1d(t, t.constant(x), t.constant(Mat::Identity(3, 3)), t.constant(Mat::Zero(3, 1)), 1, 1);
  CHECK(t.value(id) == x);
  Var up = transposed_conv1d(t, t.constant(x), t.constant(randn(rng, 2 * 8, 3)), t.constant(Mat::Zero(2, 1)), 4, 8);
  CHECK(t.cols(up) == 40);
  CHECK(t.rows(up) == 2);
  CHECK_THROWS_AS(
      transposed_conv1d(t, t.constant(x), t.constant(randn(rng, 8, 2)), t.constant(Mat::Zero(2, 1)), 4, 4),
      ShapeError);
}

TEST_CASE("highway block gate limits") {
  Rng rng(9);
  const Mat x = randn(rng, 3, 6);
  Mat w = randn(rng, 6, 9, 0.1);
  Mat b = Mat::Zero(6, 1);
  {
    b.topRows(3).setConstant(-40.0);
    Tape<double> t;
    Var y = highway_block(t, t.constant(x), t.constant(w), t.constant(b), {3});
    CHECK((t.value(y) - x).cwiseAbs().maxCoeff() < 1e-3);
  }
  {
    b.topRows(3).setConstant(40.0);
    Tape<double> t;
    Var h = conv1d(t, t.constant(x), t.constant(w), t.constant(b), {3});
    Var y = highway_gate(t, h, t.constant(x));
    CHECK((t.value(y) - t.value(h).bottomRows(3)).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("attention saturates to a one-hot column for a scaled key") {
  const Eigen::Index d = 4, n = 4;
  Rng rng(10);
  const Mat keys = Mat::Identity(d, n);
  const Mat values = randn(rng, 3, n);
  // Values must share dim d with queries for R = V·A; here V is 3 x N,
  // which the op allows since only K and Q must agree.
  Mat queries(d, 2);
  queries.col(0) = 50.0 * keys.col(2);
  queries.col(1) = 50.0 * keys.col(0);
  Tape<double> t;
  auto r = scaled_dot_attention(t, t.constant(queries), t.constant(keys), t.constant(values));
  const Mat& a = t.value(r.alignment);
  CHECK(a(2, 0) > 1.0 - 1e-6);
  CHECK(a(0, 1) > 1.0 - 1e-6);
  CHECK((t.value(r.context).col(0) - values.col(2)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("property: attention columns sum to 1 and R is a convex combination of V") {
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    Rng rng(seed + 100);
    const auto d = rng.range(1, 8), n = rng.range(1, 12), tl = rng.range(1, 12);
    const Mat v = randn(rng, d, n);
    Tape<double> t;
    auto r = scaled_dot_attention(t, t.constant(randn(rng, d, tl, 3.0)), t.constant(randn(rng, d, n, 3.0)),
                                  t.constant(v));
    const Mat& a = t.value(r.alignment);
    CHECK((a.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
    CHECK(a.minCoeff() >= 0.0);
    const Mat& ctx = t.value(r.context);
    for (Eigen::Index i = 0; i < d; ++i) {
      CHECK(ctx.row(i).minCoeff() >= v.row(i).minCoeff() - 1e-12);
      CHECK(ctx.row(i).maxCoeff() <= v.row(i).maxCoeff() + 1e-12);
    }
  }
}

TEST_CASE("attention rejects dimension mismatch") {
  Tape<double> t;
  CHECK_THROWS_AS(scaled_dot_attention(t, t.constant(Mat::Zero(3, 2)), t.constant(Mat::Zero(4, 5)),
                                       t.constant(Mat::Zero(4, 5))),
                  ShapeError);
  CHECK_THROWS_AS(scaled_dot_attention(t, t.constant(Mat::Zero(4, 2)), t.constant(Mat::Zero(4, 5)),
                                       t.constant(Mat::Zero(4, 6))),
                  ShapeError);
}

TEST_CASE("losses vanish at the target") {
  Rng rng(12);
  const Mat target = rand_open_unit(rng, 5, 7);
  Tape<double> t;
  Var p = t.constant(target);
  CHECK(t.value(l1_loss(t, p, target))(0, 0) == 0.0);
  CHECK(std::abs(t.value(binary_divergence(t, p, target))(0, 0)) < 1e-9);
  const Mat logits = target.unaryExpr([](double v) { return std::log(v / (1.0 - v)); });
  CHECK(std::abs(t.value(sigmoid_binary_divergence(t, t.constant(logits), target))(0, 0)) < 1e-9);
}

TEST_CASE("l1 loss of a constant 0.5 offset is 0.5") {
  const Mat target = Mat::Constant(3, 4, 0.25);
  Tape<double> t;
  CHECK(t.value(l1_loss(t, t.constant(Mat(target.array() + 0.5)), target))(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("losses match direct summation") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const Mat p = rand_open_unit(rng, 4, 9), q = rand_open_unit(rng, 4, 9);
    double l1 = 0.0, bd = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double pp = p(i, j), tt = q(i, j);
        l1 += std::abs(pp - tt);
        bd += -tt * std::log(pp) - (1 - tt) * std::log(1 - pp) + tt * std::log(tt) + (1 - tt) * std::log(1 - tt);
      }
    l1 /= static_cast<double>(p.size());
    bd /= static_cast<double>(p.size());
    Tape<double> t;
    CHECK(std::abs(t.value(l1_loss(t, t.constant(p), q))(0, 0) - l1) < 1e-10);
    CHECK(std::abs(t.value(binary_divergence(t, t.constant(p), q))(0, 0) - bd) < 1e-10);
    const Mat logits = p.unaryExpr([](double v) { return std::log(v / (1.0 - v)); });
    CHECK(std::abs(t.value(sigmoid_binary_divergence(t, t.constant(logits), q))(0, 0) - bd) < 1e-10);
  }
}

TEST_CASE("binary divergence rejects values outside (0,1)") {
  const Mat target = Mat::Constant(2, 2, 0.5);
  Tape<double> t;
  CHECK_THROWS_AS(binary_divergence(t, t.constant(Mat::Constant(2, 2, 1.0)), target), std::domain_error);
  CHECK_THROWS_AS(binary_divergence(t, t.constant(Mat::Constant(2, 2, -0.1)), target), std::domain_error);
}

TEST_CASE("guided attention loss ordering, uniform oracle and wide-g limit") {
  const Eigen::Index n = 8;
  const Mat diag = Mat::Identity(n, n);
  const Mat anti = diag.rowwise().reverse();
  Tape<double> t;
  const double l_diag = t.value(guided_attention_loss(t, t.constant(diag), 0.2))(0, 0);
  const double l_anti = t.value(guided_attention_loss(t, t.constant(anti), 0.2))(0, 0);
  CHECK(l_diag < l_anti);
  CHECK(l_anti < 1.0);
  CHECK(l_diag >= 0.0);

  const Eigen::Index rows = 5, cols = 11;
  double mean_w = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double dlt = static_cast<double>(i) / rows - static_cast<double>(j) / cols;
      mean_w += 1.0 - std::exp(-dlt * dlt / (2.0 * 0.2 * 0.2));
    }
  mean_w /= rows * cols;
  const Mat uniform = Mat::Constant(rows, cols, 1.0 / rows);
  CHECK(t.value(guided_attention_loss(t, t.constant(uniform), 0.2))(0, 0) == doctest::Approx(mean_w / rows));

  CHECK(t.value(guided_attention_loss(t, t.constant(anti), 1e6))(0, 0) < 1e-9);
  CHECK_THROWS(guided_attention_loss(t, t.constant(anti), 0.0));
}

TEST_CASE("Adam: zero gradient leaves parameters unchanged and counts the step") {
  ParameterStore<float> store;
  Rng rng(1);
  auto& p = store.add_uniform("w", 3, 4, 4, rng);
  const Matrix<float> before = p.value;
  store.zero_grad();
  AdamState<float> state;
  adam_step(store, state, {});
  CHECK(p.value == before);
  CHECK(state.step == 1);
}

TEST_CASE("Adam: first step with unit gradient moves by about lr") {
  ParameterStore<double> store;
  auto& p = store.add_constant("x", 1, 1, 0.0);
  p.grad.setConstant(1.0);
  AdamState<double> state;
  adam_step(store, state, {.lr = 0.1});
  // m̂ = 1, v̂ = 1 after bias correction.
  const double expected = -0.1 * 1.0 / (1.0 + 1e-8);
  CHECK(p.value(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

// Standard (0.9, 0.999) moments; with the training betas (0.5, 0.9) the
// iterate keeps oscillating at about 2e-2 after 500 steps.
TEST_CASE("Adam minimizes a quadratic bowl") {
  ParameterStore<double> store;
  auto& p = store.add_constant("x", 1, 1, 1.0);
  AdamState<double> state;
  for (int i = 0; i < 500; ++i) {
    p.grad(0, 0) = 2.0 * p.value(0, 0);
    adam_step(store, state, {.lr = 0.05, .beta1 = 0.9, .beta2 = 0.999});
  }
  CHECK(std::abs(p.value(0, 0)) < 1e-2);
}

TEST_CASE("Adam names the parameter with a non-finite gradient and changes nothing") {
  ParameterStore<float> store;
  auto& a = store.add_constant("encoder.w", 2, 2, 1.0f);
  auto& b = store.add_constant("decoder.b", 2, 1, 1.0f);
  a.grad.setConstant(1.0f);
  b.grad(1, 0) = std::numeric_limits<float>::quiet_NaN();
  AdamState<float> state;
  CHECK_THROWS_WITH_AS(adam_step(store, state, {}), doctest::Contains("decoder.b"), NonFiniteError);
  CHECK(a.value.isConstant(1.0f));
  CHECK(state.step == 0);
  CHECK_THROWS(adam_step(store, state, {.lr = 0.0}));
}

TEST_CASE("non-trainable parameters are frozen by Adam and excluded from updates") {
  ParameterStore<double> store;
  auto& frozen = store.add("frozen", Mat::Ones(2, 2), false);
  auto& live = store.add("live", Mat::Ones(2, 2));
  frozen.grad.setConstant(1.0);
  live.grad.setConstant(1.0);
  AdamState<double> state;
  adam_step(store, state, {.lr = 0.1});
  CHECK(frozen.value.isConstant(1.0));
  CHECK(live.value(0, 0) < 1.0);
}

TEST_CASE("parameter store rejects duplicate names") {
  ParameterStore<float> store;
  store.add_constant("w", 1, 1, 0.0f);
  CHECK_THROWS(store.add_constant("w", 1, 1, 0.0f));
  CHECK(store.find("missing") == nullptr);
  CHECK_THROWS(store.at("missing"));
}

TEST_CASE("backward accumulates into parameter gradients") {
  ParameterStore<double> store;
  auto& w = store.add("w", Mat::Constant(1, 1, 3.0));
  store.zero_grad();
  for (int i = 0; i < 2; ++i) {
    Tape<double> t;
    Var p = t.parameter(w);
    t.backward(sum(t, mul(t, p, p)));
  }
  CHECK(w.grad(0, 0) == doctest::Approx(12.0));
}

TEST_CASE("non-finite values are rejected as they are produced") {
  Tape<double> t;
  Var x = t.constant(Mat::Constant(1, 1, 1e308));
  CHECK_THROWS_AS(scale(t, x, 10.0), NonFiniteError);
}
