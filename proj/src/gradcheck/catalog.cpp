#include "laughsynth/gradcheck/catalog.hpp"

#include <chrono>
#include <cmath>

#include "laughsynth/nn/attention.hpp"
#include "laughsynth/nn/conv.hpp"
#include "laughsynth/nn/losses.hpp"
#include "laughsynth/vocoder/generator.hpp"

namespace laughsynth::gradcheck {

using namespace nn;
using Mat = Matrix<double>;

namespace {

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

/// Values bounded away from 0 so kinked ops are smooth under ±eps.
Mat rand_away_from_zero(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Mat m = randn(rng, r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (std::abs(m(i)) < 0.05) m(i) = m(i) < 0 ? -0.05 - m(i) : 0.05 + m(i);
  return m;
}

/// Reduces any output to a scalar with fixed random weights so every
/// output entry contributes a distinct gradient.
Var project(Tape<double>& t, Var y, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return weighted_sum(t, y, randn(rng, t.rows(y), t.cols(y)));
}

}  // namespace

std::vector<OpCase> catalog() {
  std::vector<OpCase> cases;
  auto dims = [](Rng& rng) { return std::pair<Eigen::Index, Eigen::Index>(rng.range(1, 4), rng.range(1, 6)); };

  auto unary = [&](std::string name, std::function<Var(Tape<double>&, Var)> op, bool away = false) {
    cases.push_back({name, [=](Rng& rng, std::uint64_t seed) {
                       auto [r, c] = dims(rng);
                       GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                         return project(t, op(t, v[0]), seed);
                       };
                       return std::pair{b, std::vector<Mat>{away ? rand_away_from_zero(rng, r, c) : randn(rng, r, c)}};
                     }});
  };
  auto binary = [&](std::string name, std::function<Var(Tape<double>&, Var, Var)> op) {
    cases.push_back({name, [=](Rng& rng, std::uint64_t seed) {
                       auto [r, c] = dims(rng);
                       GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                         return project(t, op(t, v[0], v[1]), seed);
                       };
                       return std::pair{b, std::vector<Mat>{randn(rng, r, c), randn(rng, r, c)}};
                     }});
  };

  binary("add", [](auto& t, Var a, Var b) { return add(t, a, b); });
  binary("sub", [](auto& t, Var a, Var b) { return sub(t, a, b); });
  binary("mul", [](auto& t, Var a, Var b) { return mul(t, a, b); });
  unary("scale", [](auto& t, Var a) { return scale(t, a, -1.7); });
  unary("sigmoid", [](auto& t, Var a) { return sigmoid(t, a); });
  unary("tanh", [](auto& t, Var a) { return nn::tanh(t, a); });
  unary("leaky_relu", [](auto& t, Var a) { return leaky_relu(t, a, 0.2); }, true);
  unary("relu", [](auto& t, Var a) { return relu(t, a); }, true);
  unary("softmax_cols", [](auto& t, Var a) { return softmax_cols(t, a); });
  unary("sum", [](auto& t, Var a) { return sum(t, a); });
  unary("mean", [](auto& t, Var a) { return mean(t, a); });

  cases.push_back({"matmul", [](Rng& rng, std::uint64_t seed) {
                     const auto m = rng.range(1, 4), k = rng.range(1, 4), n = rng.range(1, 4);
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return project(t, matmul(t, v[0], v[1]), seed);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, m, k), randn(rng, k, n)}};
                   }});
  cases.push_back({"matmul_tn", [](Rng& rng, std::uint64_t seed) {
                     const auto m = rng.range(1, 4), k = rng.range(1, 4), n = rng.range(1, 4);
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return project(t, matmul_tn(t, v[0], v[1]), seed);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, k, m), randn(rng, k, n)}};
                   }});
  cases.push_back({"concat_rows+slices", [](Rng& rng, std::uint64_t seed) {
                     const auto r1 = rng.range(1, 3), r2 = rng.range(1, 3), c = rng.range(2, 5);
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       Var cat = concat_rows(t, v[0], v[1]);
                       Var rows = slice_rows(t, cat, 1, r1 + r2 - 1);
                       return project(t, slice_cols(t, rows, 1, c - 1), seed);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, r1, c), randn(rng, r2, c)}};
                   }});
  cases.push_back({"embedding", [](Rng& rng, std::uint64_t seed) {
                     const auto e = rng.range(1, 4), vocab = rng.range(2, 6), n = rng.range(1, 7);
                     std::vector<int> ids;
                     for (int i = 0; i < n; ++i) ids.push_back(static_cast<int>(rng.below(vocab)));
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return project(t, embedding(t, v[0], std::span<const int>(ids)), seed);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, e, vocab)}};
                   }});
  for (bool causal : {false, true}) {
    cases.push_back({causal ? "conv1d causal" : "conv1d", [causal](Rng& rng, std::uint64_t seed) {
                       const auto in = rng.range(1, 3), out = rng.range(1, 3), len = rng.range(1, 9);
                       const ConvSpec spec{static_cast<int>(rng.range(1, 4)), static_cast<int>(rng.range(1, 3)),
                                           causal};
                       GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                         return project(t, conv1d(t, v[0], v[1], v[2], spec), seed);
                       };
                       return std::pair{b, std::vector<Mat>{randn(rng, in, len), randn(rng, out, spec.kernel * in),
                                                            randn(rng, out, 1)}};
                     }});
  }
  cases.push_back({"transposed_conv1d", [](Rng& rng, std::uint64_t seed) {
                     const auto in = rng.range(1, 3), out = rng.range(1, 3), len = rng.range(1, 6);
                     const int stride = static_cast<int>(rng.range(1, 4));
                     const int kernel = stride * static_cast<int>(rng.range(1, 2)) + static_cast<int>(rng.below(2));
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return project(t, transposed_conv1d(t, v[0], v[1], v[2], stride, kernel), seed);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, in, len), randn(rng, kernel * out, in),
                                                          randn(rng, out, 1)}};
                   }});
  cases.push_back({"highway_block", [](Rng& rng, std::uint64_t seed) {
                     const auto ch = rng.range(1, 3), len = rng.range(1, 8);
                     const ConvSpec spec{3, static_cast<int>(rng.range(1, 3)), rng.below(2) == 1};
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return project(t, highway_block(t, v[0], v[1], v[2], spec), seed);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, ch, len), randn(rng, 2 * ch, 3 * ch),
                                                          randn(rng, 2 * ch, 1)}};
                   }});
  cases.push_back({"scaled_dot_attention", [](Rng& rng, std::uint64_t seed) {
                     const auto d = rng.range(1, 4), n = rng.range(1, 5), tl = rng.range(1, 5);
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       auto r = scaled_dot_attention(t, v[0], v[1], v[2]);
                       return add(t, project(t, r.context, seed), project(t, r.alignment, seed + 1));
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, d, tl), randn(rng, d, n), randn(rng, d, n)}};
                   }});
  cases.push_back({"scaled_dot_attention_forced", [](Rng& rng, std::uint64_t seed) {
                     const auto d = rng.range(1, 4), n = rng.range(2, 5), tl = rng.range(2, 5);
                     Mat forced = Mat::Zero(n, tl);
                     Eigen::Array<bool, Eigen::Dynamic, 1> mask(tl);
                     for (Eigen::Index c = 0; c < tl; ++c) {
                       mask(c) = rng.below(2) == 1;
                       forced(static_cast<Eigen::Index>(rng.below(n)), c) = 1.0;
                     }
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       auto r = scaled_dot_attention_forced(t, v[0], v[1], v[2], forced, mask);
                       return project(t, r.context, seed);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, d, tl), randn(rng, d, n), randn(rng, d, n)}};
                   }});
  cases.push_back({"l1_loss", [](Rng& rng, std::uint64_t) {
                     auto [r, c] = std::pair{rng.range(1, 4), rng.range(1, 6)};
                     const Mat target = randn(rng, r, c);
                     Mat pred = target + rand_away_from_zero(rng, r, c);
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) { return l1_loss(t, v[0], target); };
                     return std::pair{b, std::vector<Mat>{pred}};
                   }});
  cases.push_back({"binary_divergence", [](Rng& rng, std::uint64_t) {
                     auto [r, c] = std::pair{rng.range(1, 4), rng.range(1, 6)};
                     const Mat target = rand_open_unit(rng, r, c);
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return binary_divergence(t, v[0], target);
                     };
                     return std::pair{b, std::vector<Mat>{rand_open_unit(rng, r, c)}};
                   }});
  cases.push_back({"sigmoid_binary_divergence", [](Rng& rng, std::uint64_t) {
                     auto [r, c] = std::pair{rng.range(1, 4), rng.range(1, 6)};
                     const Mat target = rand_open_unit(rng, r, c);
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return sigmoid_binary_divergence(t, v[0], target);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, r, c, 2.0)}};
                   }});
  cases.push_back({"guided_attention_loss", [](Rng& rng, std::uint64_t) {
                     const auto n = rng.range(1, 5), tl = rng.range(1, 5);
                     GraphBuilder b = [](Tape<double>& t, const std::vector<Var>& v) {
                       return guided_attention_loss(t, softmax_cols(t, v[0]), 0.2);
                     };
                     return std::pair{b, std::vector<Mat>{randn(rng, n, tl)}};
                   }});
  cases.push_back({"residual_unit", [](Rng& rng, std::uint64_t seed) {
                     const auto c = rng.range(2, 4), len = rng.range(3, 9);
                     const int dilation = static_cast<int>(rng.range(1, 3));
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return project(t, vocoder::residual_unit(t, v[0], v[1], v[2], v[3], v[4], dilation, 0.2),
                                      seed);
                     };
                     return std::pair{b, std::vector<Mat>{rand_away_from_zero(rng, c, len), randn(rng, c, 3 * c, 0.5),
                                                          randn(rng, c, 1, 0.1), randn(rng, c, c, 0.5),
                                                          randn(rng, c, 1, 0.1)}};
                   }});
  cases.push_back({"upsample_stage", [](Rng& rng, std::uint64_t seed) {
                     const auto c = rng.range(1, 3), out = rng.range(1, 3), len = rng.range(1, 6);
                     const int stride = static_cast<int>(rng.range(1, 4));
                     GraphBuilder b = [=](Tape<double>& t, const std::vector<Var>& v) {
                       return project(t, vocoder::upsample_stage(t, v[0], v[1], v[2], stride, 0.2), seed);
                     };
                     return std::pair{b, std::vector<Mat>{rand_away_from_zero(rng, c, len),
                                                          randn(rng, 2 * stride * out, c, 0.5), randn(rng, out, 1, 0.1)}};
                   }});
  return cases;
}

std::vector<OpReport> run_catalog(int seeds, const std::string& filter) {
  std::vector<OpReport> out;
  for (const auto& op : catalog()) {
    if (!filter.empty() && op.name.find(filter) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    OpReport r{op.name, 0.0, seeds, 0.0};
    for (std::uint64_t seed = 1; seed <= static_cast<std::uint64_t>(seeds); ++seed) {
      Rng rng(fnv1a(op.name, seed));
      auto [build, inputs] = op.make(rng, seed);
      r.worst = std::max(r.worst, grad_check(build, inputs).max_relative_error);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(r);
  }
  return out;
}

}  // namespace laughsynth::gradcheck
