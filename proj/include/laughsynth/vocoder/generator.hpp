#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "laughsynth/nn/layers.hpp"
#include "laughsynth/train/checkpoint.hpp"

namespace laughsynth::vocoder {

class VocoderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mel-to-waveform generator: conv in, transposed-conv upsampling stages
/// with dilated residual units, conv out, tanh.
struct GeneratorConfig {
  int n_mels = 80;
  int channels = 64;
  int min_channels = 8;
  std::vector<int> strides{8, 8, 2, 2};
  std::vector<int> dilations{1, 3, 9};
  float slope = 0.2f;

  int hop() const;
  /// Channel width after stage `s` (-1 = input conv).
  int width(int s) const;
  void validate() const;
  std::map<std::string, std::string> to_hyper() const;
  static GeneratorConfig from_hyper(const std::map<std::string, std::string>& h);
};

/// leaky → conv k3 (dilated) → leaky → conv k1, added to x.
template <typename Scalar>
nn::Var residual_unit(nn::Tape<Scalar>& t, nn::Var x, nn::Var w1, nn::Var b1, nn::Var w2, nn::Var b2, int dilation,
                      Scalar slope) {
  nn::Var r = nn::leaky_relu(t, x, slope);
  r = nn::conv1d(t, r, w1, b1, {3, dilation, false});
  r = nn::leaky_relu(t, r, slope);
  r = nn::conv1d(t, r, w2, b2, {1, 1, false});
  return nn::add(t, x, r);
}

/// leaky → transposed conv (kernel 2·stride): length × stride.
template <typename Scalar>
nn::Var upsample_stage(nn::Tape<Scalar>& t, nn::Var x, nn::Var w, nn::Var b, int stride, Scalar slope) {
  return nn::transposed_conv1d(t, nn::leaky_relu(t, x, slope), w, b, stride, 2 * stride);
}

template <typename Scalar>
void init_generator(nn::ParameterStore<Scalar>& p, const GeneratorConfig& c, Rng& rng) {
  nn::add_conv(p, "gen.in", c.n_mels, c.width(-1), 7, rng);
  for (std::size_t s = 0; s < c.strides.size(); ++s) {
    const int in = c.width(static_cast<int>(s) - 1), out = c.width(static_cast<int>(s));
    const std::string name = fmt::format("gen.up{}", s);
    nn::add_transposed_conv(p, name, in, out, 2 * c.strides[s], c.strides[s], rng);
    for (std::size_t j = 0; j < c.dilations.size(); ++j) {
      nn::add_conv(p, fmt::format("{}.res{}.c1", name, j), out, out, 3, rng);
      nn::add_conv(p, fmt::format("{}.res{}.c2", name, j), out, out, 1, rng);
    }
  }
  nn::add_conv(p, "gen.out", c.width(static_cast<int>(c.strides.size()) - 1), 1, 7, rng);
}

/// mel (n_mels x T) → waveform (1 x T·hop).
template <typename Scalar>
nn::Var generator_forward(nn::Binder<Scalar>& b, const GeneratorConfig& c, nn::Var mel) {
  auto& t = b.tape();
  const auto slope = static_cast<Scalar>(c.slope);
  nn::Var h = b.conv(mel, "gen.in", {7, 1, false});
  for (std::size_t s = 0; s < c.strides.size(); ++s) {
    const std::string name = fmt::format("gen.up{}", s);
    h = upsample_stage(t, h, b(name + ".w"), b(name + ".b"), c.strides[s], slope);
    for (std::size_t j = 0; j < c.dilations.size(); ++j) {
      const std::string r = fmt::format("{}.res{}", name, j);
      h = residual_unit(t, h, b(r + ".c1.w"), b(r + ".c1.b"), b(r + ".c2.w"), b(r + ".c2.b"), c.dilations[j], slope);
    }
  }
  h = nn::leaky_relu(t, h, slope);
  return nn::tanh(t, b.conv(h, "gen.out", {7, 1, false}));
}

class Generator {
 public:
  Generator(const GeneratorConfig& cfg, std::uint64_t seed);
  /// Throws VocoderError on missing, misshapen or extra tensors.
  Generator(const GeneratorConfig& cfg, nn::ParameterStore<float> params);

  const GeneratorConfig& config() const { return cfg_; }
  nn::ParameterStore<float>& params() { return params_; }
  const nn::ParameterStore<float>& params() const { return params_; }

  nn::Var forward(nn::Binder<float>& b, nn::Var mel) const;
  /// Normalized full-rate mel (n_mels x T) → T·hop samples in [−1, 1].
  Eigen::VectorXd generate(const Eigen::MatrixXd& mel) const;

 private:
  GeneratorConfig cfg_;
  nn::ParameterStore<float> params_;
};

train::Checkpoint generator_checkpoint(const Generator& g, const nn::AdamState<float>& adam, std::uint64_t dsp_fp,
                                       std::uint64_t step, std::vector<std::uint64_t> provenance);
Generator generator_from_checkpoint(const train::Checkpoint& c);

}  // namespace laughsynth::vocoder
