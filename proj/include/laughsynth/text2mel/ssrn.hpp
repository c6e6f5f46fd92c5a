#pragma once

#include <cstdint>

#include "laughsynth/text2mel/text2mel.hpp"

namespace laughsynth::text2mel {

struct SsrnConfig {
  int n_mels = 80;
  int n_bins = 513;
  int channels = 64;
  /// Must be a power of two; one stride-2 transposed conv per factor of 2.
  int reduction_factor = 4;
  LossWeights weights;

  Hyper to_hyper() const;
  static SsrnConfig from_hyper(const Hyper& h);
};

struct SsrnLoss {
  Var total;
  float l1 = 0;
  float divergence = 0;
  float value = 0;
};

/// Spectrogram super-resolution: n_mels x T → n_bins x (T·reduction).
class Ssrn {
 public:
  Ssrn(const SsrnConfig& cfg, std::uint64_t seed);
  Ssrn(const SsrnConfig& cfg, Params params);

  const SsrnConfig& config() const { return cfg_; }
  Params& params() { return params_; }
  const Params& params() const { return params_; }

  struct Output {
    Var logits;
    Var magnitude;
  };
  Output forward(nn::Binder<float>& b, Var mel) const;
  SsrnLoss loss(Tape& t, const Output& out, const Eigen::MatrixXf& target) const;

  /// Normalized magnitudes in (0, 1).
  Eigen::MatrixXf infer(const Eigen::MatrixXf& mel) const;

 private:
  SsrnConfig cfg_;
  Params params_;
};

/// Pads (with zeros) or crops a full-rate magnitude target to `frames`.
Eigen::MatrixXf fit_frames(const Eigen::MatrixXf& m, Eigen::Index frames);

}  // namespace laughsynth::text2mel
