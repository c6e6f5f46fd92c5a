#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "laughsynth/dsp/config.hpp"
#include "laughsynth/dsp/waveform.hpp"

namespace laughsynth::dsp {

struct GriffinLimOptions {
  /// Start from uniformly random phase instead of zero phase.
  std::optional<std::uint64_t> random_phase_seed;
  /// Output length in samples; defaults to (frames-1)*hop.
  Eigen::Index length = -1;
};

struct GriffinLimResult {
  Waveform waveform;
  /// ‖|STFT(x_t)| − m‖_F / ‖m‖_F for t = 0 (initial estimate) .. n_iters.
  std::vector<double> spectral_convergence;
};

/// Phase retrieval by alternating projections: x ← istft(m · e^{i∠stft(x)}).
/// `magnitude` is linear (n_fft/2+1 x frames). An all-zero magnitude
/// yields silence with every convergence value reported as 0.
GriffinLimResult griffin_lim(const Eigen::MatrixXd& magnitude, int n_iters, const DspConfig& cfg,
                             const GriffinLimOptions& options = {});

}  // namespace laughsynth::dsp
