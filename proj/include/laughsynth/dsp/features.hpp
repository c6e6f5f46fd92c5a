#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

#include "laughsynth/dsp/config.hpp"
#include "laughsynth/dsp/stft.hpp"
#include "laughsynth/dsp/waveform.hpp"

namespace laughsynth::dsp {

/// Floor applied before log compression.
inline constexpr double kLogFloor = 1e-5;

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Magnitude spectrogram, one column per frame (n_fft/2+1 rows). Either
/// linear magnitudes or normalized log-magnitudes in [0, 1].
struct MagSpectrogram {
  Eigen::MatrixXd frames;
  bool normalized = false;

  Eigen::Index n_frames() const { return frames.cols(); }
};

/// Normalized log-mel spectrogram, one column per frame (n_mels rows).
struct MelSpectrogram {
  Eigen::MatrixXd frames;
  std::uint64_t config_fingerprint = 0;
  /// Time decimation applied (1 = full frame rate).
  int reduction = 1;

  Eigen::Index n_frames() const { return frames.cols(); }
};

struct Features {
  MelSpectrogram mel;
  MagSpectrogram mag;
};

/// Triangular filters on the HTK mel scale, n_mels x (n_fft/2+1). Throws
/// DspError when some filter covers no FFT bin.
Eigen::MatrixXd mel_filterbank(const DspConfig& cfg);

Eigen::VectorXd preemphasize(const Eigen::VectorXd& x, double coeff);
/// Inverse IIR of preemphasize().
Eigen::VectorXd deemphasize(const Eigen::VectorXd& x, double coeff);

/// 20·log10(max(floor, v)) mapped through (db − ref_db + max_db)/max_db
/// and clipped to [0, 1].
Eigen::MatrixXd normalize_db(const Eigen::MatrixXd& linear, const DspConfig& cfg);
/// Inverse of normalize_db on [0, 1] (values are clipped first).
Eigen::MatrixXd denormalize_db(const Eigen::MatrixXd& normalized, const DspConfig& cfg);

/// pre-emphasis → STFT → |·| → (mel projection) → log → normalize. The
/// mel branch keeps every reduction_factor-th frame when `decimate` is
/// set; the magnitude branch is always full rate.
Features mel_spectrogram(const Waveform& w, const DspConfig& cfg, bool decimate = true);

}  // namespace laughsynth::dsp
