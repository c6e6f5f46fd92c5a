#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "laughsynth/dsp/config.hpp"
#include "laughsynth/dsp/waveform.hpp"
#include "laughsynth/nn/adam.hpp"
#include "laughsynth/vocoder/generator.hpp"
#include "laughsynth/vocoder/stft_loss.hpp"

namespace laughsynth::vocoder {

struct GlVocodeOptions {
  int n_iters = 60;
  /// Sharpening exponent applied to linear magnitudes.
  double gamma = 1.3;
  double peak = 0.95;
  /// Below this peak the output is left unnormalized (treated as silence).
  double silence_peak = 1e-3;
  std::optional<std::uint64_t> random_phase_seed;
};

/// Normalized log magnitudes (n_bins x frames, e.g. SSRN output) to a
/// waveform of (frames − 1)·hop samples, or n_fft samples for inputs too
/// short to hold one window.
dsp::Waveform gl_vocode(const Eigen::MatrixXd& mag_normalized, const dsp::DspConfig& cfg,
                        const GlVocodeOptions& options = {});

struct CorrectionOptions {
  bool loudness_match = true;
  /// Inputs with RMS below this come back as silence.
  double silence_rms = 1e-4;
};

/// Analysis (full-rate mel) then synthesis with `g`, cropped to the input
/// length. With loudness matching the output RMS equals the input RMS.
dsp::Waveform correct_waveform(const dsp::Waveform& w, const Generator& g, const dsp::DspConfig& cfg,
                               const CorrectionOptions& options = {});

/// Full-rate normalized mel, the generator's input representation.
Eigen::MatrixXd analysis_mel(const dsp::Waveform& w, const dsp::DspConfig& cfg);

struct CorrectorPair {
  Eigen::MatrixXd mel;     // n_mels x T, normalized, full rate
  Eigen::VectorXd target;  // waveform
};

CorrectorPair make_corrector_pair(const dsp::Waveform& w, const dsp::DspConfig& cfg);

struct ToyTrainOptions {
  int steps = 2000;
  std::uint64_t seed = 1;
  nn::AdamConfig adam{.lr = 1e-3, .beta1 = 0.5, .beta2 = 0.9, .eps = 1e-8};
  StftLossConfig loss;
  int log_every = 100;
};

struct ToyTrainResult {
  Generator generator;
  nn::AdamState<float> adam;
  std::vector<std::pair<int, double>> losses;  // (step, mean loss) at log points
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

class CorrectorDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reconstruction-only training of a fresh generator (multi-scale STFT
/// loss, Adam), one pair per step in order. steps = 0 returns the
/// initialized model. Throws CorrectorDiverged on a non-finite loss.
ToyTrainResult train_corrector_toy(const std::vector<CorrectorPair>& corpus, const GeneratorConfig& gcfg,
                                   const ToyTrainOptions& options);

/// Mean multi-scale STFT loss of `g` over `corpus`.
double corrector_loss(const Generator& g, const std::vector<CorrectorPair>& corpus, const StftLossConfig& cfg = {});

}  // namespace laughsynth::vocoder
