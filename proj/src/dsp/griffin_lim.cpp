#include "laughsynth/dsp/griffin_lim.hpp"

#include <cmath>
#include <numbers>

#include "laughsynth/dsp/stft.hpp"
#include "laughsynth/random.hpp"

namespace laughsynth::dsp {

GriffinLimResult griffin_lim(const Eigen::MatrixXd& magnitude, int n_iters, const DspConfig& cfg,
                             const GriffinLimOptions& options) {
  cfg.validate();
  if (n_iters < 1) throw DspError("griffin_lim: n_iters must be >= 1");
  if (magnitude.rows() != cfg.n_bins()) throw DspError("griffin_lim: magnitude has the wrong number of bins");
  if (!magnitude.allFinite()) throw DspError("griffin_lim: magnitudes must be finite");
  if ((magnitude.array() < 0).any()) throw DspError("griffin_lim: magnitudes must be non-negative");

  const Eigen::Index frames = magnitude.cols();
  const Eigen::Index length = options.length >= 0 ? options.length : (frames - 1) * cfg.hop_length;

  GriffinLimResult result;
  result.waveform.sample_rate = cfg.sample_rate;
  const double ref_norm = magnitude.norm();
  if (ref_norm == 0.0) {
    result.waveform.samples = Eigen::VectorXd::Zero(length);
    result.spectral_convergence.assign(static_cast<std::size_t>(n_iters) + 1, 0.0);
    return result;
  }

  ComplexSpectrogram target;
  if (options.random_phase_seed) {
    Rng rng(*options.random_phase_seed);
    target.bins.resize(magnitude.rows(), frames);
    for (Eigen::Index f = 0; f < frames; ++f)
      for (Eigen::Index k = 0; k < magnitude.rows(); ++k)
        target.bins(k, f) = std::polar(magnitude(k, f), rng.uniform(-std::numbers::pi, std::numbers::pi));
  } else {
    target.bins = magnitude.cast<std::complex<double>>();
  }

  Eigen::VectorXd x = istft(target, cfg, length);
  result.spectral_convergence.reserve(static_cast<std::size_t>(n_iters) + 1);
  for (int it = 0; it <= n_iters; ++it) {
    const ComplexSpectrogram est = stft(x, cfg);
    result.spectral_convergence.push_back((est.magnitude() - magnitude).norm() / ref_norm);
    if (it == n_iters) break;
    target.bins = est.bins.binaryExpr(magnitude, [](std::complex<double> z, double m) {
      const double a = std::abs(z);
      return a > 0.0 ? z * (m / a) : std::complex<double>(m, 0.0);
    });
    x = istft(target, cfg, length);
  }
  result.waveform.samples = std::move(x);
  return result;
}

}  // namespace laughsynth::dsp
