#include "laughsynth/dsp/features.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace laughsynth::dsp {

Eigen::MatrixXd mel_filterbank(const DspConfig& cfg) {
  cfg.validate();
  const int bins = cfg.n_bins();
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  Eigen::VectorXd edges(cfg.n_mels + 2);
  for (int m = 0; m < cfg.n_mels + 2; ++m)
    edges(m) = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges(m), mid = edges(m + 1), hi = edges(m + 2);
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(rise, fall));
    }
    if (!(fb.row(m).sum() > 0.0))
      throw DspError(fmt::format("mel filter {} of {} covers no FFT bin; reduce n_mels or widen fmin..fmax", m,
                                 cfg.n_mels));
  }
  return fb;
}

Eigen::VectorXd preemphasize(const Eigen::VectorXd& x, double coeff) {
  Eigen::VectorXd y = x;
  for (Eigen::Index n = x.size() - 1; n >= 1; --n) y(n) = x(n) - coeff * x(n - 1);
  return y;
}

Eigen::VectorXd deemphasize(const Eigen::VectorXd& x, double coeff) {
  Eigen::VectorXd y = x;
  for (Eigen::Index n = 1; n < x.size(); ++n) y(n) = x(n) + coeff * y(n - 1);
  return y;
}

Eigen::MatrixXd normalize_db(const Eigen::MatrixXd& linear, const DspConfig& cfg) {
  return linear.unaryExpr([&](double v) {
    const double db = 20.0 * std::log10(std::max(kLogFloor, v));
    return std::clamp((db - cfg.ref_db + cfg.max_db) / cfg.max_db, 0.0, 1.0);
  });
}

Eigen::MatrixXd denormalize_db(const Eigen::MatrixXd& normalized, const DspConfig& cfg) {
  return normalized.unaryExpr([&](double v) {
    const double db = std::clamp(v, 0.0, 1.0) * cfg.max_db - cfg.max_db + cfg.ref_db;
    return std::pow(10.0, db / 20.0);
  });
}

Features mel_spectrogram(const Waveform& w, const DspConfig& cfg, bool decimate) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate)
    throw DspError(fmt::format("mel_spectrogram: waveform is {} Hz but config expects {} Hz", w.sample_rate,
                               cfg.sample_rate));
  const Eigen::MatrixXd mag = stft(preemphasize(w.samples, cfg.preemphasis), cfg).magnitude();
  const Eigen::MatrixXd mel = mel_filterbank(cfg) * mag;

  Features out;
  out.mag.frames = normalize_db(mag, cfg);
  out.mag.normalized = true;

  const Eigen::MatrixXd mel_norm = normalize_db(mel, cfg);
  const int r = decimate ? cfg.reduction_factor : 1;
  const Eigen::Index kept = (mel_norm.cols() + r - 1) / r;
  out.mel.frames.resize(mel_norm.rows(), kept);
  for (Eigen::Index t = 0; t < kept; ++t) out.mel.frames.col(t) = mel_norm.col(t * r);
  out.mel.config_fingerprint = cfg.fingerprint();
  out.mel.reduction = r;
  return out;
}

}  // namespace laughsynth::dsp
