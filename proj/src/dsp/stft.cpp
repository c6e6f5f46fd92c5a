#include "laughsynth/dsp/stft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <fmt/format.h>
#include <unsupported/Eigen/FFT>

namespace laughsynth::dsp {

namespace {

Eigen::Index pad_of(const DspConfig& cfg) { return cfg.center ? cfg.n_fft / 2 : 0; }

/// Maps a position in the padded signal back to the original sample it
/// holds (reflect padding), or -1 when it has no source.
Eigen::Index source_index(Eigen::Index padded, Eigen::Index pad, Eigen::Index length) {
  Eigen::Index j = padded - pad;
  if (j < 0) j = -j;
  if (j >= length) j = 2 * (length - 1) - j;
  return (j >= 0 && j < length) ? j : -1;
}

}  // namespace

Eigen::VectorXd analysis_window(const DspConfig& cfg) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(cfg.n_fft);
  const int offset = (cfg.n_fft - cfg.win_length) / 2;
  for (int n = 0; n < cfg.win_length; ++n)
    w(offset + n) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / cfg.win_length);
  return w;
}

Eigen::Index frame_count(Eigen::Index length, const DspConfig& cfg) {
  const Eigen::Index padded = length + 2 * pad_of(cfg);
  if (padded < cfg.n_fft) return 0;
  return 1 + (padded - cfg.n_fft) / cfg.hop_length;
}

ComplexSpectrogram stft(const Eigen::VectorXd& samples, const DspConfig& cfg) {
  const Eigen::Index len = samples.size();
  const Eigen::Index pad = pad_of(cfg);
  if (len < cfg.win_length || (cfg.center && len <= pad) || frame_count(len, cfg) == 0)
    throw DspError(fmt::format("stft: waveform of {} samples is shorter than one window", len));

  const Eigen::VectorXd window = analysis_window(cfg);
  const Eigen::Index frames = frame_count(len, cfg);
  const Eigen::Index bins = cfg.n_bins();

  ComplexSpectrogram out;
  out.bins.resize(bins, frames);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(cfg.n_fft));
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index f = 0; f < frames; ++f) {
    const Eigen::Index start = f * cfg.hop_length;
    for (Eigen::Index n = 0; n < cfg.n_fft; ++n) {
      const Eigen::Index src = source_index(start + n, pad, len);
      frame[static_cast<std::size_t>(n)] = src < 0 ? 0.0 : samples(src) * window(n);
    }
    fft.fwd(spectrum, frame);
    for (Eigen::Index k = 0; k < bins; ++k) out.bins(k, f) = spectrum[static_cast<std::size_t>(k)];
  }
  return out;
}

Eigen::VectorXd istft(const ComplexSpectrogram& spec, const DspConfig& cfg, Eigen::Index length) {
  const Eigen::Index bins = cfg.n_bins();
  if (spec.bins.rows() != bins)
    throw DspError(fmt::format("istft: expected {} frequency bins, got {}", bins, spec.bins.rows()));
  const Eigen::Index frames = spec.bins.cols();
  const Eigen::Index pad = pad_of(cfg);
  if (length < 0) length = frames > 0 ? (frames - 1) * cfg.hop_length + cfg.n_fft - 2 * pad : 0;
  if (frames == 0 || length <= 0) return Eigen::VectorXd::Zero(std::max<Eigen::Index>(length, 0));

  const Eigen::VectorXd window = analysis_window(cfg);
  const Eigen::Index padded_len = (frames - 1) * cfg.hop_length + cfg.n_fft;
  Eigen::VectorXd num = Eigen::VectorXd::Zero(padded_len);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(padded_len);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(bins));
  std::vector<double> frame;
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (Eigen::Index k = 0; k < bins; ++k) spectrum[static_cast<std::size_t>(k)] = spec.bins(k, f);
    fft.inv(frame, spectrum, cfg.n_fft);
    const Eigen::Index start = f * cfg.hop_length;
    for (Eigen::Index n = 0; n < cfg.n_fft; ++n) {
      num(start + n) += frame[static_cast<std::size_t>(n)] * window(n);
      den(start + n) += window(n) * window(n);
    }
  }

  Eigen::VectorXd folded_num = Eigen::VectorXd::Zero(length);
  Eigen::VectorXd folded_den = Eigen::VectorXd::Zero(length);
  for (Eigen::Index i = 0; i < padded_len; ++i) {
    const Eigen::Index j = cfg.center ? source_index(i, pad, length) : (i < length ? i : -1);
    if (j < 0) continue;
    folded_num(j) += num(i);
    folded_den(j) += den(i);
  }
  Eigen::VectorXd out(length);
  for (Eigen::Index j = 0; j < length; ++j) out(j) = folded_den(j) > 1e-10 ? folded_num(j) / folded_den(j) : 0.0;
  return out;
}

Eigen::VectorXd istft(const Eigen::MatrixXd& magnitude, const Eigen::MatrixXd& phase, const DspConfig& cfg,
                      Eigen::Index length) {
  if (magnitude.rows() != phase.rows() || magnitude.cols() != phase.cols())
    throw DspError("istft: magnitude and phase shapes differ");
  ComplexSpectrogram spec;
  spec.bins = magnitude.binaryExpr(phase, [](double m, double p) { return std::polar(m, p); });
  return istft(spec, cfg, length);
}

}  // namespace laughsynth::dsp
