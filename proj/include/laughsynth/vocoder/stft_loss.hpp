#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "laughsynth/nn/ops.hpp"

namespace laughsynth::vocoder {

struct StftLossConfig {
  std::vector<int> fft_sizes{256, 512, 1024};
  /// Added to |X|² before the square root; keeps log and 1/M finite.
  double floor = 1e-7;
};

namespace detail {

inline Eigen::VectorXd hann(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

// Non-centered frames at hop n/4; a signal shorter than n is one
// zero-padded frame.
inline Eigen::Index loss_frames(Eigen::Index len, int n) {
  if (len <= n) return 1;
  return 1 + (len - n) / (n / 4);
}

struct ScaleSpectrum {
  std::vector<Eigen::VectorXcd> spectra;  // per frame, bins 0..n/2
  Eigen::MatrixXd mag;                    // bins x frames
};

inline ScaleSpectrum analyze(const Eigen::VectorXd& x, int n, const Eigen::VectorXd& window, double floor,
                             Eigen::FFT<double>& fft) {
  const Eigen::Index frames = loss_frames(x.size(), n);
  const int hop = n / 4;
  const int bins = n / 2 + 1;
  ScaleSpectrum s;
  s.mag.resize(bins, frames);
  std::vector<double> buf(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> out;
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Index at = f * hop + i;
      buf[static_cast<std::size_t>(i)] = at < x.size() ? x(at) * window(i) : 0.0;
    }
    fft.fwd(out, buf);
    Eigen::VectorXcd spec(bins);
    for (int k = 0; k < bins; ++k) {
      spec(k) = out[static_cast<std::size_t>(k)];
      s.mag(k, f) = std::sqrt(std::norm(spec(k)) + floor);
    }
    s.spectra.push_back(std::move(spec));
  }
  return s;
}

}  // namespace detail

/// Per-scale terms, for reporting.
struct StftLossTerms {
  double spectral_convergence = 0.0;
  double log_magnitude = 0.0;
};

/// Sum over FFT sizes of spectral convergence ‖M̂−M‖/‖M‖ plus mean
/// |log M̂ − log M|, with M = sqrt(|STFT|² + floor) on Hann frames at
/// hop n/4. Both signals are cropped to the shorter length. `pred` and
/// `target` are 1 x L rows.
template <typename Scalar>
nn::Var multiscale_stft_loss(nn::Tape<Scalar>& t, nn::Var pred, const nn::Matrix<Scalar>& target,
                             const StftLossConfig& cfg = {}, std::vector<StftLossTerms>* terms = nullptr) {
  const auto& pv = t.value(pred);
  if (pv.rows() != 1 || target.rows() != 1) throw nn::ShapeError("multiscale_stft_loss: expected 1 x L waveforms");
  const Eigen::Index len = std::min(pv.cols(), target.cols());
  if (len == 0) throw nn::ShapeError("multiscale_stft_loss: empty waveform");
  const Eigen::VectorXd x = pv.row(0).head(len).transpose().template cast<double>();
  const Eigen::VectorXd y = target.row(0).head(len).transpose().template cast<double>();

  struct Saved {
    int n;
    Eigen::VectorXd window;
    detail::ScaleSpectrum pred;
    Eigen::MatrixXd grad_mag;  // dL/dM̂
  };
  std::vector<Saved> saved;
  Eigen::FFT<double> fft;
  double total = 0.0;
  if (terms) terms->clear();
  for (int n : cfg.fft_sizes) {
    if (n < 4 || (n & (n - 1)) != 0) throw nn::ShapeError("multiscale_stft_loss: fft sizes must be powers of two >= 4");
    Saved s{n, detail::hann(n), {}, {}};
    s.pred = detail::analyze(x, n, s.window, cfg.floor, fft);
    const detail::ScaleSpectrum ref = detail::analyze(y, n, s.window, cfg.floor, fft);
    const Eigen::MatrixXd diff = s.pred.mag - ref.mag;
    const double dn = diff.norm();
    const double rn = ref.mag.norm();
    const Eigen::MatrixXd logdiff = s.pred.mag.array().log() - ref.mag.array().log();
    const double count = static_cast<double>(diff.size());
    const double sc = dn / rn;
    const double lm = logdiff.cwiseAbs().sum() / count;
    total += sc + lm;
    if (terms) terms->push_back({sc, lm});

    s.grad_mag = logdiff.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); }).cwiseQuotient(
                     s.pred.mag) /
                 count;
    if (dn > 0) s.grad_mag += diff / (dn * rn);
    saved.push_back(std::move(s));
  }

  nn::Matrix<Scalar> value(1, 1);
  value(0, 0) = static_cast<Scalar>(total);
  return t.record(
      std::move(value), {pred},
      [pred, len, saved = std::move(saved)](nn::Tape<Scalar>& tp, const nn::Matrix<Scalar>& g) {
        auto* gx = tp.grad_target(pred);
        if (!gx) return;
        const double scale = static_cast<double>(g(0, 0));
        Eigen::FFT<double> fft;
        std::vector<std::complex<double>> z, time;
        for (const auto& s : saved) {
          const int n = s.n;
          const int hop = n / 4;
          const int bins = n / 2 + 1;
          z.assign(static_cast<std::size_t>(n), {0.0, 0.0});
          for (Eigen::Index f = 0; f < s.pred.mag.cols(); ++f) {
            // z_k = dL/dM̂_k · X_k / M̂_k; dx_n = w_n · Re Σ_k z_k e^{+2πikn/N}
            for (int k = 0; k < bins; ++k)
              z[static_cast<std::size_t>(k)] = s.grad_mag(k, f) * s.pred.spectra[static_cast<std::size_t>(f)](k) /
                                               s.pred.mag(k, f);
            fft.inv(time, z);
            for (int i = 0; i < n; ++i) {
              const Eigen::Index at = f * hop + i;
              if (at >= len) break;
              (*gx)(0, at) += static_cast<Scalar>(scale * s.window(i) * n * time[static_cast<std::size_t>(i)].real());
            }
          }
        }
      },
      "multiscale_stft_loss");
}

/// Loss value between two plain signals.
inline double multiscale_stft_distance(const Eigen::VectorXd& pred, const Eigen::VectorXd& target,
                                       const StftLossConfig& cfg = {}) {
  nn::Tape<double> t;
  const nn::Var p = t.constant(pred.transpose());
  return t.value(multiscale_stft_loss(t, p, nn::Matrix<double>(target.transpose()), cfg))(0, 0);
}

}  // namespace laughsynth::vocoder
