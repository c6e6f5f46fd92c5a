#pragma once

#include <complex>
#include <stdexcept>

#include <Eigen/Core>

#include "laughsynth/dsp/config.hpp"
#include "laughsynth/dsp/waveform.hpp"

namespace laughsynth::dsp {

class DspError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Complex short-time spectrum, one column per frame, n_fft/2+1 rows.
struct ComplexSpectrogram {
  Eigen::MatrixXcd bins;

  Eigen::Index n_frames() const { return bins.cols(); }
  Eigen::MatrixXd magnitude() const { return bins.cwiseAbs(); }
  Eigen::MatrixXd phase() const { return bins.unaryExpr([](std::complex<double> z) { return std::arg(z); }); }
};

/// Periodic Hann of win_length, zero-padded (centered) to n_fft.
Eigen::VectorXd analysis_window(const DspConfig& cfg);

/// Number of frames stft() produces for `length` samples.
Eigen::Index frame_count(Eigen::Index length, const DspConfig& cfg);

ComplexSpectrogram stft(const Eigen::VectorXd& samples, const DspConfig& cfg);
inline ComplexSpectrogram stft(const Waveform& w, const DspConfig& cfg) { return stft(w.samples, cfg); }

/// Least-squares inverse of stft(): windowed overlap-add divided by the
/// summed squared window. With centered framing the reflected padding is
/// folded back onto the samples it was copied from, which keeps this the
/// exact least-squares solution. `length` defaults to (frames-1)*hop.
Eigen::VectorXd istft(const ComplexSpectrogram& spec, const DspConfig& cfg, Eigen::Index length = -1);
Eigen::VectorXd istft(const Eigen::MatrixXd& magnitude, const Eigen::MatrixXd& phase, const DspConfig& cfg,
                      Eigen::Index length = -1);

}  // namespace laughsynth::dsp
