#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace laughsynth::dsp {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Feature-extraction hyperparameters shared by every stage that touches
/// spectrograms.
struct DspConfig {
  int sample_rate = 22050;
  int n_fft = 1024;
  int hop_length = 256;
  int win_length = 1024;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 11025.0;
  double preemphasis = 0.97;
  double ref_db = 20.0;
  double max_db = 100.0;
  int reduction_factor = 4;
  /// Frames are centered: the signal is reflect-padded by n_fft/2 on both
  /// sides, giving 1 + floor(len / hop) frames.
  bool center = true;

  int n_bins() const { return n_fft / 2 + 1; }

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Canonical text form; the fingerprint hashes exactly this string.
  std::string canonical() const;
  std::uint64_t fingerprint() const;
};

}  // namespace laughsynth::dsp
