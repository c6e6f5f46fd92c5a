#pragma once

#include <filesystem>
#include <stdexcept>

#include <Eigen/Core>

namespace laughsynth::dsp {

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mono audio with amplitudes nominally in [-1, 1].
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = 22050;

  Eigen::Index size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  double rms() const;
  double peak() const;
};

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  bool is_float = false;
  std::size_t frames = 0;

  double duration() const { return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0; }
};

/// Header-only read, used for corpus statistics.
WavInfo read_wav_info(const std::filesystem::path& path);

/// Reads 8/16/24/32-bit PCM or 32/64-bit float WAV, averaging channels to
/// mono. When `target_rate` > 0 and differs from the file's rate, the
/// result is resampled to it.
Waveform load_wav(const std::filesystem::path& path, int target_rate = 0);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& w);

/// Linear-phase polyphase (Kaiser-windowed sinc) rational resampler.
Waveform resample(const Waveform& w, int target_rate);

}  // namespace laughsynth::dsp
