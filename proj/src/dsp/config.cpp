#include "laughsynth/dsp/config.hpp"

#include <fmt/format.h>

#include "laughsynth/random.hpp"

namespace laughsynth::dsp {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void DspConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid dsp config: " + what); };
  if (sample_rate <= 0) fail("sample_rate must be positive");
  if (!is_power_of_two(n_fft)) fail("n_fft must be a power of two");
  if (hop_length <= 0) fail("hop_length must be positive");
  if (!(hop_length <= win_length && win_length <= n_fft)) fail("need hop_length <= win_length <= n_fft");
  if (n_mels < 1) fail("n_mels must be >= 1");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) fail("need 0 <= fmin < fmax <= sample_rate/2");
  if (!(preemphasis >= 0.0 && preemphasis < 1.0)) fail("preemphasis must be in [0, 1)");
  if (!(max_db > 0.0)) fail("max_db must be positive");
  if (reduction_factor < 1) fail("reduction_factor must be >= 1");
}

std::string DspConfig::canonical() const {
  return fmt::format(
      "sr={};n_fft={};hop={};win={};n_mels={};fmin={:.17g};fmax={:.17g};pre={:.17g};ref_db={:.17g};max_db={:.17g};r={};"
      "center={}",
      sample_rate, n_fft, hop_length, win_length, n_mels, fmin, fmax, preemphasis, ref_db, max_db, reduction_factor,
      center ? 1 : 0);
}

std::uint64_t DspConfig::fingerprint() const { return fnv1a(canonical()); }

}  // namespace laughsynth::dsp
