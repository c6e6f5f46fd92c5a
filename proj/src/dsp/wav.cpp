#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "laughsynth/dsp/waveform.hpp"

namespace laughsynth::dsp {

double Waveform::rms() const {
  if (samples.size() == 0) return 0.0;
  return std::sqrt(samples.squaredNorm() / static_cast<double>(samples.size()));
}

double Waveform::peak() const { return samples.size() == 0 ? 0.0 : samples.cwiseAbs().maxCoeff(); }

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

struct ParsedWav {
  WavInfo info;
  std::vector<unsigned char> data;  // empty when only the header was requested
};

ParsedWav parse(const std::filesystem::path& path, bool read_data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(fmt::format("cannot open WAV file '{}'", path.string()));

  std::array<unsigned char, 12> riff{};
  if (!in.read(reinterpret_cast<char*>(riff.data()), riff.size()) || std::memcmp(riff.data(), "RIFF", 4) != 0 ||
      std::memcmp(riff.data() + 8, "WAVE", 4) != 0)
    throw WavError(fmt::format("'{}' is not a RIFF/WAVE file", path.string()));

  ParsedWav out;
  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t block_align = 0;
  for (;;) {
    std::array<unsigned char, 8> hdr{};
    if (!in.read(reinterpret_cast<char*>(hdr.data()), hdr.size())) break;
    const std::uint32_t size = le32(hdr.data() + 4);
    if (std::memcmp(hdr.data(), "fmt ", 4) == 0) {
      if (size < 16) throw WavError("fmt chunk too short");
      std::vector<unsigned char> body(size);
      if (!in.read(reinterpret_cast<char*>(body.data()), size)) throw WavError("truncated fmt chunk");
      format = le16(body.data());
      out.info.channels = le16(body.data() + 2);
      out.info.sample_rate = static_cast<int>(le32(body.data() + 4));
      block_align = le16(body.data() + 12);
      out.info.bits_per_sample = le16(body.data() + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw WavError("extensible fmt chunk too short");
        format = le16(body.data() + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(hdr.data(), "data", 4) == 0) {
      if (!have_fmt) throw WavError("data chunk precedes fmt chunk");
      if (block_align == 0) throw WavError("invalid block alignment");
      std::uint32_t usable = size;
      if (read_data) {
        out.data.resize(size);
        in.read(reinterpret_cast<char*>(out.data.data()), size);
        usable = static_cast<std::uint32_t>(in.gcount());
        out.data.resize(usable - usable % block_align);
      } else {
        // Streaming writers sometimes leave 0 or 0xFFFFFFFF here; trust the file size.
        const auto here = in.tellg();
        in.seekg(0, std::ios::end);
        const auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
        usable = static_cast<std::uint32_t>(std::min<std::uint64_t>(size, remaining));
      }
      out.info.frames = usable / block_align;
      break;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
  }
  if (!have_fmt) throw WavError(fmt::format("'{}' has no fmt chunk", path.string()));

  const int bits = out.info.bits_per_sample;
  if (format == kFormatPcm) {
    if (bits != 8 && bits != 16 && bits != 24 && bits != 32)
      throw WavError(fmt::format("unsupported PCM bit depth {}", bits));
  } else if (format == kFormatFloat) {
    if (bits != 32 && bits != 64) throw WavError(fmt::format("unsupported float bit depth {}", bits));
    out.info.is_float = true;
  } else {
    throw WavError(fmt::format("unsupported WAV codec 0x{:04x}", format));
  }
  if (out.info.channels < 1) throw WavError("WAV declares zero channels");
  if (out.info.sample_rate <= 0) throw WavError("WAV declares a non-positive sample rate");
  return out;
}

double decode_sample(const unsigned char* p, int bits, bool is_float) {
  if (is_float) {
    if (bits == 32) {
      float f;
      std::uint32_t u = le32(p);
      std::memcpy(&f, &u, sizeof f);
      return f;
    }
    std::uint64_t u = static_cast<std::uint64_t>(le32(p)) | (static_cast<std::uint64_t>(le32(p + 4)) << 32);
    double d;
    std::memcpy(&d, &u, sizeof d);
    return d;
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16:
      return static_cast<std::int16_t>(le16(p)) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    default:
      return static_cast<std::int32_t>(le32(p)) / 2147483648.0;
  }
}

}  // namespace

WavInfo read_wav_info(const std::filesystem::path& path) { return parse(path, false).info; }

Waveform load_wav(const std::filesystem::path& path, int target_rate) {
  ParsedWav wav = parse(path, true);
  const WavInfo& info = wav.info;
  if (info.frames == 0) throw WavError(fmt::format("'{}' contains no audio", path.string()));

  const int bytes = info.bits_per_sample / 8;
  Waveform w;
  w.sample_rate = info.sample_rate;
  w.samples.setZero(static_cast<Eigen::Index>(info.frames));
  const unsigned char* p = wav.data.data();
  for (std::size_t f = 0; f < info.frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < info.channels; ++c, p += bytes) acc += decode_sample(p, info.bits_per_sample, info.is_float);
    w.samples(static_cast<Eigen::Index>(f)) = acc / info.channels;
  }
  if (!w.samples.allFinite()) throw WavError(fmt::format("'{}' contains non-finite samples", path.string()));
  if (target_rate > 0 && target_rate != w.sample_rate) return resample(w, target_rate);
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  if (w.sample_rate <= 0) throw WavError("cannot write a WAV with non-positive sample rate");
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<unsigned char> buf;
  buf.reserve(44 + data_bytes);
  auto put = [&](const char* tag) { buf.insert(buf.end(), tag, tag + 4); };
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  };
  auto put16 = [&](std::uint16_t v) {
    buf.push_back(static_cast<unsigned char>(v));
    buf.push_back(static_cast<unsigned char>(v >> 8));
  };
  put("RIFF");
  put32(36 + data_bytes);
  put("WAVE");
  put("fmt ");
  put32(16);
  put16(kFormatPcm);
  put16(1);
  put32(static_cast<std::uint32_t>(w.sample_rate));
  put32(static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(2);
  put16(16);
  put("data");
  put32(data_bytes);
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
    const double s = std::clamp(w.samples(i), -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(std::clamp(s * 32768.0, -32768.0, 32767.0)));
    put16(static_cast<std::uint16_t>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WavError(fmt::format("cannot write WAV file '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw WavError(fmt::format("write failed for '{}'", path.string()));
}

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw WavError("resample: target rate must be positive");
  if (target_rate == w.sample_rate) return w;
  const long g = std::gcd(w.sample_rate, target_rate);
  const long up = target_rate / g;      // L
  const long down = w.sample_rate / g;  // M

  // Low-pass at the narrower of the two Nyquist bands, in input-sample units.
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  constexpr int kZeroCrossings = 24;
  constexpr double kBeta = 8.6;
  const int half = static_cast<int>(std::ceil(kZeroCrossings / cutoff));
  const int taps = 2 * half;
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);

  // Phase φ places the output at input position base + φ/L; tap k reads
  // input sample base - half + 1 + k.
  Eigen::MatrixXd bank(taps, up);
  for (long phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    for (int k = 0; k < taps; ++k) {
      const double tau = static_cast<double>(k - half + 1) - frac;
      const double x = cutoff * tau;
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
      const double r = tau / static_cast<double>(half);
      const double win = std::abs(r) >= 1.0 ? 0.0 : std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      bank(k, phase) = cutoff * sinc * win;
    }
  }

  const Eigen::Index n_in = w.samples.size();
  const auto n_out = static_cast<Eigen::Index>((n_in * up + down - 1) / down);
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.setZero(n_out);
  for (Eigen::Index n = 0; n < n_out; ++n) {
    const long long pos = static_cast<long long>(n) * down;
    const long long base = pos / up;
    const long phase = static_cast<long>(pos % up);
    double acc = 0.0;
    for (int k = 0; k < taps; ++k) {
      const long long idx = base - half + 1 + k;
      if (idx >= 0 && idx < n_in) acc += bank(k, phase) * w.samples(static_cast<Eigen::Index>(idx));
    }
    out.samples(n) = acc;
  }
  return out;
}

}  // namespace laughsynth::dsp
