#include "laughsynth/annotation/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "laughsynth/random.hpp"

namespace laughsynth::annotation {

namespace {

constexpr double kLead = 0.06;
constexpr double kTail = 0.06;
constexpr double kRamp = 0.01;

double context_f0(VowelContext v) {
  switch (v) {
    case VowelContext::a: return 180.0;
    case VowelContext::e: return 220.0;
    case VowelContext::i: return 260.0;
  }
  return 200.0;
}

int phone_index(const std::string& phone) {
  static const std::vector<std::string> inventory = default_phone_inventory();
  auto it = std::find(inventory.begin(), inventory.end(), phone);
  if (it != inventory.end()) return static_cast<int>(it - inventory.begin());
  return static_cast<int>(fnv1a(phone) % inventory.size());
}

double envelope(Eigen::Index n, Eigen::Index len, int sr) {
  const double ramp = kRamp * sr;
  const double t = static_cast<double>(n);
  const double rise = std::min(1.0, t / ramp);
  const double fall = std::min(1.0, static_cast<double>(len - 1 - n) / ramp);
  return std::sin(0.5 * std::numbers::pi * std::min(rise, fall));
}

void add_tone(Eigen::VectorXd& out, Eigen::Index start, Eigen::Index len, int sr, double f0,
              std::initializer_list<double> harmonics, double amplitude) {
  for (Eigen::Index n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / sr;
    double v = 0.0;
    int h = 1;
    for (double a : harmonics) {
      if (f0 * h < 0.45 * sr) v += a * std::sin(2.0 * std::numbers::pi * f0 * h * t);
      ++h;
    }
    out(start + n) += amplitude * envelope(n, len, sr) * v;
  }
}

std::vector<std::string> draw_symbols(Style style, Rng& rng) {
  const auto phones = default_phone_inventory();
  auto phone = [&] { return phones[rng.below(phones.size())]; };
  std::vector<std::string> s;
  switch (style) {
    case Style::laugh: {
      const int n = rng.range(2, 7);
      for (int i = 0; i < n; ++i) s.emplace_back(rng.uniform() < 0.6 ? kLaughVoiced : kLaughUnvoiced);
      break;
    }
    case Style::speech: {
      const int n = rng.range(3, 10);
      for (int i = 0; i < n; ++i) s.push_back(phone());
      break;
    }
    case Style::smiled_speech: {
      const int n = rng.range(3, 8);
      for (int i = 0; i < n; ++i) s.push_back(phone());
      break;
    }
    case Style::speech_laugh: {
      const int n = rng.range(2, 5);
      for (int i = 0; i < n; ++i) {
        s.push_back(phone());
        if (rng.uniform() < 0.5) s.emplace_back(kLaughVoiced);
      }
      break;
    }
  }
  return s;
}

}  // namespace

dsp::Waveform render_utterance(const Utterance& u, std::uint64_t seed, const dsp::DspConfig& cfg,
                               const SyntheticCorpusOptions& options) {
  const int sr = cfg.sample_rate;
  Rng rng(fnv1a(u.id, seed));
  const bool amused = u.style != Style::speech;
  const double pitch = amused ? options.amused_pitch_scale : 1.0;
  const double laugh_f0 = context_f0(u.vowel_context.value_or(VowelContext::a)) * pitch;

  struct Segment {
    std::string symbol;
    Eigen::Index length;
    Eigen::Index gap;
  };
  std::vector<Segment> segments;
  double total = kLead + kTail;
  for (const auto& sym : u.symbols) {
    double d;
    if (sym == kLaughVoiced) d = rng.uniform(0.10, 0.16);
    else if (sym == kLaughUnvoiced) d = rng.uniform(0.08, 0.12);
    else d = rng.uniform(0.07, 0.11);
    const double gap = rng.uniform(0.04, 0.06);
    if (total + d + gap > options.max_seconds)
      throw std::invalid_argument(fmt::format("utterance '{}' does not fit in {} s", u.id, options.max_seconds));
    total += d + gap;
    segments.push_back({sym, static_cast<Eigen::Index>(d * sr), static_cast<Eigen::Index>(gap * sr)});
  }
  total = std::max(total, options.min_seconds);

  dsp::Waveform w;
  w.sample_rate = sr;
  w.samples = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total * sr));
  Eigen::Index pos = static_cast<Eigen::Index>(kLead * sr);
  for (const auto& seg : segments) {
    if (seg.symbol == kLaughVoiced) {
      const double f0 = laugh_f0 * rng.uniform(0.98, 1.02);
      add_tone(w.samples, pos, seg.length, sr, f0, {1.0, 0.5, 0.33, 0.25, 0.2, 0.16}, 0.35);
    } else if (seg.symbol == kLaughUnvoiced) {
      double prev = 0.0;
      for (Eigen::Index n = 0; n < seg.length; ++n) {
        const double white = rng.normal();
        w.samples(pos + n) += 0.12 * envelope(n, seg.length, sr) * (white - 0.9 * prev);
        prev = white;
      }
    } else {
      const double f = (250.0 + 60.0 * phone_index(seg.symbol)) * pitch;
      if (u.style == Style::smiled_speech)
        add_tone(w.samples, pos, seg.length, sr, f, {1.0, 0.3, 0.3}, 0.4);
      else
        add_tone(w.samples, pos, seg.length, sr, f, {1.0, 0.3}, 0.4);
    }
    pos += seg.length + seg.gap;
  }
  w.samples = w.samples.cwiseMax(-1.0).cwiseMin(1.0);
  return w;
}

Manifest generate_synthetic_corpus(std::uint64_t seed, int n_utts, const dsp::DspConfig& cfg,
                                   const SyntheticCorpusOptions& options) {
  if (n_utts < 1) throw std::invalid_argument("generate_synthetic_corpus: n_utts must be >= 1");
  if (options.styles.empty()) throw std::invalid_argument("generate_synthetic_corpus: no styles to draw from");
  cfg.validate();
  std::filesystem::create_directories(options.out_dir);

  Manifest m;
  m.corpus = options.corpus_name;
  m.sample_rate = cfg.sample_rate;
  m.base_dir = options.out_dir;
  Rng rng(seed);
  for (int k = 0; k < n_utts; ++k) {
    Utterance u;
    u.id = fmt::format("{}{:04d}", options.id_prefix, k);
    u.style = options.styles[rng.below(options.styles.size())];
    if (u.style == Style::laugh) u.vowel_context = static_cast<VowelContext>(rng.below(3));
    u.speaker = u.style == Style::speech ? options.speech_speaker : options.amused_speaker;
    u.symbols = draw_symbols(u.style, rng);
    u.audio_path = u.id + ".wav";
    dsp::write_wav(options.out_dir / u.audio_path, render_utterance(u, seed, cfg, options));
    m.utterances.push_back(std::move(u));
  }

  std::ofstream out(options.out_dir / "manifest.tsv", std::ios::binary | std::ios::trunc);
  out << format_manifest(m);
  if (!out) throw std::runtime_error("failed to write synthetic manifest");
  return m;
}

}  // namespace laughsynth::annotation
