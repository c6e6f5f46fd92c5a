#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "laughsynth/annotation/manifest.hpp"
#include "laughsynth/dsp/config.hpp"
#include "laughsynth/dsp/waveform.hpp"

namespace laughsynth::annotation {

/// Stand-in corpus whose acoustics are a fixed function of the symbols:
/// LV is a harmonic burst at a per-context fundamental, LU a noise burst,
/// each phone a tone at its own frequency. Segments are separated by
/// short silences.
struct SyntheticCorpusOptions {
  std::filesystem::path out_dir;
  std::string corpus_name = "synthetic";
  std::vector<Style> styles{Style::speech, Style::speech, Style::laugh, Style::smiled_speech};
  std::string speech_speaker = "spkA";
  std::string amused_speaker = "spkB";
  /// Pitch multiplier of the amused speaker relative to the speech speaker.
  double amused_pitch_scale = 1.15;
  double min_seconds = 0.5;
  double max_seconds = 3.0;
  std::string id_prefix = "utt";
};

/// Renders one utterance's audio from its symbols. Deterministic in
/// (utterance, seed).
dsp::Waveform render_utterance(const Utterance& u, std::uint64_t seed, const dsp::DspConfig& cfg,
                               const SyntheticCorpusOptions& options = {});

/// Writes `n_utts` WAV files plus manifest.tsv into options.out_dir and
/// returns the manifest. A pure function of (seed, n_utts, cfg, options).
Manifest generate_synthetic_corpus(std::uint64_t seed, int n_utts, const dsp::DspConfig& cfg,
                                   const SyntheticCorpusOptions& options);

}  // namespace laughsynth::annotation
