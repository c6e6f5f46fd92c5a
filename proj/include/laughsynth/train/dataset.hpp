#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "laughsynth/annotation/manifest.hpp"
#include "laughsynth/dsp/config.hpp"
#include "laughsynth/dsp/waveform.hpp"

namespace laughsynth::train {

/// One training pair: encoded symbols plus normalized features.
struct Example {
  std::string id;
  annotation::Style style = annotation::Style::speech;
  std::vector<int> ids;
  Eigen::MatrixXf mel;  // n_mels x T_mel (decimated)
  Eigen::MatrixXf mag;  // n_bins x T_mel·reduction (zero-padded full rate)
};

Example make_example(const annotation::Utterance& u, const dsp::Waveform& audio, const annotation::SymbolTable& table,
                     const dsp::DspConfig& cfg);

/// Loads every utterance's audio (resampled to cfg.sample_rate) and
/// computes its features.
std::vector<Example> build_dataset(const annotation::Manifest& m, const annotation::SymbolTable& table,
                                   const dsp::DspConfig& cfg);

}  // namespace laughsynth::train
