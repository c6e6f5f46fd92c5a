#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "laughsynth/dsp/config.hpp"
#include "laughsynth/text2mel/ssrn.hpp"
#include "laughsynth/text2mel/text2mel.hpp"
#include "laughsynth/train/trainer.hpp"
#include "laughsynth/vocoder/generator.hpp"

namespace laughsynth::cli {

/// Bad flags, config or inputs; maps to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct ModelConfig {
  int embed_dim = 64;
  int hidden_dim = 64;
  double guided_g = 0.2;
  int ssrn_channels = 64;
  int generator_channels = 64;
  std::vector<int> generator_strides{8, 8, 2, 2};
};

struct CorrectorConfig {
  int steps = 2000;
  double lr = 1e-3;
  int log_every = 100;
};

struct Paths {
  std::filesystem::path manifest;
  std::filesystem::path features;     // feature cache dir
  std::filesystem::path checkpoints;  // t2m.ckpt + ssrn.ckpt
  std::filesystem::path init;         // parent checkpoints for fine-tuning
  std::filesystem::path generator;    // generator.ckpt
};

/// Schema (every key optional, unknown keys rejected):
///   { "seed": 1,
///     "dsp":   { sample_rate, n_fft, hop_length, win_length, n_mels, fmin, fmax,
///                preemphasis, ref_db, max_db, reduction_factor, center },
///     "model": { embed_dim, hidden_dim, guided_g, ssrn_channels,
///                generator_channels, generator_strides },
///     "train": { batch_size, lr, lr_decay, decay_every, max_steps,
///                checkpoint_every, log_every, train_ssrn },
///     "corrector": { steps, lr, log_every },
///     "paths": { manifest, features, checkpoints, init, generator } }
/// Relative paths in a file resolve against the file's directory.
struct GlobalConfig {
  std::uint64_t seed = 1;
  dsp::DspConfig dsp;
  ModelConfig model;
  train::TrainConfig train;
  CorrectorConfig corrector;
  Paths paths;

  /// Throws UsageError; also runs DspConfig::validate.
  void validate() const;

  text2mel::Text2MelConfig t2m_config(std::size_t n_symbols) const;
  text2mel::SsrnConfig ssrn_config() const;
  vocoder::GeneratorConfig generator_config() const;
};

/// Parses a JSON document into a config; `base` resolves relative paths.
GlobalConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = ".");
nlohmann::json config_to_json(const GlobalConfig& c);

/// Applies "a.b=value" overrides to a JSON document. The value is parsed
/// as JSON when it can be, otherwise taken as a string.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides);

/// Defaults, then the file (if any), then `overrides`; validated.
GlobalConfig load_global_config(const std::optional<std::filesystem::path>& path,
                                const std::vector<std::string>& overrides = {});

}  // namespace laughsynth::cli
