#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "laughsynth/nn/attention.hpp"
#include "laughsynth/nn/layers.hpp"

namespace laughsynth::text2mel {

using nn::Var;
using Tape = nn::Tape<float>;
using Params = nn::ParameterStore<float>;
using Hyper = std::map<std::string, std::string>;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LossWeights {
  float l1 = 1.0f;
  float divergence = 1.0f;
  float attention = 1.0f;
};

struct Text2MelConfig {
  int n_symbols = 0;
  int n_mels = 80;
  int embed_dim = 64;
  int hidden_dim = 64;
  int reduction_factor = 4;
  float guided_g = 0.2f;
  LossWeights weights;

  Hyper to_hyper() const;
  static Text2MelConfig from_hyper(const Hyper& h);
};

/// Loss values of one forward pass; `total` is the differentiable sum.
struct T2MLoss {
  Var total;
  float l1 = 0;
  float divergence = 0;
  float attention = 0;
  float value = 0;
};

struct SynthesisOptions {
  int max_frames = 200;
  /// Clamp each frame's attention argmax to [prev − 1, prev + 3].
  bool monotonic = true;
  float eos_threshold = 0.5f;
  int eos_patience = 3;
};

struct SynthesisResult {
  Eigen::MatrixXf mel;        // n_mels x T (normalized, decimated frame rate)
  Eigen::MatrixXf alignment;  // N x T
  bool truncated = false;
  /// Human-readable stop rule, recorded in synthesis metadata.
  std::string stop_rule;
};

/// Text encoder + causal audio encoder/decoder with dot-product attention.
/// All sequences are channels x time.
class Text2Mel {
 public:
  Text2Mel(const Text2MelConfig& cfg, std::uint64_t seed);
  /// Wraps already-populated parameters (e.g. from a checkpoint); throws
  /// ModelError when a required tensor is missing or misshapen.
  Text2Mel(const Text2MelConfig& cfg, Params params);

  const Text2MelConfig& config() const { return cfg_; }
  Params& params() { return params_; }
  const Params& params() const { return params_; }

  struct Encoding {
    Var keys;
    Var values;
  };
  struct Output {
    Var logits;
    Var mel;
    nn::AttentionResult attention;
  };

  Encoding encode_text(nn::Binder<float>& b, std::span<const int> ids) const;
  Output decode(nn::Binder<float>& b, const Encoding& enc, Var prefix, const Eigen::MatrixXf* forced = nullptr,
                const Eigen::Array<bool, Eigen::Dynamic, 1>* mask = nullptr) const;

  /// Teacher-forced pass. `prefix` is the target shifted right by one
  /// frame (see shift_right).
  Output forward(nn::Binder<float>& b, std::span<const int> ids, const Eigen::MatrixXf& prefix) const;

  T2MLoss loss(Tape& t, const Output& out, const Eigen::MatrixXf& target) const;

  /// Greedy autoregressive decoding fed by its own predictions.
  SynthesisResult synthesize(std::span<const int> ids, const SynthesisOptions& options = {}) const;

 private:
  void check_ids(std::span<const int> ids) const;

  Text2MelConfig cfg_;
  Params params_;
};

/// [0, m_0, ..., m_{T-2}]: the teacher-forcing input for target m.
Eigen::MatrixXf shift_right(const Eigen::MatrixXf& mel);

/// 1 − 2·mean_t |argmax_n A[n,t]/N − t/T|, clipped to [0, 1].
double attention_diagonality(const Eigen::MatrixXf& alignment);

/// Checks that `params` holds a tensor of the given shape.
void require_tensor(const Params& params, const std::string& name, Eigen::Index rows, Eigen::Index cols);

int hyper_int(const Hyper& h, const std::string& key);
float hyper_float(const Hyper& h, const std::string& key);

}  // namespace laughsynth::text2mel
