#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "laughsynth/text2mel/ssrn.hpp"
#include "laughsynth/text2mel/text2mel.hpp"
#include "laughsynth/train/checkpoint.hpp"
#include "laughsynth/train/dataset.hpp"

namespace laughsynth::train {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a loss or gradient goes non-finite. The last checkpoint
/// written (if any) is left untouched.
class DivergenceError : public TrainingError {
 public:
  DivergenceError(std::uint64_t step, const std::string& what)
      : TrainingError(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

enum class Stage { pretrain, finetune };
std::string_view to_string(Stage s);

struct TrainConfig {
  Stage stage = Stage::pretrain;
  int batch_size = 8;
  /// Unset: 2e-4 for pretraining, kFinetuneLrScale of that for fine-tuning.
  std::optional<double> lr;
  /// Multiply lr by `lr_decay` every `decay_every` steps (0 = constant).
  double lr_decay = 1.0;
  int decay_every = 0;
  int max_steps = 3000;
  std::uint64_t seed = 1;
  /// Write checkpoints every this many steps (0 = only at the end).
  int checkpoint_every = 0;
  int log_every = 10;
  bool train_ssrn = true;
  nn::AdamConfig adam;  // lr field ignored; `lr` above wins
  /// Directory for t2m.ckpt, ssrn.ckpt and runlog.jsonl; empty = in memory only.
  std::filesystem::path out_dir;
  /// Proceed past fingerprint mismatches (warns, drops optimizer state).
  bool override_fingerprints = false;

  double base_lr() const;
  /// Learning rate in effect at 1-based `step`.
  double lr_at(std::uint64_t step) const;
};

inline constexpr double kPretrainLr = 2e-4;
inline constexpr double kFinetuneLrScale = 0.2;

/// Append-only training record.
struct RunLogRecord {
  std::uint64_t step = 0;
  std::map<std::string, double> values;
  double wall_seconds = 0.0;
};

class RunLog {
 public:
  RunLog() = default;
  using Header = std::map<std::string, std::string>;
  explicit RunLog(Header header) : header_(std::move(header)) {}

  /// Throws TrainingError if `r.step` does not exceed the last step.
  void append(RunLogRecord r);
  const std::vector<RunLogRecord>& records() const { return records_; }
  const std::map<std::string, std::string>& header() const { return header_; }

  /// Steps and values equal; wall-clock times ignored.
  bool same_trajectory(const RunLog& other) const;

  /// One JSON object per line, header first.
  std::string to_jsonl() const;
  /// Streams records as they arrive to `path` (appending).
  void attach_file(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> header_;
  std::vector<RunLogRecord> records_;
  std::filesystem::path file_;
};

struct Fingerprints {
  std::uint64_t symbols = 0;
  std::uint64_t dsp = 0;
};

/// Both acoustic models with their optimizers and lineage.
struct TrainState {
  text2mel::Text2Mel t2m;
  text2mel::Ssrn ssrn;
  nn::AdamState<float> t2m_adam;
  nn::AdamState<float> ssrn_adam;
  std::uint64_t step = 0;
  std::vector<std::uint64_t> t2m_provenance;
  std::vector<std::uint64_t> ssrn_provenance;
  Fingerprints fingerprints;

  Checkpoint t2m_checkpoint() const;
  Checkpoint ssrn_checkpoint() const;
};

/// Fresh models; provenance rooted at the hash of the initial weights.
TrainState init_state(const text2mel::Text2MelConfig& t2m, const text2mel::SsrnConfig& ssrn, std::uint64_t seed,
                      Fingerprints fp);

/// Restores from t2m/ssrn checkpoint files, checking fingerprints.
TrainState load_state(const std::filesystem::path& t2m_path, const std::filesystem::path& ssrn_path, Fingerprints fp,
                      bool allow_override);
void save_state(const TrainState& s, const std::filesystem::path& dir);

/// Mean losses over a dataset, teacher-forced, no parameter updates.
struct EvalLoss {
  double t2m = 0.0;
  double t2m_l1 = 0.0;
  double ssrn = 0.0;
};
EvalLoss evaluate(const TrainState& s, const std::vector<Example>& data, bool include_ssrn = true);

using StepCallback = std::function<void(const TrainState&, const RunLogRecord&)>;

/// Trains `state` in place for cfg.max_steps steps on `data`. Examples
/// are visited in a seeded per-epoch shuffle; each step averages the
/// per-example losses of one batch.
RunLog train(TrainState& state, const std::vector<Example>& data, const TrainConfig& cfg,
             const StepCallback& on_step = {});

/// Fresh models trained on a corpus that may mix every style.
TrainState pretrain(const std::vector<Example>& data, const text2mel::Text2MelConfig& t2m,
                    const text2mel::SsrnConfig& ssrn, Fingerprints fp, const TrainConfig& cfg, RunLog* log = nullptr);

/// Continues from `init` on target-speaker amused material. Examples
/// must all be laugh, smiled_speech or speech_laugh; the chain of each
/// model grows by the hash of its parent checkpoint.
TrainState finetune(const TrainState& init, const std::vector<Example>& data, const TrainConfig& cfg,
                    RunLog* log = nullptr);

/// Throws TrainingError naming the first example outside the fine-tuning styles.
void require_finetune_styles(const std::vector<Example>& data);

/// Both models see the example every step; they share no parameters, so
/// this is the same as training one after the other.
struct OverfitOptions {
  int steps = 1500;
  double lr = 2e-4;
  std::uint64_t seed = 1;
  int log_every = 50;
};

struct OverfitReport {
  RunLog log;
  double t2m_l1 = 0.0;
  double diagonality = 0.0;
  double synthesized_diagonality = 0.0;
  double ssrn_l1 = 0.0;
};

/// Trains a fresh t2m then ssrn on a single example.
OverfitReport overfit_single(const Example& ex, const text2mel::Text2MelConfig& t2m, const text2mel::SsrnConfig& ssrn,
                             const OverfitOptions& options);

}  // namespace laughsynth::train
