#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "laughsynth/nn/adam.hpp"
#include "laughsynth/nn/parameters.hpp"

namespace laughsynth::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelKind : std::uint32_t { t2m = 1, ssrn = 2, generator = 3 };
std::string_view to_string(ModelKind k);

class CheckpointError : public std::runtime_error {
 public:
  enum class Code { io, magic, version, corrupt, kind, fingerprint };
  CheckpointError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct NamedTensor {
  std::string name;
  Eigen::MatrixXf value;
  bool trainable = true;
};

/// Versioned snapshot of one model's parameters and optimizer state.
///
/// File layout (all integers little-endian):
///   "LSCKPT\0\0" | u32 version | u32 kind | u64 symbol_fp | u64 dsp_fp
///   | u64 step | u64 adam_step | u32 n_hyper {str key, str value}
///   | u32 n_provenance {u64} | u32 n_tensors {str name, u8 group,
///   u8 trainable, u64 rows, u64 cols, u64 offset} | u64 n_values
///   | f32 payload (column-major) | u64 FNV-1a of everything before.
/// group 0 = parameter, 1 = Adam first moment, 2 = Adam second moment.
struct Checkpoint {
  ModelKind kind = ModelKind::t2m;
  std::uint64_t symbol_fingerprint = 0;
  std::uint64_t dsp_fingerprint = 0;
  std::uint64_t step = 0;
  std::map<std::string, std::string> hyper;
  /// Hash of the initial weights, then one parent-checkpoint hash per
  /// fine-tuning stage.
  std::vector<std::uint64_t> provenance;
  std::vector<NamedTensor> parameters;
  std::vector<NamedTensor> adam_first;
  std::vector<NamedTensor> adam_second;
  std::uint64_t adam_step = 0;

  const NamedTensor* find(std::string_view name) const;
};

std::vector<unsigned char> serialize(const Checkpoint& c);
Checkpoint deserialize(const std::vector<unsigned char>& bytes);

/// Writes to a temporary sibling and renames, so an existing file is
/// never left half-written.
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, ModelKind expected);

/// FNV-1a of the serialized form; equals the hash of the file on disk.
std::uint64_t checkpoint_hash(const Checkpoint& c);
std::uint64_t file_hash(const std::filesystem::path& path);
/// Hash of the parameter values alone, used as the root of a chain.
std::uint64_t weights_hash(const nn::ParameterStore<float>& params);

/// Throws CheckpointError::fingerprint on mismatch. With `allow_override`
/// a warning is logged instead and the optimizer state is cleared.
void check_fingerprints(Checkpoint& c, std::uint64_t symbol_fp, std::uint64_t dsp_fp, bool allow_override);

/// True when `child` extends `parent` by exactly the parent's hash.
bool extends(const Checkpoint& child, const Checkpoint& parent);

Checkpoint capture(ModelKind kind, const nn::ParameterStore<float>& params, const nn::AdamState<float>& adam,
                   std::map<std::string, std::string> hyper, std::uint64_t symbol_fp, std::uint64_t dsp_fp,
                   std::uint64_t step, std::vector<std::uint64_t> provenance);

nn::ParameterStore<float> restore_parameters(const Checkpoint& c);
nn::AdamState<float> restore_adam(const Checkpoint& c);

}  // namespace laughsynth::train
