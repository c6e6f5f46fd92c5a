#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "laughsynth/train/dataset.hpp"

namespace laughsynth::train {

/// On-disk features of one utterance:
///   "LSFEAT\0\0" | u64 dsp_fp | u64 audio_hash | u64 rows, cols, f32 mel
///   | u64 rows, cols, f32 mag   (little-endian, column-major)
struct CachedFeatures {
  std::uint64_t dsp_fingerprint = 0;
  std::uint64_t audio_hash = 0;
  Eigen::MatrixXf mel;
  Eigen::MatrixXf mag;
};

void save_features(const std::filesystem::path& path, const CachedFeatures& f);
/// nullopt for a missing, unreadable or truncated file.
std::optional<CachedFeatures> load_features(const std::filesystem::path& path);

struct CacheReport {
  std::size_t computed = 0;
  std::size_t cached = 0;
  /// Entries recomputed because the DSP fingerprint or audio changed.
  std::size_t stale = 0;
};

/// build_dataset through a per-utterance cache in `cache_dir`
/// (<id>.feat). Entries are reused only when both the DSP fingerprint and
/// the audio file hash match.
std::vector<Example> build_dataset_cached(const annotation::Manifest& m, const annotation::SymbolTable& table,
                                          const dsp::DspConfig& cfg, const std::filesystem::path& cache_dir,
                                          CacheReport* report = nullptr);

}  // namespace laughsynth::train
