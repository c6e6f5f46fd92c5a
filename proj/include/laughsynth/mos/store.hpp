#pragma once

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "laughsynth/eval/ratings.hpp"

namespace laughsynth::mos {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Append-only line log. Each append is one write of one line, flushed and
/// (optionally) fsynced before returning. Opening replays existing lines;
/// an unterminated last line (torn write) is dropped and truncated away.
class LineLog {
 public:
  LineLog(std::filesystem::path path, bool fsync);
  ~LineLog();
  LineLog(const LineLog&) = delete;
  LineLog& operator=(const LineLog&) = delete;

  /// Lines present when the log was opened.
  const std::vector<std::string>& replayed() const { return replayed_; }
  void append(const std::string& line);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  bool fsync_;
  int fd_ = -1;
  std::vector<std::string> replayed_;
};

/// Rating log with (participant, sample) uniqueness. Thread-safe; appends
/// are serialized.
class RatingStore {
 public:
  RatingStore(const std::filesystem::path& path, bool fsync);

  /// false (and nothing written) when the participant already rated the sample.
  bool append(const eval::RatingRecord& r);
  bool contains(const std::string& participant, const std::string& sample) const;
  std::vector<eval::RatingRecord> records() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  LineLog log_;
  std::vector<eval::RatingRecord> records_;
  std::set<std::pair<std::string, std::string>> keys_;
};

}  // namespace laughsynth::mos
