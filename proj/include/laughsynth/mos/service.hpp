#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "laughsynth/eval/stats.hpp"
#include "laughsynth/mos/store.hpp"

namespace laughsynth::mos {

/// Bad client input (maps to 400).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownSession : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Gender { female, male, other };
enum class AgeRange { from20to40, from50to65, other };

inline constexpr std::array<Gender, 3> kGenders{Gender::female, Gender::male, Gender::other};
inline constexpr std::array<AgeRange, 3> kAgeRanges{AgeRange::from20to40, AgeRange::from50to65, AgeRange::other};

std::string_view to_string(Gender g);
/// "[20,40)", "[50,65)", "other".
std::string_view to_string(AgeRange a);
Gender parse_gender(std::string_view s);
AgeRange parse_age_range(std::string_view s);

struct Sample {
  std::string id;
  eval::Method method = eval::Method::original;
  std::filesystem::path audio;  // absolute after loading
};

/// JSON: {"samples": [{"id": "...", "method": "...", "audio": "rel/or/abs.wav"}]}.
/// Audio paths resolve against the manifest directory. Ids must be unique,
/// URL-safe, and must not spell out a method name.
std::vector<Sample> load_sample_manifest(const std::filesystem::path& path);
void validate_samples(const std::vector<Sample>& samples);

inline constexpr const char* kDefaultExplanation =
    "Rate how natural each sound is. Natural here means human-like: does it sound like a real person "
    "produced it? Please do not judge how convincing or sincere the laugh is.";

struct ServiceConfig {
  std::vector<Sample> samples;
  std::filesystem::path store_dir;
  std::uint64_t server_seed = 1;
  /// 0 = every sample in each session.
  std::size_t max_per_session = 0;
  bool fsync = true;
  std::string explanation = kDefaultExplanation;
};

struct Assignment {
  std::string sample_id;
  std::string audio_url;
  std::size_t position = 0;  // 0-based
  std::size_t total = 0;
};

/// Thrown when the client rates something other than its current sample.
class SampleMismatch : public std::runtime_error {
 public:
  SampleMismatch(const std::string& what, std::optional<Assignment> current)
      : std::runtime_error(what), current_(std::move(current)) {}
  const std::optional<Assignment>& current() const { return current_; }

 private:
  std::optional<Assignment> current_;
};

struct SubmitResult {
  bool duplicate = false;
  /// Next assignment after this rating, nullopt when the session is done.
  std::optional<Assignment> next;
};

/// Participants by age range (rows) and gender (columns).
struct ParticipantTable {
  std::array<std::array<std::size_t, 3>, 3> counts{};  // [age][gender]
  std::size_t row_sum(std::size_t age) const;
  std::size_t col_sum(std::size_t gender) const;
  std::size_t total() const;
};

struct Results {
  std::vector<eval::MethodStats> stats;
  ParticipantTable participants;
  std::size_t n_ratings = 0;
};

/// seed of a session's presentation order.
std::uint64_t session_seed(const std::string& token, std::uint64_t server_seed);
/// Fisher-Yates over sample ids (manifest order), then capped.
std::vector<std::string> session_order(const std::vector<Sample>& samples, const std::string& token,
                                       std::uint64_t server_seed, std::size_t cap);

/// Listening-test protocol over a sessions log and a rating store in
/// `store_dir`. Restarting on the same directory resumes every session.
class MosService {
 public:
  using TokenSource = std::function<std::string()>;
  using Clock = std::function<std::int64_t()>;  // ms since epoch

  explicit MosService(ServiceConfig cfg, TokenSource tokens = {}, Clock clock = {});

  struct Created {
    std::string token;
    std::size_t n_samples = 0;
  };
  Created create_session(Gender g, AgeRange a);
  std::optional<Assignment> next_sample(const std::string& token) const;
  SubmitResult submit_rating(const std::string& token, const std::string& sample_id, int score);
  Results results() const;

  const Sample* find_sample(const std::string& id) const;
  const ServiceConfig& config() const { return cfg_; }
  const RatingStore& store() const { return ratings_; }
  std::size_t session_count() const;

 private:
  struct Session {
    std::string token;
    Gender gender = Gender::other;
    AgeRange age = AgeRange::other;
    std::vector<std::string> order;
    std::size_t cursor = 0;
    std::int64_t created_ms = 0;
    mutable std::mutex mu;
  };

  std::shared_ptr<Session> session(const std::string& token) const;
  std::optional<Assignment> assignment(const Session& s) const;
  void advance(Session& s) const;

  ServiceConfig cfg_;
  TokenSource tokens_;
  Clock clock_;
  std::map<std::string, std::size_t> sample_index_;
  LineLog sessions_log_;
  RatingStore ratings_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace laughsynth::mos
