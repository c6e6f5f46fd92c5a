#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace laughsynth::eval {

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Listening-test conditions, in report order.
enum class Method { hmm, seq2seq_gl, seq2seq_melgan, original };

inline constexpr std::array<Method, 4> kMethods{Method::hmm, Method::seq2seq_gl, Method::seq2seq_melgan,
                                               Method::original};

std::string_view to_string(Method m);
/// "hmm", "seq2seq-gl", "seq2seq-melgan", "original". Throws EvalError.
Method parse_method(std::string_view s);

/// Likert label for a score 1..5.
std::string_view likert_label(int score);

struct RatingRecord {
  std::string participant;
  std::string session;
  std::string sample;
  Method method = Method::original;
  int score = 0;
  std::int64_t timestamp_ms = 0;

  bool operator==(const RatingRecord&) const = default;
};

/// Throws EvalError for a score outside 1..5 or a repeated
/// (participant, sample) pair.
void validate_records(const std::vector<RatingRecord>& records);

/// One JSON object per line (the rating store format).
std::string to_json_line(const RatingRecord& r);
RatingRecord from_json_line(std::string_view line);
/// Blank lines are skipped. Throws EvalError naming the line number.
std::vector<RatingRecord> read_rating_log(const std::filesystem::path& path);

}  // namespace laughsynth::eval
