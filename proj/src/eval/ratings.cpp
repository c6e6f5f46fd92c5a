#include "laughsynth/eval/ratings.hpp"

#include <fstream>
#include <set>
#include <utility>

#include <fmt/format.h>
#include <json.hpp>

namespace laughsynth::eval {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::hmm: return "hmm";
    case Method::seq2seq_gl: return "seq2seq-gl";
    case Method::seq2seq_melgan: return "seq2seq-melgan";
    case Method::original: return "original";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : kMethods)
    if (to_string(m) == s) return m;
  throw EvalError(fmt::format("unknown method '{}'", s));
}

std::string_view likert_label(int score) {
  static constexpr std::array<std::string_view, 5> labels{"very unnatural", "unnatural", "fairly natural", "natural",
                                                          "very natural"};
  if (score < 1 || score > 5) throw EvalError(fmt::format("score {} is outside 1..5", score));
  return labels[static_cast<std::size_t>(score - 1)];
}

void validate_records(const std::vector<RatingRecord>& records) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : records) {
    if (r.score < 1 || r.score > 5)
      throw EvalError(fmt::format("rating by {} for {} has score {} outside 1..5", r.participant, r.sample, r.score));
    if (!seen.emplace(r.participant, r.sample).second)
      throw EvalError(fmt::format("participant {} rated sample {} twice", r.participant, r.sample));
  }
}

std::string to_json_line(const RatingRecord& r) {
  nlohmann::ordered_json j;
  j["participant"] = r.participant;
  j["session"] = r.session;
  j["sample"] = r.sample;
  j["method"] = to_string(r.method);
  j["score"] = r.score;
  j["timestamp_ms"] = r.timestamp_ms;
  return j.dump();
}

RatingRecord from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(fmt::format("malformed rating record: {}", e.what()));
  }
  if (!j.is_object()) throw EvalError("rating record is not an object");
  RatingRecord r;
  try {
    r.participant = j.at("participant").get<std::string>();
    r.session = j.at("session").get<std::string>();
    r.sample = j.at("sample").get<std::string>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.score = j.at("score").get<int>();
    r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(fmt::format("rating record: {}", e.what()));
  }
  return r;
}

std::vector<RatingRecord> read_rating_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw EvalError("cannot open rating log " + path.string());
  std::vector<RatingRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const EvalError& e) {
      throw EvalError(fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return out;
}

}  // namespace laughsynth::eval
