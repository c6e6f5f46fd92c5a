#include "laughsynth/mos/service.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "laughsynth/random.hpp"

namespace laughsynth::mos {

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::female: return "female";
    case Gender::male: return "male";
    case Gender::other: return "other";
  }
  return "?";
}

std::string_view to_string(AgeRange a) {
  switch (a) {
    case AgeRange::from20to40: return "[20,40)";
    case AgeRange::from50to65: return "[50,65)";
    case AgeRange::other: return "other";
  }
  return "?";
}

Gender parse_gender(std::string_view s) {
  for (Gender g : kGenders)
    if (to_string(g) == s) return g;
  throw ValidationError(fmt::format("gender must be female, male or other, got '{}'", s));
}

AgeRange parse_age_range(std::string_view s) {
  for (AgeRange a : kAgeRanges)
    if (to_string(a) == s) return a;
  throw ValidationError(fmt::format("age_range must be [20,40), [50,65) or other, got '{}'", s));
}

void validate_samples(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ConfigError("sample set is empty");
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (s.id.empty()) throw ConfigError("sample with an empty id");
    for (char c : s.id)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
        throw ConfigError(fmt::format("sample id '{}' has a character outside [A-Za-z0-9._-]", s.id));
    // ids are shown to participants, so no part of one may name a method
    std::string part;
    for (std::size_t i = 0; i <= s.id.size(); ++i) {
      const char c = i < s.id.size() ? static_cast<char>(std::tolower(static_cast<unsigned char>(s.id[i]))) : '-';
      if (c != '-' && c != '_' && c != '.') {
        part += c;
        continue;
      }
      for (const char* word : {"hmm", "gl", "melgan", "original", "orig", "seq2seq", "griffinlim"})
        if (part == word) throw ConfigError(fmt::format("sample id '{}' reveals its method ('{}')", s.id, word));
      part.clear();
    }
    if (!ids.insert(s.id).second) throw ConfigError(fmt::format("duplicate sample id '{}'", s.id));
  }
}

std::vector<Sample> load_sample_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sample manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  std::vector<Sample> out;
  try {
    for (const auto& e : j.at("samples")) {
      Sample s;
      s.id = e.at("id").get<std::string>();
      s.method = eval::parse_method(e.at("method").get<std::string>());
      std::filesystem::path audio = e.at("audio").get<std::string>();
      s.audio = audio.is_absolute() ? audio : path.parent_path() / audio;
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const eval::EvalError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  validate_samples(out);
  return out;
}

std::size_t ParticipantTable::row_sum(std::size_t age) const {
  std::size_t s = 0;
  for (auto c : counts[age]) s += c;
  return s;
}

std::size_t ParticipantTable::col_sum(std::size_t gender) const {
  std::size_t s = 0;
  for (const auto& row : counts) s += row[gender];
  return s;
}

std::size_t ParticipantTable::total() const {
  std::size_t s = 0;
  for (std::size_t a = 0; a < 3; ++a) s += row_sum(a);
  return s;
}

std::uint64_t session_seed(const std::string& token, std::uint64_t server_seed) {
  return fnv1a(token, fnv1a(fmt::format("{}/", server_seed)));
}

std::vector<std::string> session_order(const std::vector<Sample>& samples, const std::string& token,
                                       std::uint64_t server_seed, std::size_t cap) {
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.id);
  Rng rng(session_seed(token, server_seed));
  rng.shuffle(ids.begin(), ids.end());
  if (cap > 0 && cap < ids.size()) ids.resize(cap);
  return ids;
}

namespace {

std::string random_token() {
  std::random_device rd;
  return fmt::format("{:08x}{:08x}{:08x}{:08x}", rd(), rd(), rd(), rd());
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

MosService::MosService(ServiceConfig cfg, TokenSource tokens, Clock clock)
    : cfg_(std::move(cfg)),
      tokens_(tokens ? std::move(tokens) : TokenSource(random_token)),
      clock_(clock ? std::move(clock) : Clock(now_ms)),
      sessions_log_((validate_samples(cfg_.samples), cfg_.store_dir / "sessions.jsonl"), cfg_.fsync),
      ratings_(cfg_.store_dir / "ratings.jsonl", cfg_.fsync) {
  for (std::size_t i = 0; i < cfg_.samples.size(); ++i) sample_index_[cfg_.samples[i].id] = i;

  for (std::size_t i = 0; i < sessions_log_.replayed().size(); ++i) {
    auto s = std::make_shared<Session>();
    try {
      const auto j = nlohmann::json::parse(sessions_log_.replayed()[i]);
      s->token = j.at("token").get<std::string>();
      s->gender = parse_gender(j.at("gender").get<std::string>());
      s->age = parse_age_range(j.at("age_range").get<std::string>());
      s->order = j.at("order").get<std::vector<std::string>>();
      s->created_ms = j.at("created_ms").get<std::int64_t>();
    } catch (const std::exception& e) {
      throw StoreError(fmt::format("{}:{}: {}", sessions_log_.path().string(), i + 1, e.what()));
    }
    for (const auto& id : s->order)
      if (!sample_index_.count(id))
        throw ConfigError(fmt::format("session {} refers to sample '{}' missing from the sample set", s->token, id));
    advance(*s);
    sessions_[s->token] = std::move(s);
  }
  for (const auto& r : ratings_.records())
    if (!sessions_.count(r.session))
      spdlog::warn("rating by {} for {} belongs to no known session", r.participant, r.sample);
  spdlog::info("mos store {}: {} sessions, {} ratings", cfg_.store_dir.string(), sessions_.size(), ratings_.size());
}

std::shared_ptr<MosService::Session> MosService::session(const std::string& token) const {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) throw UnknownSession("unknown session");
  return it->second;
}

std::size_t MosService::session_count() const {
  std::lock_guard lock(sessions_mu_);
  return sessions_.size();
}

const Sample* MosService::find_sample(const std::string& id) const {
  auto it = sample_index_.find(id);
  return it == sample_index_.end() ? nullptr : &cfg_.samples[it->second];
}

void MosService::advance(Session& s) const {
  // participant id = session token
  while (s.cursor < s.order.size() && ratings_.contains(s.token, s.order[s.cursor])) ++s.cursor;
}

std::optional<Assignment> MosService::assignment(const Session& s) const {
  if (s.cursor >= s.order.size()) return std::nullopt;
  const std::string& id = s.order[s.cursor];
  return Assignment{id, "/audio/" + id, s.cursor, s.order.size()};
}

MosService::Created MosService::create_session(Gender g, AgeRange a) {
  auto s = std::make_shared<Session>();
  s->gender = g;
  s->age = a;
  s->created_ms = clock_();
  std::lock_guard lock(sessions_mu_);
  do s->token = tokens_();
  while (s->token.empty() || sessions_.count(s->token));
  s->order = session_order(cfg_.samples, s->token, cfg_.server_seed, cfg_.max_per_session);

  nlohmann::ordered_json j;
  j["token"] = s->token;
  j["gender"] = to_string(g);
  j["age_range"] = to_string(a);
  j["order"] = s->order;
  j["created_ms"] = s->created_ms;
  sessions_log_.append(j.dump());
  const Created c{s->token, s->order.size()};
  sessions_[s->token] = std::move(s);
  return c;
}

std::optional<Assignment> MosService::next_sample(const std::string& token) const {
  auto s = session(token);
  std::lock_guard lock(s->mu);
  return assignment(*s);
}

SubmitResult MosService::submit_rating(const std::string& token, const std::string& sample_id, int score) {
  if (score < 1 || score > 5) throw ValidationError(fmt::format("score must be an integer in 1..5, got {}", score));
  auto s = session(token);
  std::lock_guard lock(s->mu);
  if (std::find(s->order.begin(), s->order.end(), sample_id) != s->order.end() &&
      ratings_.contains(s->token, sample_id))
    return {true, assignment(*s)};
  const auto current = assignment(*s);
  if (!current) throw SampleMismatch("session is complete", std::nullopt);
  if (current->sample_id != sample_id)
    throw SampleMismatch(fmt::format("rated '{}' but the current sample is '{}'", sample_id, current->sample_id),
                         current);

  const Sample& sample = cfg_.samples[sample_index_.at(sample_id)];
  eval::RatingRecord r{s->token, s->token, sample_id, sample.method, score, clock_()};
  ratings_.append(r);
  advance(*s);
  return {false, assignment(*s)};
}

Results MosService::results() const {
  Results out;
  const auto records = ratings_.records();
  out.n_ratings = records.size();
  out.stats = eval::mos_stats(records);
  std::lock_guard lock(sessions_mu_);
  for (const auto& [token, s] : sessions_)
    ++out.participants.counts[static_cast<std::size_t>(s->age)][static_cast<std::size_t>(s->gender)];
  return out;
}

}  // namespace laughsynth::mos
