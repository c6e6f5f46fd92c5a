#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "laughsynth/mos/service.hpp"

namespace laughsynth::mos {

/// Participant-facing body for GET /api/session/{token}/next.
nlohmann::json assignment_json(const std::optional<Assignment>& a);
/// Admin body for GET /api/results.
nlohmann::json results_json(const Results& r);
/// GET /api/instructions: Likert labels and the meaning of "natural".
nlohmann::json instructions_json(const ServiceConfig& cfg);

/// Endpoints:
///   POST /api/session               {gender, age_range} -> {token, n_samples}
///   GET  /api/session/{token}/next  -> {sample_id, audio_url, ...} | {done: true}
///   POST /api/session/{token}/rating {sample_id, score} -> {ok, duplicate, done}
///   GET  /api/results               (X-Admin-Token) -> stats + participant table
///   GET  /api/instructions
///   GET  /audio/{sample_id}         -> WAV bytes
/// Errors are {"error": "..."} with 400/401/404/409/500.
class HttpServer {
 public:
  HttpServer(MosService& service, std::string admin_token, std::optional<std::filesystem::path> static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  /// listen() on a background thread; returns once the server accepts.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct MosServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path manifest;
  std::filesystem::path store_dir = "mos_store";
  std::string admin_token;
  std::uint64_t server_seed = 1;
  std::size_t max_per_session = 0;
  bool fsync = true;
  std::string explanation = kDefaultExplanation;
  std::optional<std::filesystem::path> static_dir;
};

/// JSON file, then LAUGHSYNTH_MOS_{PORT,HOST,MANIFEST,STORE,ADMIN_TOKEN,SEED}
/// from `env`. Relative paths resolve against the config file. Unknown keys
/// and a missing admin token are errors.
MosServerConfig load_mos_config(const std::optional<std::filesystem::path>& path,
                                const std::function<std::optional<std::string>(const std::string&)>& env);

}  // namespace laughsynth::mos
