#include "laughsynth/mos/http.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

namespace laughsynth::mos {

nlohmann::json assignment_json(const std::optional<Assignment>& a) {
  if (!a) return {{"done", true}};
  return {{"done", false},
          {"sample_id", a->sample_id},
          {"audio_url", a->audio_url},
          {"replay", true},
          {"position", a->position},
          {"total", a->total}};
}

nlohmann::json results_json(const Results& r) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& s : r.stats) {
    double lo = 0, hi = 0;
    for (int k = 0; k < 5; ++k)
      if (s.counts[static_cast<std::size_t>(k)]) {
        if (lo == 0) lo = k + 1;
        hi = k + 1;
      }
    methods.push_back({{"method", eval::to_string(s.method)},
                       {"n_ratings", s.n_ratings},
                       {"mos", s.mos},
                       {"std", s.std},
                       {"median", s.median},
                       {"q1", s.q1},
                       {"q3", s.q3},
                       {"min", lo},
                       {"max", hi},
                       {"counts", s.counts},
                       {"percent", s.percent}});
  }
  nlohmann::json rows = nlohmann::json::array();
  auto row = [&](const std::string& label, auto cell, std::size_t sum) {
    nlohmann::json j{{"age_range", label}};
    for (std::size_t g = 0; g < 3; ++g) j[std::string(to_string(kGenders[g]))] = cell(g);
    j["sum"] = sum;
    rows.push_back(j);
  };
  const auto& t = r.participants;
  for (std::size_t a = 0; a < 3; ++a)
    row(std::string(to_string(kAgeRanges[a])), [&](std::size_t g) { return t.counts[a][g]; }, t.row_sum(a));
  row("sum", [&](std::size_t g) { return t.col_sum(g); }, t.total());
  return {{"n_ratings", r.n_ratings},
          {"std_definition", eval::kStdDefinition},
          {"quantiles", eval::kQuantileDefinition},
          {"methods", methods},
          {"participants", {{"columns", {"female", "male", "other", "sum"}}, {"rows", rows}}}};
}

nlohmann::json instructions_json(const ServiceConfig& cfg) {
  nlohmann::json labels = nlohmann::json::array();
  for (int s = 1; s <= 5; ++s) labels.push_back({{"score", s}, {"label", eval::likert_label(s)}});
  return {{"explanation", cfg.explanation}, {"labels", labels}};
}

struct HttpServer::Impl {
  MosService& svc;
  std::string admin_token;
  httplib::Server server;
  std::thread thread;

  Impl(MosService& s, std::string token) : svc(s), admin_token(std::move(token)) {}

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename F>
  void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const ValidationError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const nlohmann::json::exception& e) {
      reply(res, 400, {{"error", fmt::format("malformed request body: {}", e.what())}});
    } catch (const UnknownSession& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const SampleMismatch& e) {
      reply(res, 409, {{"error", e.what()}, {"current", assignment_json(e.current())}});
    } catch (const std::exception& e) {
      spdlog::error("request failed: {}", e.what());
      reply(res, 500, {{"error", "internal error"}});
    }
  }

  static nlohmann::json body_object(const httplib::Request& req) {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
  }

  static std::string string_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw ValidationError(fmt::format("'{}' must be a string", key));
    return j[key].get<std::string>();
  }

  void routes() {
    server.Post("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto j = body_object(req);
        const auto c = svc.create_session(parse_gender(string_field(j, "gender")),
                                          parse_age_range(string_field(j, "age_range")));
        reply(res, 201, {{"token", c.token}, {"n_samples", c.n_samples}});
      });
    });
    server.Get(R"(/api/session/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, assignment_json(svc.next_sample(req.matches[1]))); });
    });
    server.Post(R"(/api/session/([^/]+)/rating)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto j = body_object(req);
        if (!j.contains("score") || !j["score"].is_number_integer())
          throw ValidationError("'score' must be an integer in 1..5");
        const auto r = svc.submit_rating(req.matches[1], string_field(j, "sample_id"), j["score"].get<int>());
        reply(res, 200, {{"ok", true}, {"duplicate", r.duplicate}, {"done", !r.next.has_value()}});
      });
    });
    server.Get("/api/results", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (admin_token.empty() || req.get_header_value("X-Admin-Token") != admin_token) {
          reply(res, 401, {{"error", "admin token required"}});
          return;
        }
        reply(res, 200, results_json(svc.results()));
      });
    });
    server.Get("/api/instructions", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, instructions_json(svc.config()));
    });
    server.Get(R"(/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Sample* s = svc.find_sample(req.matches[1]);
        if (!s) {
          reply(res, 404, {{"error", "unknown sample"}});
          return;
        }
        std::ifstream in(s->audio, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read audio " + s->audio.string());
        std::ostringstream data;
        data << in.rdbuf();
        res.set_content(data.str(), "audio/wav");
      });
    });
  }
};

HttpServer::HttpServer(MosService& service, std::string admin_token, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service, std::move(admin_token))) {
  impl_->routes();
  if (static_dir && !impl_->server.set_mount_point("/", static_dir->string()))
    throw ConfigError("static directory does not exist: " + static_dir->string());
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw ConfigError("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw ConfigError(fmt::format("cannot bind {}:{}", host, port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

MosServerConfig load_mos_config(const std::optional<std::filesystem::path>& path,
                                const std::function<std::optional<std::string>(const std::string&)>& env) {
  MosServerConfig c;
  std::filesystem::path base = ".";
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q = p;
    return q.is_absolute() ? q : base / q;
  };
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config " + path->string());
    base = path->parent_path().empty() ? "." : path->parent_path();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", path->string(), e.what()));
    }
    if (!j.is_object()) throw ConfigError(path->string() + ": expected an object");
    static const std::set<std::string> known{"host",    "port",          "manifest",  "store_dir",
                                             "admin_token", "server_seed", "max_per_session",
                                             "fsync",   "explanation",   "static_dir"};
    for (const auto& [k, v] : j.items())
      if (!known.count(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", path->string(), k));
    try {
      if (j.contains("host")) c.host = j["host"].get<std::string>();
      if (j.contains("port")) c.port = j["port"].get<int>();
      if (j.contains("manifest")) c.manifest = resolve(j["manifest"].get<std::string>());
      if (j.contains("store_dir")) c.store_dir = resolve(j["store_dir"].get<std::string>());
      if (j.contains("admin_token")) c.admin_token = j["admin_token"].get<std::string>();
      if (j.contains("server_seed")) c.server_seed = j["server_seed"].get<std::uint64_t>();
      if (j.contains("max_per_session")) c.max_per_session = j["max_per_session"].get<std::size_t>();
      if (j.contains("fsync")) c.fsync = j["fsync"].get<bool>();
      if (j.contains("explanation")) c.explanation = j["explanation"].get<std::string>();
      if (j.contains("static_dir")) c.static_dir = resolve(j["static_dir"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", path->string(), e.what()));
    }
  }
  auto number = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const auto n = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("{} must be a non-negative integer, got '{}'", key, v));
    }
  };
  if (auto v = env("LAUGHSYNTH_MOS_HOST")) c.host = *v;
  if (auto v = env("LAUGHSYNTH_MOS_PORT")) c.port = static_cast<int>(number("LAUGHSYNTH_MOS_PORT", *v));
  if (auto v = env("LAUGHSYNTH_MOS_MANIFEST")) c.manifest = *v;
  if (auto v = env("LAUGHSYNTH_MOS_STORE")) c.store_dir = *v;
  if (auto v = env("LAUGHSYNTH_MOS_ADMIN_TOKEN")) c.admin_token = *v;
  if (auto v = env("LAUGHSYNTH_MOS_SEED")) c.server_seed = number("LAUGHSYNTH_MOS_SEED", *v);

  if (c.manifest.empty()) throw ConfigError("no sample manifest configured");
  if (c.admin_token.empty()) throw ConfigError("no admin token configured");
  if (c.port < 0 || c.port > 65535) throw ConfigError(fmt::format("port {} is out of range", c.port));
  return c;
}

}  // namespace laughsynth::mos
