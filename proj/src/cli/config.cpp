#include "laughsynth/cli/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace laughsynth::cli {

namespace {

using nlohmann::json;

// Reads typed keys out of one JSON object and rejects the leftovers.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw UsageError(fmt::format("config: '{}' must be an object", name_));
  }

  void integer(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }
  void u64(const char* key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void number(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void optional_number(const char* key, std::optional<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "a number or null");
      out = v->get<double>();
    }
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }
  void integers(const char* key, std::vector<int>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(key, "an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  void path(const char* key, std::filesystem::path& out, const std::filesystem::path& base) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "a path string");
      const std::filesystem::path p = v->get<std::string>();
      out = p.empty() || p.is_absolute() ? p : base / p;
    }
  }
  const json* sub(const char* key) { return take(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw UsageError(fmt::format("config: unknown key '{}{}'", prefix(), k));
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }
  std::string prefix() const { return name_.empty() ? "" : name_ + "."; }
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw UsageError(fmt::format("config: '{}{}' must be {}", prefix(), key, what));
  }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

void GlobalConfig::validate() const {
  try {
    dsp.validate();
  } catch (const dsp::ConfigError& e) {
    throw UsageError(fmt::format("config: dsp: {}", e.what()));
  }
  if (model.embed_dim < 1 || model.hidden_dim < 1 || model.ssrn_channels < 1 || model.generator_channels < 1)
    throw UsageError("config: model dimensions must be positive");
  if (!(model.guided_g > 0)) throw UsageError("config: model.guided_g must be positive");
  int hop = 1;
  for (int s : model.generator_strides) {
    if (s < 1) throw UsageError("config: model.generator_strides must be positive");
    hop *= s;
  }
  if (model.generator_strides.empty() || hop != dsp.hop_length)
    throw UsageError(fmt::format("config: product of model.generator_strides ({}) must equal dsp.hop_length ({})",
                                 hop, dsp.hop_length));
  if (train.batch_size < 1) throw UsageError("config: train.batch_size must be positive");
  if (train.max_steps < 1) throw UsageError("config: train.max_steps must be positive");
  if (train.lr && !(*train.lr > 0)) throw UsageError("config: train.lr must be positive");
  if (!(train.lr_decay > 0)) throw UsageError("config: train.lr_decay must be positive");
  if (train.decay_every < 0 || train.checkpoint_every < 0 || train.log_every < 0)
    throw UsageError("config: train step intervals must be non-negative");
  if (corrector.steps < 0) throw UsageError("config: corrector.steps must be non-negative");
  if (!(corrector.lr > 0)) throw UsageError("config: corrector.lr must be positive");
}

text2mel::Text2MelConfig GlobalConfig::t2m_config(std::size_t n_symbols) const {
  text2mel::Text2MelConfig c;
  c.n_symbols = static_cast<int>(n_symbols);
  c.n_mels = dsp.n_mels;
  c.embed_dim = model.embed_dim;
  c.hidden_dim = model.hidden_dim;
  c.reduction_factor = dsp.reduction_factor;
  c.guided_g = static_cast<float>(model.guided_g);
  return c;
}

text2mel::SsrnConfig GlobalConfig::ssrn_config() const {
  text2mel::SsrnConfig c;
  c.n_mels = dsp.n_mels;
  c.n_bins = dsp.n_bins();
  c.channels = model.ssrn_channels;
  c.reduction_factor = dsp.reduction_factor;
  return c;
}

vocoder::GeneratorConfig GlobalConfig::generator_config() const {
  vocoder::GeneratorConfig c;
  c.n_mels = dsp.n_mels;
  c.channels = model.generator_channels;
  c.strides = model.generator_strides;
  return c;
}

GlobalConfig config_from_json(const json& j, const std::filesystem::path& base) {
  GlobalConfig c;
  Section top(j, "");
  top.u64("seed", c.seed);
  if (const json* d = top.sub("dsp")) {
    Section s(*d, "dsp");
    s.integer("sample_rate", c.dsp.sample_rate);
    s.integer("n_fft", c.dsp.n_fft);
    s.integer("hop_length", c.dsp.hop_length);
    s.integer("win_length", c.dsp.win_length);
    s.integer("n_mels", c.dsp.n_mels);
    s.number("fmin", c.dsp.fmin);
    s.number("fmax", c.dsp.fmax);
    s.number("preemphasis", c.dsp.preemphasis);
    s.number("ref_db", c.dsp.ref_db);
    s.number("max_db", c.dsp.max_db);
    s.integer("reduction_factor", c.dsp.reduction_factor);
    s.boolean("center", c.dsp.center);
    s.finish();
  }
  if (const json* m = top.sub("model")) {
    Section s(*m, "model");
    s.integer("embed_dim", c.model.embed_dim);
    s.integer("hidden_dim", c.model.hidden_dim);
    s.number("guided_g", c.model.guided_g);
    s.integer("ssrn_channels", c.model.ssrn_channels);
    s.integer("generator_channels", c.model.generator_channels);
    s.integers("generator_strides", c.model.generator_strides);
    s.finish();
  }
  if (const json* t = top.sub("train")) {
    Section s(*t, "train");
    s.integer("batch_size", c.train.batch_size);
    s.optional_number("lr", c.train.lr);
    s.number("lr_decay", c.train.lr_decay);
    s.integer("decay_every", c.train.decay_every);
    s.integer("max_steps", c.train.max_steps);
    s.integer("checkpoint_every", c.train.checkpoint_every);
    s.integer("log_every", c.train.log_every);
    s.boolean("train_ssrn", c.train.train_ssrn);
    s.finish();
  }
  if (const json* k = top.sub("corrector")) {
    Section s(*k, "corrector");
    s.integer("steps", c.corrector.steps);
    s.number("lr", c.corrector.lr);
    s.integer("log_every", c.corrector.log_every);
    s.finish();
  }
  if (const json* p = top.sub("paths")) {
    Section s(*p, "paths");
    s.path("manifest", c.paths.manifest, base);
    s.path("features", c.paths.features, base);
    s.path("checkpoints", c.paths.checkpoints, base);
    s.path("init", c.paths.init, base);
    s.path("generator", c.paths.generator, base);
    s.finish();
  }
  top.finish();
  c.train.seed = c.seed;
  return c;
}

json config_to_json(const GlobalConfig& c) {
  const auto& d = c.dsp;
  const auto& t = c.train;
  return {{"seed", c.seed},
          {"dsp",
           {{"sample_rate", d.sample_rate},
            {"n_fft", d.n_fft},
            {"hop_length", d.hop_length},
            {"win_length", d.win_length},
            {"n_mels", d.n_mels},
            {"fmin", d.fmin},
            {"fmax", d.fmax},
            {"preemphasis", d.preemphasis},
            {"ref_db", d.ref_db},
            {"max_db", d.max_db},
            {"reduction_factor", d.reduction_factor},
            {"center", d.center}}},
          {"model",
           {{"embed_dim", c.model.embed_dim},
            {"hidden_dim", c.model.hidden_dim},
            {"guided_g", c.model.guided_g},
            {"ssrn_channels", c.model.ssrn_channels},
            {"generator_channels", c.model.generator_channels},
            {"generator_strides", c.model.generator_strides}}},
          {"train",
           {{"batch_size", t.batch_size},
            {"lr", t.lr ? json(*t.lr) : json(nullptr)},
            {"lr_decay", t.lr_decay},
            {"decay_every", t.decay_every},
            {"max_steps", t.max_steps},
            {"checkpoint_every", t.checkpoint_every},
            {"log_every", t.log_every},
            {"train_ssrn", t.train_ssrn}}},
          {"corrector",
           {{"steps", c.corrector.steps}, {"lr", c.corrector.lr}, {"log_every", c.corrector.log_every}}},
          {"paths",
           {{"manifest", c.paths.manifest.string()},
            {"features", c.paths.features.string()},
            {"checkpoints", c.paths.checkpoints.string()},
            {"init", c.paths.init.string()},
            {"generator", c.paths.generator.string()}}}};
}

void apply_overrides(json& j, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError(fmt::format("override '{}' is not key=value", o));
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &j;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw UsageError(fmt::format("override '{}' has an empty key segment", o));
      if (!node->is_object()) throw UsageError(fmt::format("override '{}': '{}' is not a section", o, part));
      if (dot == std::string::npos) {
        (*node)[part] = std::move(value);
        break;
      }
      node = &(*node)[part];
      if (node->is_null()) *node = json::object();
      start = dot + 1;
    }
  }
}

GlobalConfig load_global_config(const std::optional<std::filesystem::path>& path,
                                const std::vector<std::string>& overrides) {
  json j = json::object();
  std::filesystem::path base = ".";
  if (path) {
    std::ifstream in(*path);
    if (!in) throw UsageError("cannot open config " + path->string());
    j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw UsageError(fmt::format("config {} is not valid JSON", path->string()));
    base = path->parent_path().empty() ? "." : path->parent_path();
  }
  // Flags are relative to the working directory, not the config file.
  std::vector<std::string> fixed;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (o.rfind("paths.", 0) == 0 && eq != std::string::npos && eq + 1 < o.size())
      fixed.push_back(o.substr(0, eq + 1) + std::filesystem::absolute(o.substr(eq + 1)).string());
    else
      fixed.push_back(o);
  }
  apply_overrides(j, fixed);
  GlobalConfig c = config_from_json(j, base);
  c.validate();
  return c;
}

}  // namespace laughsynth::cli
