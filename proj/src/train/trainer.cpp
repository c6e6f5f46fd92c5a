#include "laughsynth/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

namespace laughsynth::train {

using text2mel::Ssrn;
using text2mel::Text2Mel;

std::string_view to_string(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

double TrainConfig::base_lr() const {
  if (lr) return *lr;
  return stage == Stage::finetune ? kPretrainLr * kFinetuneLrScale : kPretrainLr;
}

double TrainConfig::lr_at(std::uint64_t step) const {
  if (decay_every <= 0 || step == 0) return base_lr();
  return base_lr() * std::pow(lr_decay, static_cast<double>((step - 1) / static_cast<std::uint64_t>(decay_every)));
}

// ---- RunLog ----

void RunLog::append(RunLogRecord r) {
  if (!records_.empty() && r.step <= records_.back().step)
    throw TrainingError(fmt::format("run log: step {} does not follow {}", r.step, records_.back().step));
  if (!file_.empty()) {
    std::ofstream out(file_, std::ios::app);
    nlohmann::json j;
    j["step"] = r.step;
    j["wall_seconds"] = r.wall_seconds;
    for (const auto& [k, v] : r.values) j[k] = v;
    out << j.dump() << '\n';
    if (!out) throw TrainingError("run log: cannot write " + file_.string());
  }
  records_.push_back(std::move(r));
}

bool RunLog::same_trajectory(const RunLog& other) const {
  if (header_ != other.header_ || records_.size() != other.records_.size()) return false;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].step != other.records_[i].step || records_[i].values != other.records_[i].values) return false;
  }
  return true;
}

std::string RunLog::to_jsonl() const {
  std::string s;
  nlohmann::json h(header_);
  h["record"] = "header";
  s += h.dump() + '\n';
  for (const auto& r : records_) {
    nlohmann::json j;
    j["step"] = r.step;
    j["wall_seconds"] = r.wall_seconds;
    for (const auto& [k, v] : r.values) j[k] = v;
    s += j.dump() + '\n';
  }
  return s;
}

void RunLog::attach_file(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw TrainingError("run log: cannot open " + path.string());
  nlohmann::json h(header_);
  h["record"] = "header";
  out << h.dump() << '\n';
  file_ = path;
}

// ---- state ----

Checkpoint TrainState::t2m_checkpoint() const {
  return capture(ModelKind::t2m, t2m.params(), t2m_adam, t2m.config().to_hyper(), fingerprints.symbols,
                 fingerprints.dsp, step, t2m_provenance);
}

Checkpoint TrainState::ssrn_checkpoint() const {
  return capture(ModelKind::ssrn, ssrn.params(), ssrn_adam, ssrn.config().to_hyper(), fingerprints.symbols,
                 fingerprints.dsp, step, ssrn_provenance);
}

TrainState init_state(const text2mel::Text2MelConfig& t2m, const text2mel::SsrnConfig& ssrn, std::uint64_t seed,
                      Fingerprints fp) {
  TrainState s{Text2Mel(t2m, seed), Ssrn(ssrn, seed ^ 0x55aa), {}, {}, 0, {}, {}, fp};
  s.t2m_provenance = {weights_hash(s.t2m.params())};
  s.ssrn_provenance = {weights_hash(s.ssrn.params())};
  return s;
}

namespace {

TrainState from_checkpoints(const Checkpoint& t, const Checkpoint& s, Fingerprints fp) {
  TrainState st{Text2Mel(text2mel::Text2MelConfig::from_hyper(t.hyper), restore_parameters(t)),
                Ssrn(text2mel::SsrnConfig::from_hyper(s.hyper), restore_parameters(s)),
                restore_adam(t),
                restore_adam(s),
                t.step,
                t.provenance,
                s.provenance,
                fp};
  return st;
}

TrainState clone(const TrainState& s) {
  return from_checkpoints(s.t2m_checkpoint(), s.ssrn_checkpoint(), s.fingerprints);
}

}  // namespace

TrainState load_state(const std::filesystem::path& t2m_path, const std::filesystem::path& ssrn_path, Fingerprints fp,
                      bool allow_override) {
  Checkpoint t = load_checkpoint(t2m_path, ModelKind::t2m);
  Checkpoint s = load_checkpoint(ssrn_path, ModelKind::ssrn);
  check_fingerprints(t, fp.symbols, fp.dsp, allow_override);
  check_fingerprints(s, fp.symbols, fp.dsp, allow_override);
  return from_checkpoints(t, s, fp);
}

void save_state(const TrainState& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_checkpoint(s.t2m_checkpoint(), dir / "t2m.ckpt");
  save_checkpoint(s.ssrn_checkpoint(), dir / "ssrn.ckpt");
}

// ---- training ----

namespace {

struct StepLoss {
  double t2m = 0, l1 = 0, divergence = 0, attention = 0, diagonality = 0;
  double ssrn = 0, ssrn_l1 = 0;
};

// Forward (and, when `grad_scale` > 0, backward) of one example.
void t2m_pass(const Text2Mel& m, const Example& ex, bool train, float grad_scale, StepLoss& acc, double w) {
  text2mel::Tape t;
  nn::Binder<float> b(t, m.params(), train);
  auto out = m.forward(b, ex.ids, text2mel::shift_right(ex.mel));
  auto l = m.loss(t, out, ex.mel);
  acc.t2m += w * l.value;
  acc.l1 += w * l.l1;
  acc.divergence += w * l.divergence;
  acc.attention += w * l.attention;
  acc.diagonality += w * text2mel::attention_diagonality(t.value(out.attention.alignment));
  if (train) t.backward(nn::scale(t, l.total, grad_scale));
}

void ssrn_pass(const Ssrn& m, const Example& ex, bool train, float grad_scale, StepLoss& acc, double w) {
  text2mel::Tape t;
  nn::Binder<float> b(t, m.params(), train);
  auto out = m.forward(b, t.constant(ex.mel));
  auto l = m.loss(t, out, text2mel::fit_frames(ex.mag, t.cols(out.magnitude)));
  acc.ssrn += w * l.value;
  acc.ssrn_l1 += w * l.l1;
  if (train) t.backward(nn::scale(t, l.total, grad_scale));
}

bool finite(const StepLoss& l) {
  return std::isfinite(l.t2m) && std::isfinite(l.ssrn) && std::isfinite(l.diagonality);
}

std::map<std::string, double> as_values(const StepLoss& l, bool with_ssrn) {
  std::map<std::string, double> v{{"t2m_total", l.t2m},
                                  {"t2m_l1", l.l1},
                                  {"t2m_divergence", l.divergence},
                                  {"t2m_attention", l.attention},
                                  {"diagonality", l.diagonality}};
  if (with_ssrn) {
    v["ssrn_total"] = l.ssrn;
    v["ssrn_l1"] = l.ssrn_l1;
  }
  return v;
}

void update(text2mel::Params& p, nn::AdamState<float>& st, nn::AdamConfig cfg, double lr, std::uint64_t step,
            std::string_view model) {
  cfg.lr = lr;
  try {
    nn::adam_step(p, st, cfg);
  } catch (const nn::NonFiniteError& e) {
    throw DivergenceError(step, fmt::format("{} diverged at step {}: {}", model, step, e.what()));
  }
}

}  // namespace

EvalLoss evaluate(const TrainState& s, const std::vector<Example>& data, bool include_ssrn) {
  if (data.empty()) throw TrainingError("evaluate: empty dataset");
  StepLoss acc;
  const double w = 1.0 / static_cast<double>(data.size());
  for (const auto& ex : data) {
    t2m_pass(s.t2m, ex, false, 0.0f, acc, w);
    if (include_ssrn) ssrn_pass(s.ssrn, ex, false, 0.0f, acc, w);
  }
  return {acc.t2m, acc.l1, acc.ssrn};
}

RunLog train(TrainState& state, const std::vector<Example>& data, const TrainConfig& cfg,
             const StepCallback& on_step) {
  if (cfg.max_steps <= 0) throw TrainingError("max_steps must be positive");
  if (cfg.batch_size <= 0) throw TrainingError("batch_size must be positive");
  if (data.empty()) throw TrainingError("training corpus is empty");
  if (!(cfg.base_lr() > 0)) throw TrainingError("learning rate must be positive");
  if (cfg.stage == Stage::finetune) require_finetune_styles(data);

  RunLog log({{"seed", std::to_string(cfg.seed)},
              {"stage", std::string(to_string(cfg.stage))},
              {"batch_size", std::to_string(cfg.batch_size)},
              {"lr", fmt::format("{}", cfg.base_lr())},
              {"max_steps", std::to_string(cfg.max_steps)},
              {"examples", std::to_string(data.size())}});
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    log.attach_file(cfg.out_dir / "runlog.jsonl");
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();  // forces a shuffle before the first batch

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const float grad_scale = 1.0f / static_cast<float>(std::min(batch, data.size()));
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t first = state.step + 1;
  const std::uint64_t last = state.step + static_cast<std::uint64_t>(cfg.max_steps);

  for (std::uint64_t step = first; step <= last; ++step) {
    state.t2m.params().zero_grad();
    state.ssrn.params().zero_grad();
    StepLoss acc;
    const std::size_t n = std::min(batch, data.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (cursor == order.size()) {
        rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const Example& ex = data[order[cursor++]];
      try {
        t2m_pass(state.t2m, ex, true, grad_scale, acc, grad_scale);
        if (cfg.train_ssrn) ssrn_pass(state.ssrn, ex, true, grad_scale, acc, grad_scale);
      } catch (const nn::NonFiniteError& e) {
        throw DivergenceError(step, fmt::format("non-finite value at step {} on '{}': {}", step, ex.id, e.what()));
      }
    }
    if (!finite(acc)) throw DivergenceError(step, fmt::format("loss became non-finite at step {}", step));

    const double lr = cfg.lr_at(step - first + 1);
    update(state.t2m.params(), state.t2m_adam, cfg.adam, lr, step, "t2m");
    if (cfg.train_ssrn) update(state.ssrn.params(), state.ssrn_adam, cfg.adam, lr, step, "ssrn");
    state.step = step;

    const bool log_now = step == first || step == last || (cfg.log_every > 0 && step % cfg.log_every == 0);
    if (log_now) {
      RunLogRecord r{step, as_values(acc, cfg.train_ssrn),
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
      r.values["lr"] = lr;
      spdlog::debug("{} step {} t2m {:.4f} l1 {:.4f}", to_string(cfg.stage), step, acc.t2m, acc.l1);
      if (on_step) on_step(state, r);
      log.append(std::move(r));
    }
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != last)
      save_state(state, cfg.out_dir);
  }
  if (!cfg.out_dir.empty()) save_state(state, cfg.out_dir);
  return log;
}

TrainState pretrain(const std::vector<Example>& data, const text2mel::Text2MelConfig& t2m,
                    const text2mel::SsrnConfig& ssrn, Fingerprints fp, const TrainConfig& cfg, RunLog* log) {
  if (cfg.stage != Stage::pretrain) throw TrainingError("pretrain: config stage is not pretrain");
  TrainState s = init_state(t2m, ssrn, cfg.seed, fp);
  RunLog l = train(s, data, cfg);
  if (log != nullptr) *log = std::move(l);
  return s;
}

void require_finetune_styles(const std::vector<Example>& data) {
  for (const auto& ex : data) {
    if (ex.style == annotation::Style::speech)
      throw TrainingError(fmt::format("fine-tuning corpus contains plain speech record '{}'", ex.id));
  }
}

TrainState finetune(const TrainState& init, const std::vector<Example>& data, const TrainConfig& cfg,
                    RunLog* log) {
  if (cfg.stage != Stage::finetune) throw TrainingError("finetune: config stage is not finetune");
  require_finetune_styles(data);
  TrainState s = clone(init);
  s.t2m_provenance.push_back(checkpoint_hash(init.t2m_checkpoint()));
  s.ssrn_provenance.push_back(checkpoint_hash(init.ssrn_checkpoint()));
  // A new stage starts with fresh optimizer moments and its own step count.
  s.t2m_adam = {};
  s.ssrn_adam = {};
  s.step = 0;
  RunLog l = train(s, data, cfg);
  if (log != nullptr) *log = std::move(l);
  return s;
}

OverfitReport overfit_single(const Example& ex, const text2mel::Text2MelConfig& t2m_cfg,
                             const text2mel::SsrnConfig& ssrn_cfg, const OverfitOptions& options) {
  if (options.steps < 0) throw TrainingError("overfit: steps must be non-negative");
  TrainState s = init_state(t2m_cfg, ssrn_cfg, options.seed, {});
  OverfitReport rep;
  rep.log = RunLog({{"seed", std::to_string(options.seed)},
                    {"stage", "overfit"},
                    {"lr", fmt::format("{}", options.lr)},
                    {"example", ex.id}});
  nn::AdamConfig adam;
  const auto t0 = std::chrono::steady_clock::now();
  for (int step = 0;; ++step) {
    s.t2m.params().zero_grad();
    s.ssrn.params().zero_grad();
    StepLoss acc;
    const bool train = step < options.steps;
    try {
      t2m_pass(s.t2m, ex, train, 1.0f, acc, 1.0);
      ssrn_pass(s.ssrn, ex, train, 1.0f, acc, 1.0);
    } catch (const nn::NonFiniteError& e) {
      throw DivergenceError(step, fmt::format("non-finite value at overfit step {}: {}", step, e.what()));
    }
    if (!finite(acc)) throw DivergenceError(step, fmt::format("overfit loss became non-finite at step {}", step));
    if (step == 0 || !train || (options.log_every > 0 && step % options.log_every == 0)) {
      rep.log.append({static_cast<std::uint64_t>(step), as_values(acc, true),
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    }
    if (!train) {
      rep.t2m_l1 = acc.l1;
      rep.diagonality = acc.diagonality;
      rep.ssrn_l1 = acc.ssrn_l1;
      break;
    }
    update(s.t2m.params(), s.t2m_adam, adam, options.lr, step + 1, "t2m");
    update(s.ssrn.params(), s.ssrn_adam, adam, options.lr, step + 1, "ssrn");
  }
  const int max_frames = std::max<int>(2 * static_cast<int>(ex.mel.cols()), 8);
  auto syn = s.t2m.synthesize(ex.ids, {.max_frames = max_frames, .monotonic = true, .eos_threshold = 0.5f,
                                       .eos_patience = 3});
  rep.synthesized_diagonality = text2mel::attention_diagonality(syn.alignment);
  return rep;
}

}  // namespace laughsynth::train
