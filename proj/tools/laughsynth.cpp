// laughsynth: one binary for the whole pipeline.
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "laughsynth/annotation/synthetic.hpp"
#include "laughsynth/cli/config.hpp"
#include "laughsynth/dsp/stft.hpp"
#include "laughsynth/eval/ratings.hpp"
#include "laughsynth/eval/stats.hpp"
#include "laughsynth/gradcheck/catalog.hpp"
#include "laughsynth/train/feature_cache.hpp"
#include "laughsynth/vocoder/vocoder.hpp"
#include "laughsynth/mos/http.hpp"

using namespace laughsynth;
using cli::UsageError;
namespace fs = std::filesystem;

namespace {

// Flags shared by the pipeline commands. Each set flag becomes an
// override applied after the config file, so flags win.
struct Common {
  std::optional<fs::path> config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override a config key, e.g. --set dsp.n_mels=40")->take_all();
    app->add_option("--seed", seed, "Random seed");
  }

  cli::GlobalConfig load(std::vector<std::string> extra = {}) const {
    std::vector<std::string> all = sets;
    if (seed) all.push_back(fmt::format("seed={}", *seed));
    all.insert(all.end(), extra.begin(), extra.end());
    return cli::load_global_config(config, all);
  }
};

std::string path_override(const std::string& key, const fs::path& p) { return key + "=" + p.string(); }

fs::path require_path(const fs::path& p, const std::string& what) {
  if (p.empty()) throw UsageError(fmt::format("no {} given", what));
  return p;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(fmt::format("missing {}: {}", what, p.string()));
}

annotation::Manifest manifest_of(const cli::GlobalConfig& c) {
  return annotation::load_manifest(require_path(c.paths.manifest, "manifest (--manifest or paths.manifest)"));
}

train::Fingerprints fingerprints(const cli::GlobalConfig& c, const annotation::SymbolTable& table) {
  return {table.fingerprint(), c.dsp.fingerprint()};
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

// ---- corpus-synth

struct CorpusSynthArgs {
  Common common;
  int n = 0;
  fs::path out;
  std::string prefix = "utt";
};

int corpus_synth(const CorpusSynthArgs& a) {
  const auto c = a.common.load();
  annotation::SyntheticCorpusOptions opt;
  opt.out_dir = a.out;
  opt.id_prefix = a.prefix;
  const auto m = annotation::generate_synthetic_corpus(c.seed, a.n, c.dsp, opt);
  const auto stats = annotation::corpus_stats(m, annotation::durations_from_audio(m));
  fmt::print("wrote {} utterances ({:.2f} s) to {}\n", stats.utterances, stats.total_seconds,
             (a.out / "manifest.tsv").string());
  return cli::kExitOk;
}

// ---- corpus-stats

int corpus_stats_cmd(const Common& common, const fs::path& manifest) {
  const auto c = common.load({path_override("paths.manifest", manifest)});
  const auto m = manifest_of(c);
  const auto s = annotation::corpus_stats(m, annotation::durations_from_audio(m));
  fmt::print("style,count,seconds\n");
  for (const auto& [style, n] : s.count_by_style)
    fmt::print("{},{},{:.3f}\n", annotation::to_string(style), n, s.seconds_by_style.at(style));
  for (const auto& [ctx, n] : s.laugh_count_by_context)
    fmt::print("laugh/{},{},{:.3f}\n", annotation::to_string(ctx), n, s.laugh_seconds_by_context.at(ctx));
  fmt::print("total,{},{:.3f}\n", s.utterances, s.total_seconds);
  return cli::kExitOk;
}

// ---- preprocess

int preprocess(const Common& common, const fs::path& manifest, const fs::path& out) {
  const auto c = common.load({path_override("paths.manifest", manifest), path_override("paths.features", out)});
  const auto m = manifest_of(c);
  const auto table = annotation::SymbolTable::standard();
  train::CacheReport r;
  train::build_dataset_cached(m, table, c.dsp, c.paths.features, &r);
  fmt::print("features in {}: computed {}, cached {}, stale {}\n", c.paths.features.string(), r.computed, r.cached,
             r.stale);
  return cli::kExitOk;
}

// ---- train

struct TrainArgs {
  Common common;
  std::string stage = "pretrain";
  fs::path manifest, out, init, features;
  std::optional<int> steps, batch_size;
  std::optional<double> lr;
};

int train_cmd(const TrainArgs& a) {
  std::vector<std::string> extra;
  if (!a.manifest.empty()) extra.push_back(path_override("paths.manifest", a.manifest));
  if (!a.out.empty()) extra.push_back(path_override("paths.checkpoints", a.out));
  if (!a.init.empty()) extra.push_back(path_override("paths.init", a.init));
  if (!a.features.empty()) extra.push_back(path_override("paths.features", a.features));
  if (a.steps) extra.push_back(fmt::format("train.max_steps={}", *a.steps));
  if (a.batch_size) extra.push_back(fmt::format("train.batch_size={}", *a.batch_size));
  if (a.lr) extra.push_back(fmt::format("train.lr={}", *a.lr));
  auto c = a.common.load(extra);

  const bool fine = a.stage == "finetune";
  const fs::path out = require_path(c.paths.checkpoints, "output directory (--out or paths.checkpoints)");
  if (fine) {
    const fs::path init = require_path(c.paths.init, "init checkpoint directory (--init or paths.init)");
    require_file(init / "t2m.ckpt", "init checkpoint");
    require_file(init / "ssrn.ckpt", "init checkpoint");
  }
  const auto m = manifest_of(c);
  const auto table = annotation::SymbolTable::standard();
  const auto fp = fingerprints(c, table);
  const fs::path cache = c.paths.features.empty() ? out / "features" : c.paths.features;
  const auto data = train::build_dataset_cached(m, table, c.dsp, cache);
  if (fine) {
    try {
      train::require_finetune_styles(data);
    } catch (const train::TrainingError& e) {
      throw UsageError(e.what());
    }
  }

  c.train.stage = fine ? train::Stage::finetune : train::Stage::pretrain;
  c.train.out_dir = out;
  fs::create_directories(out);
  write_json(out / "config.json", cli::config_to_json(c));
  fmt::print("stage {} seed {} examples {} steps {}\n", a.stage, c.train.seed, data.size(), c.train.max_steps);

  train::RunLog log;
  const train::TrainState s =
      fine ? train::finetune(train::load_state(c.paths.init / "t2m.ckpt", c.paths.init / "ssrn.ckpt", fp, false), data,
                             c.train, &log)
           : train::pretrain(data, c.t2m_config(table.size()), c.ssrn_config(), fp, c.train, &log);
  const auto& last = log.records().back();
  fmt::print("done at step {}: t2m loss {:.5f}\n", s.step, last.values.at("t2m_total"));
  fmt::print("checkpoints in {}\n", out.string());
  return cli::kExitOk;
}

// ---- train-corrector

int train_corrector(const Common& common, const fs::path& manifest, const fs::path& out, std::optional<int> steps) {
  std::vector<std::string> extra{path_override("paths.manifest", manifest)};
  if (steps) extra.push_back(fmt::format("corrector.steps={}", *steps));
  const auto c = common.load(extra);
  const auto m = manifest_of(c);
  std::vector<vocoder::CorrectorPair> pairs;
  for (const auto& u : m.utterances)
    pairs.push_back(vocoder::make_corrector_pair(dsp::load_wav(m.audio_path(u), c.dsp.sample_rate), c.dsp));

  vocoder::ToyTrainOptions opt;
  opt.steps = c.corrector.steps;
  opt.seed = c.seed;
  opt.adam.lr = c.corrector.lr;
  opt.log_every = c.corrector.log_every;
  const auto r = vocoder::train_corrector_toy(pairs, c.generator_config(), opt);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  train::save_checkpoint(
      vocoder::generator_checkpoint(r.generator, r.adam, c.dsp.fingerprint(), static_cast<std::uint64_t>(opt.steps), {}),
      out);
  fmt::print("corrector loss {:.5f} -> {:.5f} over {} steps; wrote {}\n", r.initial_loss, r.final_loss, opt.steps,
             out.string());
  return cli::kExitOk;
}

// ---- synth

struct SynthArgs {
  Common common;
  std::string symbols;
  std::string vocoder = "gl";
  fs::path out, checkpoints, generator;
  int max_frames = 200;
  int gl_iters = 60;
};

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> v;
  for (std::string t; in >> t;) v.push_back(t);
  return v;
}

int synth(const SynthArgs& a) {
  std::vector<std::string> extra;
  if (!a.checkpoints.empty()) extra.push_back(path_override("paths.checkpoints", a.checkpoints));
  if (!a.generator.empty()) extra.push_back(path_override("paths.generator", a.generator));
  const auto c = a.common.load(extra);

  const auto table = annotation::SymbolTable::standard();
  const auto tokens = split_ws(a.symbols);
  if (tokens.empty()) throw UsageError("--symbols is empty");
  std::vector<int> ids;
  try {
    ids = annotation::encode_tokens(tokens, table);
  } catch (const annotation::EncodeError& e) {
    throw UsageError(e.what());
  }

  const fs::path dir = require_path(c.paths.checkpoints, "checkpoint directory (--checkpoints or paths.checkpoints)");
  require_file(dir / "t2m.ckpt", "checkpoint");
  require_file(dir / "ssrn.ckpt", "checkpoint");
  const bool melgan = a.vocoder == "melgan";
  if (melgan) require_file(require_path(c.paths.generator, "generator checkpoint (--generator)"), "generator checkpoint");

  const auto state = train::load_state(dir / "t2m.ckpt", dir / "ssrn.ckpt", fingerprints(c, table), false);
  text2mel::SynthesisOptions so;
  so.max_frames = a.max_frames;
  const auto res = state.t2m.synthesize(ids, so);
  const Eigen::MatrixXf mag = state.ssrn.infer(res.mel);

  vocoder::GlVocodeOptions gl;
  gl.n_iters = a.gl_iters;
  gl.random_phase_seed = c.seed;
  dsp::Waveform w = vocoder::gl_vocode(mag.cast<double>(), c.dsp, gl);
  if (melgan) {
    const auto ck = train::load_checkpoint(c.paths.generator, train::ModelKind::generator);
    if (ck.dsp_fingerprint != c.dsp.fingerprint())
      throw UsageError(fmt::format("generator checkpoint {} was trained with a different dsp config",
                                   c.paths.generator.string()));
    w = vocoder::correct_waveform(w, vocoder::generator_from_checkpoint(ck), c.dsp);
  }
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  dsp::write_wav(a.out, w);

  const double diag = text2mel::attention_diagonality(res.alignment);
  nlohmann::ordered_json meta{{"symbols", tokens},
                              {"vocoder", a.vocoder},
                              {"seed", c.seed},
                              {"mel_frames", res.mel.cols()},
                              {"frames", mag.cols()},
                              {"samples", w.samples.size()},
                              {"sample_rate", w.sample_rate},
                              {"attention_diagonality", diag},
                              {"truncated", res.truncated},
                              {"stop_rule", res.stop_rule}};
  fs::path side = a.out;
  side.replace_extension(".json");
  std::ofstream(side) << meta.dump(2) << "\n";
  fmt::print("wrote {} ({} frames, {:.3f} s, diagonality {:.3f}{})\n", a.out.string(), mag.cols(), w.duration(), diag,
             res.truncated ? ", truncated" : "");
  return cli::kExitOk;
}

// ---- eval-objective

int eval_objective(const Common& common, const fs::path& ref, const fs::path& est) {
  const auto c = common.load();
  const auto r = dsp::stft(dsp::load_wav(ref, c.dsp.sample_rate), c.dsp).magnitude();
  const auto e = dsp::stft(dsp::load_wav(est, c.dsp.sample_rate), c.dsp).magnitude();
  nlohmann::ordered_json j{{"spectral_convergence", eval::spectral_convergence(r, e)},
                           {"log_mag_distance", eval::log_mag_distance(r, e)},
                           {"frames", std::min(r.cols(), e.cols())}};
  fmt::print("{}\n", j.dump());
  return cli::kExitOk;
}

// ---- mos-stats

int mos_stats_cmd(const fs::path& log, const std::string& format, const fs::path& out, int decimals) {
  const auto fmt_ = eval::parse_export_format(format);
  const auto stats = eval::mos_stats(eval::read_rating_log(log));
  if (out.empty())
    fmt::print("{}", eval::format_results(stats, fmt_, decimals));
  else
    eval::export_results(stats, out, fmt_, decimals);
  return cli::kExitOk;
}

// ---- grad-check

int grad_check(int seeds, const std::string& filter, double tolerance) {
  const auto reports = gradcheck::run_catalog(seeds, filter);
  if (reports.empty()) throw UsageError(fmt::format("no op matches '{}'", filter));
  int failed = 0;
  double total = 0;
  for (const auto& r : reports) {
    const bool ok = r.worst < tolerance;
    failed += !ok;
    total += r.seconds;
    fmt::print("{:<28} worst {:.3e} over {} seeds  {}\n", r.name, r.worst, r.seeds, ok ? "ok" : "FAIL");
  }
  fmt::print("{} ops, {} failed, tolerance {:g}, {:.2f} s\n", reports.size(), failed, tolerance, total);
  return failed ? cli::kExitRuntime : cli::kExitOk;
}

// ---- mos-serve

int mos_serve(const std::optional<fs::path>& config, std::optional<int> port) {
  auto env = [](const std::string& k) -> std::optional<std::string> {
    const char* v = std::getenv(k.c_str());
    return v ? std::optional<std::string>(v) : std::nullopt;
  };
  auto sc = mos::load_mos_config(config, env);
  if (port) sc.port = *port;

  // Block the stop signals before any server thread exists; the main
  // thread then waits for them synchronously.
  sigset_t stop;
  sigemptyset(&stop);
  sigaddset(&stop, SIGINT);
  sigaddset(&stop, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop, nullptr);

  mos::ServiceConfig svc_cfg;
  svc_cfg.samples = mos::load_sample_manifest(sc.manifest);
  svc_cfg.store_dir = sc.store_dir;
  svc_cfg.server_seed = sc.server_seed;
  svc_cfg.max_per_session = sc.max_per_session;
  svc_cfg.fsync = sc.fsync;
  svc_cfg.explanation = sc.explanation;
  mos::MosService svc(svc_cfg);
  mos::HttpServer http(svc, sc.admin_token, sc.static_dir);
  const int bound = http.bind(sc.host, sc.port);
  http.start();
  fmt::print("listening on http://{}:{} ({} samples, {} sessions)\n", sc.host, bound, svc_cfg.samples.size(),
             svc.session_count());
  std::fflush(stdout);

  int sig = 0;
  sigwait(&stop, &sig);
  spdlog::info("signal {}, shutting down", sig);
  http.stop();
  return cli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("laughsynth"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Laughter synthesis pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More logging (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  CorpusSynthArgs cs;
  auto* cs_cmd = app.add_subcommand("corpus-synth", "Render a synthetic annotated corpus");
  cs.common.attach(cs_cmd);
  cs_cmd->add_option("--n", cs.n, "Number of utterances")->required()->check(CLI::PositiveNumber);
  cs_cmd->add_option("--out", cs.out, "Output directory")->required();
  cs_cmd->add_option("--id-prefix", cs.prefix, "Utterance id prefix");

  Common st_common;
  fs::path st_manifest;
  auto* st_cmd = app.add_subcommand("corpus-stats", "Per-style counts and durations of a manifest");
  st_common.attach(st_cmd);
  st_cmd->add_option("--manifest", st_manifest, "Manifest TSV")->required()->check(CLI::ExistingFile);

  Common pp_common;
  fs::path pp_manifest, pp_out;
  auto* pp_cmd = app.add_subcommand("preprocess", "Cache mel and magnitude features per utterance");
  pp_common.attach(pp_cmd);
  pp_cmd->add_option("--manifest", pp_manifest, "Manifest TSV")->required()->check(CLI::ExistingFile);
  pp_cmd->add_option("--out", pp_out, "Feature cache directory")->required();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Pretrain or fine-tune Text2Mel and SSRN");
  tr.common.attach(tr_cmd);
  tr_cmd->add_option("--stage", tr.stage, "pretrain or finetune")
      ->required()
      ->check(CLI::IsMember({"pretrain", "finetune"}));
  tr_cmd->add_option("--manifest", tr.manifest, "Manifest TSV");
  tr_cmd->add_option("--out", tr.out, "Checkpoint directory");
  tr_cmd->add_option("--init", tr.init, "Directory holding the checkpoints to fine-tune");
  tr_cmd->add_option("--features", tr.features, "Feature cache directory (default <out>/features)");
  tr_cmd->add_option("--steps", tr.steps, "Training steps");
  tr_cmd->add_option("--batch-size", tr.batch_size, "Batch size");
  tr_cmd->add_option("--lr", tr.lr, "Learning rate");

  Common tc_common;
  fs::path tc_manifest, tc_out;
  std::optional<int> tc_steps;
  auto* tc_cmd = app.add_subcommand("train-corrector", "Train the waveform corrector on natural audio");
  tc_common.attach(tc_cmd);
  tc_cmd->add_option("--manifest", tc_manifest, "Manifest TSV")->required()->check(CLI::ExistingFile);
  tc_cmd->add_option("--out", tc_out, "Generator checkpoint to write")->required();
  tc_cmd->add_option("--steps", tc_steps, "Training steps");

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "Synthesize a WAV from a symbol sequence");
  sy.common.attach(sy_cmd);
  sy_cmd->add_option("--symbols", sy.symbols, "Space-separated symbols, e.g. \"STYLE_LAUGH CTX_A LV LU LV\"")
      ->required();
  sy_cmd->add_option("--vocoder", sy.vocoder, "gl or melgan")->check(CLI::IsMember({"gl", "melgan"}));
  sy_cmd->add_option("--out", sy.out, "Output WAV")->required();
  sy_cmd->add_option("--checkpoints", sy.checkpoints, "Directory with t2m.ckpt and ssrn.ckpt");
  sy_cmd->add_option("--generator", sy.generator, "Generator checkpoint (melgan)");
  sy_cmd->add_option("--max-frames", sy.max_frames, "Decoder frame limit")->check(CLI::PositiveNumber);
  sy_cmd->add_option("--gl-iters", sy.gl_iters, "Griffin-Lim iterations")->check(CLI::PositiveNumber);

  Common eo_common;
  fs::path eo_ref, eo_est;
  auto* eo_cmd = app.add_subcommand("eval-objective", "Spectral convergence and log-magnitude distance");
  eo_common.attach(eo_cmd);
  eo_cmd->add_option("--ref", eo_ref, "Reference WAV")->required()->check(CLI::ExistingFile);
  eo_cmd->add_option("--est", eo_est, "Estimate WAV")->required()->check(CLI::ExistingFile);

  fs::path ms_log, ms_out;
  std::string ms_format = "csv";
  int ms_decimals = 2;
  auto* ms_cmd = app.add_subcommand("mos-stats", "Per-method MOS table from a rating log");
  ms_cmd->add_option("--log", ms_log, "ratings.jsonl")->required()->check(CLI::ExistingFile);
  ms_cmd->add_option("--format", ms_format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  ms_cmd->add_option("--out", ms_out, "Output file (default stdout)");
  ms_cmd->add_option("--decimals", ms_decimals, "Rounding; negative = full precision");

  std::optional<fs::path> mv_config;
  std::optional<int> mv_port;
  auto* mv_cmd = app.add_subcommand("mos-serve", "Run the listening-test service");
  mv_cmd->add_option("--config", mv_config, "Server config JSON")->check(CLI::ExistingFile);
  mv_cmd->add_option("--port", mv_port, "Port (0 = any free port)")->check(CLI::Range(0, 65535));

  int gc_seeds = 20;
  std::string gc_filter;
  double gc_tol = gradcheck::kTolerance;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of every differentiable op");
  gc_cmd->add_option("--seeds", gc_seeds, "Seeds per op")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--filter", gc_filter, "Only ops whose name contains this");
  gc_cmd->add_option("--tolerance", gc_tol, "Max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::kExitOk : cli::kExitUsage;
  }
  spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*cs_cmd) return corpus_synth(cs);
    if (*st_cmd) return corpus_stats_cmd(st_common, st_manifest);
    if (*pp_cmd) return preprocess(pp_common, pp_manifest, pp_out);
    if (*tr_cmd) return train_cmd(tr);
    if (*tc_cmd) return train_corrector(tc_common, tc_manifest, tc_out, tc_steps);
    if (*sy_cmd) return synth(sy);
    if (*eo_cmd) return eval_objective(eo_common, eo_ref, eo_est);
    if (*ms_cmd) return mos_stats_cmd(ms_log, ms_format, ms_out, ms_decimals);
    if (*mv_cmd) return mos_serve(mv_config, mv_port);
    if (*gc_cmd) return grad_check(gc_seeds, gc_filter, gc_tol);
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return cli::kExitUsage;
  } catch (const annotation::ManifestError& e) {
    spdlog::error("{}", e.what());
    return cli::kExitUsage;
  } catch (const mos::ConfigError& e) {
    spdlog::error("{}", e.what());
    return cli::kExitUsage;
  } catch (const train::CheckpointError& e) {
    spdlog::error("{}", e.what());
    return e.code() == train::CheckpointError::Code::fingerprint ? cli::kExitUsage : cli::kExitRuntime;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return cli::kExitRuntime;
  }
  return cli::kExitUsage;
}
