// Acceptance gate. Prints one PASS/FAIL line per criterion; exits 1 if any
// selected criterion fails. Usage: laughsynth_acceptance [name...]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "laughsynth/annotation/synthetic.hpp"
#include "laughsynth/dsp/griffin_lim.hpp"
#include "laughsynth/dsp/stft.hpp"
#include "laughsynth/eval/ratings.hpp"
#include "laughsynth/eval/stats.hpp"
#include "laughsynth/gradcheck/catalog.hpp"
#include "laughsynth/mos/http.hpp"
#include "laughsynth/train/trainer.hpp"
#include "laughsynth/vocoder/vocoder.hpp"
#include "support/signals.hpp"
#include "support/temp_dir.hpp"
#include <httplib.h>  // after Eigen: <resolv.h> defines _res

using namespace laughsynth;
using laughsynth::testing::TempDir;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Accumulates sub-check failures so the one-line verdict can name them.
struct Checks {
  std::vector<std::string> failed;
  void operator()(bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  }
  Outcome verdict(const std::string& summary) const {
    if (failed.empty()) return {true, summary};
    std::string s = summary + "; failed:";
    for (std::size_t i = 0; i < failed.size() && i < 4; ++i) s += " [" + failed[i] + "]";
    if (failed.size() > 4) s += fmt::format(" (+{} more)", failed.size() - 4);
    return {false, s};
  }
};

// ---------------------------------------------------------------- gradients

Outcome gradients() {
  const auto t0 = Clock::now();
  const auto reports = gradcheck::run_catalog(20);
  const double secs = since(t0);
  Checks check;
  double worst = 0;
  std::string worst_op;
  std::set<std::string> names;
  for (const auto& r : reports) {
    names.insert(r.name);
    check(r.seeds == 20, r.name + " seeds");
    check(r.worst < 1e-4, fmt::format("{} {:.2e}", r.name, r.worst));
    if (r.worst >= worst) worst = r.worst, worst_op = r.name;
  }
  for (const char* required : {"conv1d", "conv1d causal", "transposed_conv1d", "highway_block", "scaled_dot_attention",
                               "l1_loss", "binary_divergence", "guided_attention_loss", "residual_unit",
                               "upsample_stage"})
    check(names.count(required) == 1, std::string("missing op ") + required);
  check(secs < 120.0, fmt::format("runtime {:.1f} s", secs));
  return check.verdict(fmt::format("{} ops x 20 seeds, worst {:.2e} ({}), {:.1f} s", reports.size(), worst, worst_op,
                                   secs));
}

// ---------------------------------------------------------------------- dsp

Outcome dsp_round_trip() {
  const auto t0 = Clock::now();
  dsp::DspConfig cfg;
  Checks check;
  Rng rng(2024);
  double min_snr = 1e9;
  for (int i = 0; i < 20; ++i) {
    const auto n = static_cast<Eigen::Index>(rng.range(4 * cfg.n_fft, 40 * cfg.n_fft));
    Eigen::VectorXd x;
    switch (i % 3) {
      case 0: x = testing::white_noise(n, 100 + i); break;
      case 1: x = testing::laugh_like(n, cfg.sample_rate, 100 + i); break;
      default:
        x = testing::sine(n, rng.uniform(60.0, 8000.0), cfg.sample_rate, rng.uniform(0.05, 1.0)) +
            testing::white_noise(n, 100 + i, 0.01);
    }
    const Eigen::VectorXd y = dsp::istft(dsp::stft(x, cfg), cfg, n);
    const Eigen::Index edge = cfg.n_fft;
    const double snr = testing::snr_db(x.segment(edge, n - 2 * edge), y.segment(edge, n - 2 * edge));
    min_snr = std::min(min_snr, snr);
    check(snr > 30.0, fmt::format("signal {} snr {:.1f} dB", i, snr));
  }

  // Consistent spectrograms: magnitudes of generated laughter. The 0.15 bound
  // is gated on these only. Stationary tones stall well above it with plain GL,
  // so they are run for the monotonicity check and reported.
  auto run_gl = [&](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd mag = dsp::stft(x, cfg).magnitude();
    const auto r = dsp::griffin_lim(mag, 60, cfg, {.random_phase_seed = std::nullopt, .length = x.size()});
    const auto& sc = r.spectral_convergence;
    double rise = 0;
    for (std::size_t k = 1; k < sc.size(); ++k) rise = std::max(rise, sc[k] - sc[k - 1]);
    check(sc.size() == 61, "history length");
    check(sc.back() < sc.front(), "final SC not below initial");
    return std::pair{sc.back(), rise};
  };
  double worst_final = 0, worst_rise = 0, worst_tone = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto [fin, rise] = run_gl(testing::laugh_like(cfg.sample_rate, cfg.sample_rate, seed));
    worst_final = std::max(worst_final, fin);
    worst_rise = std::max(worst_rise, rise);
    check(fin < 0.15, fmt::format("GL laugh seed {} final SC {:.3f}", seed, fin));
  }
  for (int k = 1; k <= 3; ++k) {
    const auto [fin, rise] = run_gl(testing::sine(cfg.sample_rate, 110.0 * k, cfg.sample_rate, 0.5));
    worst_tone = std::max(worst_tone, fin);
    worst_rise = std::max(worst_rise, rise);
  }
  check(worst_rise <= 1e-6, fmt::format("SC rose by {:.2e}", worst_rise));
  const double secs = since(t0);
  check(secs < 60.0, fmt::format("runtime {:.1f} s", secs));
  return check.verdict(fmt::format("min interior SNR {:.1f} dB over 20 signals; GL final SC <= {:.3f} on 10 laughs "
                                   "(tones, ungated: {:.3f}), max rise {:.1e}; {:.1f} s",
                                   min_snr, worst_final, worst_tone, worst_rise, secs));
}

// ------------------------------------------------------------------ overfit

Outcome overfit() {
  const auto t0 = Clock::now();
  dsp::DspConfig cfg;
  const auto table = annotation::SymbolTable::standard();
  const annotation::Utterance u{"overfit", annotation::Style::laugh, annotation::VowelContext::a, "spkB",
                                "overfit.wav", {"LV", "LU", "LV", "LV", "LU", "LV"}};
  const auto ex = train::make_example(u, annotation::render_utterance(u, 1, cfg), table, cfg);
  text2mel::Text2MelConfig tc;
  tc.n_symbols = static_cast<int>(table.size());
  const auto rep = train::overfit_single(ex, tc, {}, {.steps = 1500, .lr = 2e-4, .seed = 1, .log_every = 250});
  const double secs = since(t0);
  Checks check;
  check(rep.t2m_l1 < 0.02, fmt::format("L1 {:.4f}", rep.t2m_l1));
  check(rep.diagonality > 0.6, fmt::format("diagonality {:.3f}", rep.diagonality));
  check(rep.ssrn_l1 < 0.03, fmt::format("SSRN L1 {:.4f}", rep.ssrn_l1));
  check(secs < 600.0, fmt::format("runtime {:.0f} s", secs));
  return check.verdict(fmt::format("1500 steps, {} mel frames: L1 {:.4f}, diagonality {:.3f}, SSRN L1 {:.4f}, {:.0f} s",
                                   ex.mel.cols(), rep.t2m_l1, rep.diagonality, rep.ssrn_l1, secs));
}

// ----------------------------------------------------------------- transfer

Outcome transfer() {
  const auto t0 = Clock::now();
  TempDir dir;
  dsp::DspConfig cfg;
  const auto table = annotation::SymbolTable::standard();
  annotation::SyntheticCorpusOptions po;
  po.out_dir = dir / "pretrain";
  const auto pm = annotation::generate_synthetic_corpus(7, 40, cfg, po);
  annotation::SyntheticCorpusOptions to;
  to.out_dir = dir / "target";
  to.id_prefix = "tgt";
  to.styles = {annotation::Style::laugh, annotation::Style::smiled_speech};
  const auto tm = annotation::generate_synthetic_corpus(8, 10, cfg, to);
  const auto pre = train::build_dataset(pm, table, cfg);
  const auto tgt = train::build_dataset(tm, table, cfg);
  text2mel::Text2MelConfig tc;
  tc.n_symbols = static_cast<int>(table.size());
  const text2mel::SsrnConfig sc;

  int wins = 0;
  std::string pairs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // SSRN plays no part in the compared loss
    train::TrainConfig pc;
    pc.max_steps = 1000;
    pc.seed = seed;
    pc.train_ssrn = false;
    const auto base = train::pretrain(pre, tc, sc, {}, pc);

    train::TrainConfig fc = pc;
    fc.stage = train::Stage::finetune;
    fc.max_steps = 500;
    fc.lr = train::kPretrainLr;
    const auto ft = train::finetune(base, tgt, fc);

    auto scratch = train::init_state(tc, sc, seed, {});
    train::TrainConfig scc = pc;
    scc.max_steps = 500;
    train::train(scratch, tgt, scc);

    const double a = train::evaluate(ft, tgt, false).t2m;
    const double b = train::evaluate(scratch, tgt, false).t2m;
    wins += a <= b;
    pairs += fmt::format("{}{:.4f}/{:.4f}", pairs.empty() ? "" : " ", a, b);
  }
  const double secs = since(t0);
  Checks check;
  check(wins >= 4, fmt::format("{}/5 wins", wins));
  check(secs < 1800.0, fmt::format("runtime {:.0f} s", secs));
  return check.verdict(fmt::format("fine-tuned <= scratch in {}/5 seeds (ft/scratch: {}), {:.0f} s", wins, pairs, secs));
}

// ---------------------------------------------------------------- corrector

double rms(const Eigen::VectorXd& x) { return x.size() ? std::sqrt(x.squaredNorm() / static_cast<double>(x.size())) : 0.0; }

Outcome corrector() {
  const auto t0 = Clock::now();
  dsp::DspConfig cfg;
  Checks check;

  // Length is fixed by the strides; narrow channels keep 200 runs cheap.
  vocoder::GeneratorConfig narrow;
  narrow.channels = 16;
  const vocoder::Generator g(narrow, 1);
  const int hop = narrow.hop();
  check(hop == cfg.hop_length, "hop");
  Rng rng(5);
  int bad_len = 0;
  for (int frames = 1; frames <= 200; ++frames) {
    Eigen::MatrixXd mel(narrow.n_mels, frames);
    for (Eigen::Index i = 0; i < mel.size(); ++i) mel.data()[i] = rng.uniform();
    bad_len += g.generate(mel).size() != static_cast<Eigen::Index>(hop) * frames;
  }
  check(bad_len == 0, fmt::format("{} frame counts with wrong length", bad_len));

  const vocoder::Generator full(vocoder::GeneratorConfig{}, 2);
  double worst_rms = 0;
  Eigen::Index worst_len = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const annotation::Utterance u{"c", seed % 2 ? annotation::Style::laugh : annotation::Style::speech,
                                  seed % 2 ? std::optional(annotation::VowelContext::e) : std::nullopt,
                                  "spkB", "c.wav",
                                  seed % 2 ? std::vector<std::string>{"LV", "LU"} : std::vector<std::string>{"hh", "ae", "t"}};
    const auto w = annotation::render_utterance(u, seed, cfg);
    const auto c = vocoder::correct_waveform(w, full, cfg);
    worst_len = std::max(worst_len, std::abs(c.samples.size() - w.samples.size()));
    worst_rms = std::max(worst_rms, std::abs(rms(c.samples) / rms(w.samples) - 1.0));
  }
  check(worst_len <= hop, fmt::format("duration off by {} samples", worst_len));
  check(worst_rms <= 0.05, fmt::format("RMS off by {:.1f}%", 100 * worst_rms));

  const annotation::Utterance fx{"fixture", annotation::Style::laugh, annotation::VowelContext::a, "spkB", "f.wav",
                                 {"LV", "LU", "LV"}};
  auto w = annotation::render_utterance(fx, 1, cfg);
  w.samples.conservativeResize(std::min<Eigen::Index>(w.samples.size(), cfg.sample_rate / 2));
  vocoder::ToyTrainOptions opt;
  opt.steps = 2000;
  opt.log_every = 500;
  const auto r = vocoder::train_corrector_toy({vocoder::make_corrector_pair(w, cfg)}, {}, opt);
  const double ratio = r.final_loss / r.initial_loss;
  check(ratio <= 0.5, fmt::format("loss ratio {:.3f}", ratio));

  const double secs = since(t0);
  return check.verdict(fmt::format("lengths exact for 1..200 frames; correction within {} samples, RMS within {:.2f}%; "
                                   "toy loss {:.3f} -> {:.3f} (x{:.3f}) in 2000 steps; {:.0f} s",
                                   worst_len, 100 * worst_rms, r.initial_loss, r.final_loss, ratio, secs));
}

// ---------------------------------------------------------------- mos stats

// Independent oracle: integer sums and cumulative counts only.
struct OracleStats {
  long n = 0;
  double mean = 0, std = 0, median = 0, q1 = 0, q3 = 0;
};

OracleStats oracle(const std::vector<eval::RatingRecord>& rs, eval::Method m) {
  std::array<long, 6> count{};
  for (const auto& r : rs)
    if (r.method == m) ++count[static_cast<std::size_t>(r.score)];
  OracleStats o;
  long sum = 0;
  for (int s = 1; s <= 5; ++s) {
    o.n += count[static_cast<std::size_t>(s)];
    sum += s * count[static_cast<std::size_t>(s)];
  }
  o.mean = static_cast<double>(sum) / static_cast<double>(o.n);
  // n·Σ(x − mean)² = n·Σx² − (Σx)², exact in integers
  long sq = 0;
  for (int s = 1; s <= 5; ++s) sq += static_cast<long>(s) * s * count[static_cast<std::size_t>(s)];
  o.std = o.n > 1 ? std::sqrt(static_cast<double>(o.n * sq - sum * sum) / static_cast<double>(o.n * (o.n - 1))) : 0.0;
  auto at = [&](long k) {  // k-th order statistic, 0-based
    long seen = 0;
    for (int s = 1; s <= 5; ++s) {
      seen += count[static_cast<std::size_t>(s)];
      if (k < seen) return static_cast<double>(s);
    }
    return 5.0;
  };
  auto q = [&](double p) {
    const double h = (static_cast<double>(o.n) - 1) * p;
    const long lo = static_cast<long>(std::floor(h));
    const long hi = std::min(lo + 1, o.n - 1);
    return at(lo) + (h - static_cast<double>(lo)) * (at(hi) - at(lo));
  };
  o.median = q(0.5);
  o.q1 = q(0.25);
  o.q3 = q(0.75);
  return o;
}

Outcome mos_statistics() {
  using eval::Method;
  struct Row {
    Method m;
    std::size_t n;
    double mean, std;
  };
  const Row table[] = {{Method::hmm, 407, 2.64, 1.02},
                       {Method::seq2seq_gl, 431, 2.50, 1.09},
                       {Method::seq2seq_melgan, 429, 3.28, 1.06},
                       {Method::original, 429, 4.10, 0.91}};
  TempDir dir;
  std::vector<eval::RatingRecord> records;
  {
    std::ofstream log(dir / "ratings.jsonl");
    for (const auto& r : table)
      for (const auto& rec : eval::synthesize_ratings(r.m, r.n, r.mean, r.std)) {
        log << eval::to_json_line(rec) << "\n";
        records.push_back(rec);
      }
  }
  const auto read = eval::read_rating_log(dir / "ratings.jsonl");
  const auto stats = eval::mos_stats(read);
  Checks check;
  check(read == records, "log round trip");
  std::size_t total = 0;
  double worst_oracle = 0;
  for (const auto& s : stats) {
    total += s.n_ratings;
    const Row& row = *std::find_if(std::begin(table), std::end(table), [&](const Row& r) { return r.m == s.method; });
    check(s.n_ratings == row.n, fmt::format("{} n {}", eval::to_string(s.method), s.n_ratings));
    check(std::round(s.mos * 100) / 100 == row.mean, fmt::format("{} mos {:.4f}", eval::to_string(s.method), s.mos));
    check(std::round(s.std * 100) / 100 == row.std, fmt::format("{} std {:.4f}", eval::to_string(s.method), s.std));
    const auto o = oracle(read, s.method);
    for (double d : {std::abs(s.mos - o.mean), std::abs(s.std - o.std), std::abs(s.median - o.median),
                     std::abs(s.q1 - o.q1), std::abs(s.q3 - o.q3)})
      worst_oracle = std::max(worst_oracle, d);
    check(static_cast<long>(s.n_ratings) == o.n, "oracle n");
  }
  check(stats.size() == 4, "four methods");
  check(total == 1696, fmt::format("total {}", total));
  check(worst_oracle <= 1e-12, fmt::format("oracle gap {:.2e}", worst_oracle));
  const double g1 = eval::mos_gain(stats, Method::seq2seq_melgan, Method::seq2seq_gl);
  const double g2 = eval::mos_gain(stats, Method::original, Method::hmm);
  check(g1 == 0.78, fmt::format("melgan - gl = {}", g1));
  check(g2 == 1.46, fmt::format("original - hmm = {}", g2));
  return check.verdict(fmt::format("total {}, gains {:.2f} and {:.2f}, oracle gap {:.1e}", total, g1, g2, worst_oracle));
}

// ------------------------------------------------------------- corpus stats

Outcome corpus_table() {
  TempDir dir;
  dsp::DspConfig cfg;
  struct Row {
    annotation::VowelContext ctx;
    int count;
    int long_count;  // 2 s samples; the rest last 1 s
  };
  const Row rows[] = {{annotation::VowelContext::a, 54, 47},
                      {annotation::VowelContext::e, 33, 30},
                      {annotation::VowelContext::i, 25, 13}};
  const dsp::Waveform one{Eigen::VectorXd::Zero(cfg.sample_rate), cfg.sample_rate};
  const dsp::Waveform two{Eigen::VectorXd::Zero(2 * cfg.sample_rate), cfg.sample_rate};
  dsp::write_wav(dir / "one.wav", one);
  dsp::write_wav(dir / "two.wav", two);
  annotation::Manifest m;
  for (const auto& r : rows)
    for (int k = 0; k < r.count; ++k) {
      const std::string id = fmt::format("{}{:02}", annotation::to_string(r.ctx), k);
      const auto file = id + ".wav";
      std::filesystem::copy_file(dir / (k < r.long_count ? "two.wav" : "one.wav"), dir / file);
      m.utterances.push_back({id, annotation::Style::laugh, r.ctx, "spkB", file, {"LV", "LU"}});
    }
  std::ofstream(dir / "manifest.tsv") << annotation::format_manifest(m);
  const auto loaded = annotation::load_manifest(dir / "manifest.tsv");
  const auto s = annotation::corpus_stats(loaded, annotation::durations_from_audio(loaded));
  using annotation::VowelContext;
  Checks check;
  const std::size_t counts[] = {54, 33, 25};
  const double secs[] = {101.0, 63.0, 38.0};
  for (const auto ctx : {VowelContext::a, VowelContext::e, VowelContext::i}) {
    const auto i = static_cast<std::size_t>(ctx);
    check(s.laugh_count_by_context.at(ctx) == counts[i], fmt::format("count {}", annotation::to_string(ctx)));
    check(s.laugh_seconds_by_context.at(ctx) == secs[i], fmt::format("seconds {}", annotation::to_string(ctx)));
  }
  check(s.laugh_count() == 112, "total count");
  check(s.laugh_seconds() == 202.0, "total seconds");
  return check.verdict(fmt::format("counts {}/{}/{} ({}), seconds {}/{}/{} ({}) from WAV headers",
                                   s.laugh_count_by_context.at(VowelContext::a),
                                   s.laugh_count_by_context.at(VowelContext::e),
                                   s.laugh_count_by_context.at(VowelContext::i), s.laugh_count(),
                                   s.laugh_seconds_by_context.at(VowelContext::a),
                                   s.laugh_seconds_by_context.at(VowelContext::e),
                                   s.laugh_seconds_by_context.at(VowelContext::i), s.laugh_seconds()));
}

// ---------------------------------------------------------- service protocol

void collect_strings(const nlohmann::json& j, std::string& out) {
  if (j.is_string()) out += j.get<std::string>() + "\n";
  if (j.is_object())
    for (const auto& [k, v] : j.items()) {
      out += k + "\n";
      collect_strings(v, out);
    }
  if (j.is_array())
    for (const auto& v : j) collect_strings(v, out);
}

Outcome service_protocol() {
  TempDir dir;
  Checks check;
  dsp::write_wav(dir / "a.wav", dsp::Waveform{Eigen::VectorXd::Zero(2205), 22050});
  mos::ServiceConfig cfg;
  for (int i = 0; i < 12; ++i) cfg.samples.push_back({fmt::format("s{:02}", i), eval::kMethods[i % 4], dir / "a.wav"});
  cfg.store_dir = dir / "store";
  cfg.server_seed = 11;

  // Unique permutation per session.
  const int n_sessions = 40;
  std::vector<std::string> tokens;
  std::set<std::vector<std::string>> orders;
  std::vector<eval::RatingRecord> before;
  mos::Results results_before;
  std::string leaked;
  {
    mos::MosService svc(cfg);
    mos::HttpServer http(svc, "admin");
    const int port = http.bind("127.0.0.1", 0);
    http.start();
    httplib::Client client("127.0.0.1", port);
    for (int s = 0; s < n_sessions; ++s) {
      auto res = client.Post("/api/session", R"j({"gender":"female","age_range":"[20,40)"})j", "application/json");
      if (!res || res->status != 201) {
        check(false, "session create");
        break;
      }
      const std::string token = nlohmann::json::parse(res->body)["token"];
      tokens.push_back(token);
      std::vector<std::string> order;
      for (int step = 0;; ++step) {
        auto nx = client.Get("/api/session/" + token + "/next");
        if (!nx || nx->status != 200) {
          check(false, "next");
          break;
        }
        const auto body = nlohmann::json::parse(nx->body);
        collect_strings(body, leaked);
        if (body["done"] == true) break;
        const std::string id = body["sample_id"];
        order.push_back(id);
        // the first half of the sessions stop early to test resumption
        if (s % 2 == 0 && step == 5) break;
        const auto rating = nlohmann::json{{"sample_id", id}, {"score", 1 + (s + step) % 5}}.dump();
        auto r1 = client.Post("/api/session/" + token + "/rating", rating, "application/json");
        auto r2 = client.Post("/api/session/" + token + "/rating", rating, "application/json");
        check(r1 && r1->status == 200 && nlohmann::json::parse(r1->body)["duplicate"] == false, "first submit");
        check(r2 && r2->status == 200 && nlohmann::json::parse(r2->body)["duplicate"] == true, "resubmit acked");
        auto audio = client.Get(body["audio_url"].get<std::string>());
        check(audio && audio->status == 200 && audio->get_header_value("Content-Type") == "audio/wav", "audio");
      }
      if (s % 2) {
        std::vector<std::string> sorted = order;
        std::sort(sorted.begin(), sorted.end());
        std::vector<std::string> all;
        for (const auto& smp : cfg.samples) all.push_back(smp.id);
        check(sorted == all, "order is a permutation of the sample set");
        orders.insert(order);
      }
    }
    check(svc.store().size() == static_cast<std::size_t>(n_sessions / 2 * 12 + n_sessions / 2 * 5),
          fmt::format("idempotent store size {}", svc.store().size()));
    before = svc.store().records();
    results_before = svc.results();
    http.stop();
  }
  check(orders.size() == static_cast<std::size_t>(n_sessions / 2), fmt::format("{} distinct orders", orders.size()));

  // Nothing a participant sees names a method.
  for (const char* label : {"hmm", "seq2seq", "melgan", "griffin", "original", "method", "-gl"})
    check(leaked.find(label) == std::string::npos, std::string("participant view mentions ") + label);

  // Restart: same records, same results, unfinished sessions resume.
  {
    mos::MosService svc(cfg);
    check(svc.session_count() == static_cast<std::size_t>(n_sessions), "sessions replayed");
    check(svc.store().records() == before, "ratings replayed");
    check(nlohmann::json(mos::results_json(svc.results())) == mos::results_json(results_before), "results unchanged");
    const auto a = svc.next_sample(tokens[0]);
    check(a && a->position == 5, "cursor resumed");
    const auto dup = svc.submit_rating(tokens[1], before.front().sample, 3);
    check(before.front().participant != tokens[1] || dup.duplicate, "duplicate after restart");
    check(svc.store().size() == before.size(), "no new record from a duplicate");
  }
  return check.verdict(fmt::format("{} sessions over HTTP, {} ratings, {} distinct full orders, restart replay intact",
                                   n_sessions, before.size(), orders.size()));
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradients", gradients},   {"dsp", dsp_round_trip},           {"overfit", overfit},
      {"transfer", transfer},     {"corrector", corrector},          {"mos-stats", mos_statistics},
      {"corpus-stats", corpus_table}, {"service-protocol", service_protocol}};

  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted)
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == w; })) {
      std::fprintf(stderr, "unknown criterion '%s'\n", w.c_str());
      return 2;
    }
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %-17s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
