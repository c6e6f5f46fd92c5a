#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "laughsynth/random.hpp"
#include "laughsynth/annotation/synthetic.hpp"
#include "laughsynth/train/feature_cache.hpp"
#include "laughsynth/train/trainer.hpp"
#include "support/temp_dir.hpp"

using namespace laughsynth;
using namespace laughsynth::train;
using laughsynth::testing::TempDir;
using annotation::Style;

namespace {

text2mel::Text2MelConfig tiny_t2m() {
  text2mel::Text2MelConfig c;
  c.n_symbols = 11;
  c.n_mels = 8;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  return c;
}

text2mel::SsrnConfig tiny_ssrn() {
  text2mel::SsrnConfig c;
  c.n_mels = 8;
  c.n_bins = 9;
  c.channels = 8;
  return c;
}

// Feature-shaped toy examples; a smooth ramp keeps targets learnable.
Example toy(std::uint64_t seed, Style style) {
  Rng rng(seed);
  Example e;
  e.id = "toy" + std::to_string(seed);
  e.style = style;
  const int n = static_cast<int>(rng.range(3, 7));
  for (int i = 0; i < n - 1; ++i) e.ids.push_back(static_cast<int>(rng.range(2, 10)));
  e.ids.push_back(1);
  const int frames = static_cast<int>(rng.range(4, 10));
  e.mel.resize(8, frames);
  for (int t = 0; t < frames; ++t)
    for (int k = 0; k < 8; ++k) e.mel(k, t) = 0.1f + 0.8f * static_cast<float>((k + t) % 8) / 8.0f;
  e.mag = Eigen::MatrixXf::Constant(9, frames * 4, 0.3f);
  return e;
}

std::vector<Example> corpus(std::initializer_list<Style> styles, std::uint64_t seed = 1) {
  std::vector<Example> v;
  for (Style s : styles) v.push_back(toy(seed++, s));
  return v;
}

std::vector<unsigned char> bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TrainConfig quick(int steps, std::uint64_t seed = 1) {
  TrainConfig c;
  c.max_steps = steps;
  c.batch_size = 2;
  c.seed = seed;
  c.log_every = 1;
  return c;
}

}  // namespace

TEST_CASE("learning rate defaults and decay") {
  TrainConfig c;
  CHECK(c.base_lr() == doctest::Approx(2e-4));
  c.stage = Stage::finetune;
  CHECK(c.base_lr() == doctest::Approx(4e-5));
  c.lr = 1e-3;
  CHECK(c.base_lr() == 1e-3);
  c.lr_decay = 0.5;
  c.decay_every = 10;
  CHECK(c.lr_at(1) == doctest::Approx(1e-3));
  CHECK(c.lr_at(10) == doctest::Approx(1e-3));
  CHECK(c.lr_at(11) == doctest::Approx(5e-4));
  CHECK(c.lr_at(25) == doctest::Approx(2.5e-4));
}

TEST_CASE("RunLog is append-only with increasing steps") {
  RunLog log(RunLog::Header{{"seed", "3"}});
  log.append({1, {{"x", 1.0}}, 0.1});
  log.append({5, {{"x", 0.5}}, 0.2});
  CHECK_THROWS_AS(log.append({5, {}, 0.3}), TrainingError);
  CHECK_THROWS_AS(log.append({2, {}, 0.3}), TrainingError);
  CHECK(log.records().size() == 2);

  RunLog other(RunLog::Header{{"seed", "3"}});
  other.append({1, {{"x", 1.0}}, 9.0});
  other.append({5, {{"x", 0.5}}, 9.5});
  CHECK(log.same_trajectory(other));
  RunLog different(RunLog::Header{{"seed", "4"}});
  different.append({1, {{"x", 1.0}}, 0.1});
  different.append({5, {{"x", 0.5}}, 0.2});
  CHECK_FALSE(log.same_trajectory(different));

  std::istringstream lines(log.to_jsonl());
  std::string first;
  std::getline(lines, first);
  const auto header = nlohmann::json::parse(first);
  CHECK(header["record"] == "header");
  CHECK(header["seed"] == "3");
}

TEST_CASE("max_steps=1 writes a step-1 checkpoint with a one-entry chain") {
  TempDir dir;
  TrainConfig cfg = quick(1);
  cfg.out_dir = dir.path();
  pretrain(corpus({Style::speech, Style::laugh}), tiny_t2m(), tiny_ssrn(), {5, 6}, cfg);
  const Checkpoint t = load_checkpoint(dir / "t2m.ckpt", ModelKind::t2m);
  const Checkpoint s = load_checkpoint(dir / "ssrn.ckpt", ModelKind::ssrn);
  CHECK(t.step == 1);
  CHECK(t.provenance.size() == 1);
  CHECK(s.provenance.size() == 1);
  CHECK(t.symbol_fingerprint == 5);
  CHECK(t.dsp_fingerprint == 6);

  // seed echoed in the on-disk log
  std::ifstream in(dir / "runlog.jsonl");
  std::string line;
  std::getline(in, line);
  CHECK(nlohmann::json::parse(line)["seed"] == "1");
  int records = 0;
  while (std::getline(in, line)) ++records;
  CHECK(records == 1);
}

TEST_CASE("invalid configs are rejected") {
  const auto data = corpus({Style::speech});
  TrainState s = init_state(tiny_t2m(), tiny_ssrn(), 1, {});
  CHECK_THROWS_AS(laughsynth::train::train(s, data, quick(0)), TrainingError);
  TrainConfig bad = quick(1);
  bad.batch_size = 0;
  CHECK_THROWS_AS(laughsynth::train::train(s, data, bad), TrainingError);
  CHECK_THROWS_AS(laughsynth::train::train(s, {}, quick(1)), TrainingError);
  TrainConfig ft = quick(1);
  ft.stage = Stage::finetune;
  CHECK_THROWS_AS(pretrain(data, tiny_t2m(), tiny_ssrn(), {}, ft), TrainingError);
}

TEST_CASE("same config twice gives byte-identical checkpoints") {
  TempDir a, b;
  const auto data = corpus({Style::speech, Style::laugh, Style::smiled_speech});
  TrainConfig cfg = quick(6, 4);
  cfg.out_dir = a.path();
  RunLog la, lb;
  pretrain(data, tiny_t2m(), tiny_ssrn(), {}, cfg, &la);
  cfg.out_dir = b.path();
  pretrain(data, tiny_t2m(), tiny_ssrn(), {}, cfg, &lb);
  CHECK(bytes_of(a / "t2m.ckpt") == bytes_of(b / "t2m.ckpt"));
  CHECK(bytes_of(a / "ssrn.ckpt") == bytes_of(b / "ssrn.ckpt"));
  CHECK(la.same_trajectory(lb));

  cfg.seed = 5;
  TempDir c;
  cfg.out_dir = c.path();
  pretrain(data, tiny_t2m(), tiny_ssrn(), {}, cfg);
  CHECK(bytes_of(a / "t2m.ckpt") != bytes_of(c / "t2m.ckpt"));
}

TEST_CASE("loss components are finite at every logged step and the loss falls") {
  const auto data = corpus({Style::speech, Style::laugh, Style::smiled_speech, Style::speech});
  TrainConfig cfg = quick(60, 2);
  cfg.lr = 2e-3;
  RunLog log;
  pretrain(data, tiny_t2m(), tiny_ssrn(), {}, cfg, &log);
  REQUIRE(log.records().size() == 60);
  for (const auto& r : log.records())
    for (const auto& [k, v] : r.values) CHECK(std::isfinite(v));
  CHECK(log.records().back().values.at("t2m_total") < log.records().front().values.at("t2m_total"));
  CHECK(log.records().back().values.at("ssrn_total") < log.records().front().values.at("ssrn_total"));
}

TEST_CASE("checkpoint cadence") {
  TempDir dir;
  TrainConfig cfg = quick(5);
  cfg.out_dir = dir.path();
  cfg.checkpoint_every = 2;
  std::vector<std::uint64_t> seen;
  TrainState s = init_state(tiny_t2m(), tiny_ssrn(), 1, {});
  laughsynth::train::train(s, corpus({Style::laugh, Style::speech}), cfg, [&](const TrainState&, const RunLogRecord& r) {
    if (r.step == 3) seen.push_back(load_checkpoint(dir / "t2m.ckpt").step);
  });
  REQUIRE(seen.size() == 1);
  CHECK(seen[0] == 2);
  CHECK(load_checkpoint(dir / "t2m.ckpt").step == 5);
}

TEST_CASE("NaN loss aborts and keeps the last good checkpoint") {
  TempDir dir;
  TrainConfig cfg = quick(2);
  cfg.out_dir = dir.path();
  TrainState s = init_state(tiny_t2m(), tiny_ssrn(), 1, {});
  laughsynth::train::train(s, corpus({Style::laugh, Style::speech}), cfg);
  const auto good = bytes_of(dir / "t2m.ckpt");

  auto poisoned = corpus({Style::laugh, Style::speech});
  poisoned[0].mel(0, 0) = std::nanf("");
  poisoned[1].mel(0, 0) = std::nanf("");
  cfg.max_steps = 3;
  try {
    laughsynth::train::train(s, poisoned, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 3);
  }
  CHECK(bytes_of(dir / "t2m.ckpt") == good);
  CHECK(load_checkpoint(dir / "t2m.ckpt").step == 2);
}

TEST_CASE("finetune: chain grows to 2, default lr, plain speech refused") {
  const auto pre = corpus({Style::speech, Style::laugh, Style::smiled_speech});
  RunLog plog;
  const TrainState base = pretrain(pre, tiny_t2m(), tiny_ssrn(), {}, quick(3), &plog);

  TrainConfig ft = quick(3);
  ft.stage = Stage::finetune;
  RunLog flog;
  const auto target = corpus({Style::laugh, Style::smiled_speech, Style::speech_laugh}, 40);
  const TrainState tuned = finetune(base, target, ft, &flog);
  CHECK(tuned.t2m_provenance.size() == 2);
  CHECK(tuned.ssrn_provenance.size() == 2);
  CHECK(extends(tuned.t2m_checkpoint(), base.t2m_checkpoint()));
  CHECK(extends(tuned.ssrn_checkpoint(), base.ssrn_checkpoint()));
  CHECK(flog.header().at("lr") == "4e-05");
  CHECK(flog.header().at("stage") == "finetune");

  auto mixed = target;
  mixed.push_back(toy(99, Style::speech));
  try {
    finetune(base, mixed, ft);
    FAIL("expected style error");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("toy99") != std::string::npos);
  }
}

TEST_CASE("frozen ssrn is left untouched by fine-tuning") {
  const TrainState base = init_state(tiny_t2m(), tiny_ssrn(), 3, {});
  TrainConfig ft = quick(2);
  ft.stage = Stage::finetune;
  ft.train_ssrn = false;
  const TrainState tuned = finetune(base, corpus({Style::laugh}), ft);
  for (const auto& p : base.ssrn.params())
    CHECK((tuned.ssrn.params().find(p.name)->value.array() == p.value.array()).all());
  CHECK_FALSE((tuned.t2m.params().find("dec.out.w")->value.array() ==
               base.t2m.params().find("dec.out.w")->value.array())
                  .all());
}

TEST_CASE("load_state checks fingerprints") {
  TempDir dir;
  const TrainState s = init_state(tiny_t2m(), tiny_ssrn(), 1, {10, 20});
  save_state(s, dir.path());
  const TrainState r = load_state(dir / "t2m.ckpt", dir / "ssrn.ckpt", {10, 20}, false);
  CHECK(r.t2m_provenance == s.t2m_provenance);
  CHECK(weights_hash(r.t2m.params()) == weights_hash(s.t2m.params()));
  CHECK_THROWS_AS(load_state(dir / "t2m.ckpt", dir / "ssrn.ckpt", {11, 20}, false), CheckpointError);
  const TrainState o = load_state(dir / "t2m.ckpt", dir / "ssrn.ckpt", {11, 20}, true);
  CHECK(o.fingerprints.symbols == 11);
  CHECK_THROWS_AS(load_state(dir / "ssrn.ckpt", dir / "t2m.ckpt", {10, 20}, false), CheckpointError);
}

TEST_CASE("evaluate does not change the models") {
  const TrainState s = init_state(tiny_t2m(), tiny_ssrn(), 2, {});
  const auto before = weights_hash(s.t2m.params());
  const auto data = corpus({Style::laugh, Style::speech});
  const EvalLoss a = evaluate(s, data);
  const EvalLoss b = evaluate(s, data);
  CHECK(a.t2m == b.t2m);
  CHECK(a.ssrn > 0.0);
  CHECK(a.t2m_l1 > 0.0);
  CHECK(weights_hash(s.t2m.params()) == before);
  CHECK_THROWS_AS(evaluate(s, {}), TrainingError);
}

TEST_CASE("overfit_single: steps=0 logs only the initial loss; fixed seed repeats") {
  const Example ex = toy(7, Style::laugh);
  const OverfitReport zero = overfit_single(ex, tiny_t2m(), tiny_ssrn(), {.steps = 0, .lr = 2e-4, .seed = 1, .log_every = 1});
  REQUIRE(zero.log.records().size() == 1);
  CHECK(zero.log.records()[0].step == 0);
  CHECK(zero.t2m_l1 == zero.log.records()[0].values.at("t2m_l1"));

  const OverfitOptions opt{.steps = 8, .lr = 1e-3, .seed = 2, .log_every = 3};
  const OverfitReport a = overfit_single(ex, tiny_t2m(), tiny_ssrn(), opt);
  const OverfitReport b = overfit_single(ex, tiny_t2m(), tiny_ssrn(), opt);
  CHECK(a.log.same_trajectory(b.log));
  std::vector<std::uint64_t> steps;
  for (const auto& r : a.log.records()) steps.push_back(r.step);
  CHECK(steps == std::vector<std::uint64_t>{0, 3, 6, 8});
  CHECK(a.t2m_l1 < zero.t2m_l1);
  CHECK(a.synthesized_diagonality >= 0.0);
  CHECK(a.synthesized_diagonality <= 1.0);
}

TEST_CASE("feature cache: hit, stale on dsp change, stale on audio change") {
  TempDir dir;
  dsp::DspConfig cfg;
  annotation::SyntheticCorpusOptions opt{.out_dir = dir / "corpus"};
  const auto m = annotation::generate_synthetic_corpus(3, 3, cfg, opt);
  const auto table = annotation::SymbolTable::standard();
  const auto cache = dir / "cache";

  CacheReport r;
  const auto first = build_dataset_cached(m, table, cfg, cache, &r);
  CHECK(r.computed == 3);
  CHECK(r.cached == 0);
  const auto plain = build_dataset(m, table, cfg);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(first[i].mel.isApprox(plain[i].mel));
    CHECK(first[i].ids == plain[i].ids);
  }

  const auto again = build_dataset_cached(m, table, cfg, cache, &r);
  CHECK(r.cached == 3);
  CHECK(r.computed == 0);
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].mel == first[i].mel);
    CHECK(again[i].mag == first[i].mag);
  }

  dsp::DspConfig other = cfg;
  other.n_mels = 40;
  const auto redone = build_dataset_cached(m, table, other, cache, &r);
  CHECK(r.computed == 3);
  CHECK(r.stale == 3);
  CHECK(redone[0].mel.rows() == 40);

  // rewrite one file with different audio
  const auto victim = m.audio_path(m.utterances[1]);
  auto w = dsp::load_wav(victim);
  w.samples *= 0.5;
  dsp::write_wav(victim, w);
  build_dataset_cached(m, table, other, cache, &r);
  CHECK(r.cached == 2);
  CHECK(r.stale == 1);
}

TEST_CASE("feature cache: truncated entry is ignored") {
  TempDir dir;
  CachedFeatures f{1, 2, Eigen::MatrixXf::Ones(2, 3), Eigen::MatrixXf::Zero(4, 5)};
  save_features(dir / "a.feat", f);
  const auto back = load_features(dir / "a.feat");
  REQUIRE(back);
  CHECK(back->mel == f.mel);
  CHECK(back->mag == f.mag);
  std::filesystem::resize_file(dir / "a.feat", std::filesystem::file_size(dir / "a.feat") - 3);
  CHECK_FALSE(load_features(dir / "a.feat"));
  CHECK_FALSE(load_features(dir / "missing.feat"));
}
