#include <doctest.h>

#include <fstream>

#include "laughsynth/cli/config.hpp"
#include "support/temp_dir.hpp"

using namespace laughsynth;
using namespace laughsynth::cli;
using laughsynth::testing::TempDir;
using nlohmann::json;

TEST_CASE("global config: defaults validate and survive a json round trip") {
  GlobalConfig c;
  CHECK_NOTHROW(c.validate());
  const json j = config_to_json(c);
  const GlobalConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.dsp.fingerprint() == c.dsp.fingerprint());

  c.seed = 42;
  c.dsp.n_mels = 40;
  c.train.lr = 1e-3;
  c.model.generator_strides = {4, 4, 4, 4};
  c.paths.init = "/abs/init";
  const GlobalConfig back2 = config_from_json(config_to_json(c));
  CHECK(back2.seed == 42);
  CHECK(back2.train.seed == 42);
  CHECK(back2.dsp.n_mels == 40);
  CHECK(back2.train.lr == 1e-3);
  CHECK(back2.model.generator_strides == std::vector<int>{4, 4, 4, 4});
  CHECK(back2.paths.init == "/abs/init");
  CHECK_FALSE(config_from_json(config_to_json(GlobalConfig{})).train.lr.has_value());
}

TEST_CASE("global config: unknown keys are rejected at every level") {
  CHECK_THROWS_WITH_AS(config_from_json(json{{"sed", 1}}), "config: unknown key 'sed'", UsageError);
  CHECK_THROWS_WITH_AS(config_from_json(json{{"dsp", {{"n_mel", 40}}}}), "config: unknown key 'dsp.n_mel'", UsageError);
  CHECK_THROWS_AS(config_from_json(json{{"paths", {{"cache", "x"}}}}), UsageError);
  CHECK_THROWS_AS(config_from_json(json{{"train", {{"steps", 3}}}}), UsageError);
}

TEST_CASE("global config: wrong types are rejected") {
  CHECK_THROWS_AS(config_from_json(json{{"dsp", {{"n_mels", "80"}}}}), UsageError);
  CHECK_THROWS_AS(config_from_json(json{{"dsp", {{"n_mels", 80.5}}}}), UsageError);
  CHECK_THROWS_AS(config_from_json(json{{"dsp", {{"center", 1}}}}), UsageError);
  CHECK_THROWS_AS(config_from_json(json{{"seed", -1}}), UsageError);
  CHECK_THROWS_AS(config_from_json(json{{"model", {{"generator_strides", {8, "8"}}}}}), UsageError);
  CHECK_THROWS_AS(config_from_json(json{{"dsp", 3}}), UsageError);
  CHECK_THROWS_AS(config_from_json(json::array()), UsageError);
  // floats are fine where a number is expected
  CHECK(config_from_json(json{{"dsp", {{"fmin", 50}}}}).dsp.fmin == 50.0);
}

TEST_CASE("global config: validation catches inconsistent settings") {
  GlobalConfig c;
  c.dsp.hop_length = 200;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.model.generator_strides = {5, 5, 8};
  CHECK_NOTHROW(c.validate());
  c.dsp.n_mels = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);

  GlobalConfig d;
  d.train.lr = 0.0;
  CHECK_THROWS_AS(d.validate(), UsageError);
  d.train.lr.reset();
  d.train.batch_size = 0;
  CHECK_THROWS_AS(d.validate(), UsageError);
}

TEST_CASE("global config: derived model configs follow the dsp block") {
  GlobalConfig c;
  c.dsp.n_mels = 40;
  c.dsp.n_fft = 512;
  c.dsp.win_length = 512;
  c.model.hidden_dim = 32;
  const auto t = c.t2m_config(51);
  CHECK(t.n_symbols == 51);
  CHECK(t.n_mels == 40);
  CHECK(t.hidden_dim == 32);
  CHECK(t.reduction_factor == c.dsp.reduction_factor);
  CHECK(c.ssrn_config().n_bins == 257);
  CHECK(c.ssrn_config().n_mels == 40);
  CHECK(c.generator_config().n_mels == 40);
  CHECK(c.generator_config().hop() == c.dsp.hop_length);
}

TEST_CASE("overrides: dotted keys, JSON values, bare strings") {
  json j = {{"dsp", {{"n_mels", 80}}}};
  apply_overrides(j, {"dsp.n_mels=40", "seed=7", "paths.manifest=corpus/manifest.tsv", "train.lr=null",
                      "model.generator_strides=[4,4,4,4]"});
  CHECK(j["dsp"]["n_mels"] == 40);
  CHECK(j["seed"] == 7);
  CHECK(j["paths"]["manifest"] == "corpus/manifest.tsv");
  CHECK(j["train"]["lr"].is_null());
  CHECK(j["model"]["generator_strides"] == json{4, 4, 4, 4});
  CHECK_THROWS_AS(apply_overrides(j, {"novalue"}), UsageError);
  CHECK_THROWS_AS(apply_overrides(j, {"=3"}), UsageError);
  CHECK_THROWS_AS(apply_overrides(j, {"dsp..n_mels=3"}), UsageError);
  CHECK_THROWS_AS(apply_overrides(j, {"seed.x=3"}), UsageError);  // seed is not a section
}

TEST_CASE("load_global_config: file then overrides; paths relative to the file") {
  TempDir dir;
  std::filesystem::create_directories(dir / "exp");
  std::ofstream(dir / "exp" / "c.json") << R"({"seed": 3, "dsp": {"n_mels": 40},
                                               "paths": {"manifest": "data/m.tsv", "init": "/abs/ck"}})";
  const auto c = load_global_config(dir / "exp" / "c.json", {"seed=9"});
  CHECK(c.seed == 9);
  CHECK(c.train.seed == 9);
  CHECK(c.dsp.n_mels == 40);
  CHECK(c.paths.manifest == dir / "exp" / "data/m.tsv");
  CHECK(c.paths.init == "/abs/ck");
  const auto d = load_global_config(dir / "exp" / "c.json", {"paths.manifest=rel.tsv"});
  CHECK(d.paths.manifest == std::filesystem::absolute("rel.tsv"));

  CHECK_THROWS_AS(load_global_config(dir / "missing.json"), UsageError);
  std::ofstream(dir / "broken.json") << "{";
  CHECK_THROWS_AS(load_global_config(dir / "broken.json"), UsageError);
  CHECK_THROWS_AS(load_global_config(std::nullopt, {"dsp.hop_length=100"}), UsageError);
  CHECK(load_global_config(std::nullopt).seed == 1);
}
