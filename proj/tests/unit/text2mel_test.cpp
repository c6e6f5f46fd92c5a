#include <doctest.h>

#include <vector>

#include "laughsynth/dsp/griffin_lim.hpp"
#include "laughsynth/random.hpp"
#include "laughsynth/text2mel/ssrn.hpp"
#include "laughsynth/text2mel/text2mel.hpp"

using namespace laughsynth;
using namespace laughsynth::text2mel;

namespace {

Text2MelConfig small_t2m() {
  Text2MelConfig c;
  c.n_symbols = 11;
  c.n_mels = 8;
  c.embed_dim = 16;
  c.hidden_dim = 16;
  return c;
}

SsrnConfig small_ssrn() {
  SsrnConfig c;
  c.n_mels = 8;
  c.n_bins = 17;
  c.channels = 8;
  return c;
}

std::vector<int> random_ids(Rng& rng, int n, int n_symbols) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (auto& i : ids) i = static_cast<int>(rng.range(2, n_symbols - 1));
  ids.back() = 1;  // EOS
  return ids;
}

Eigen::MatrixXf random_mel(Rng& rng, int rows, int cols) {
  Eigen::MatrixXf m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<float>(rng.uniform());
  return m;
}

struct Pass {
  Eigen::MatrixXf mel;
  Eigen::MatrixXf attention;
};

Pass teacher_forced(const Text2Mel& m, const std::vector<int>& ids, const Eigen::MatrixXf& prefix) {
  Tape t;
  nn::Binder<float> b(t, m.params(), false);
  auto out = m.forward(b, ids, prefix);
  return {t.value(out.mel), t.value(out.attention.alignment)};
}

Eigen::Index argmax(const Eigen::MatrixXf& a, Eigen::Index col) {
  Eigen::Index r = 0;
  a.col(col).maxCoeff(&r);
  return r;
}

}  // namespace

TEST_CASE("t2m forward is causal in the mel prefix, bitwise") {
  const Text2Mel model(small_t2m(), 3);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto ids = random_ids(rng, static_cast<int>(rng.range(2, 12)), 11);
    const int frames = static_cast<int>(rng.range(12, 40));
    const Eigen::MatrixXf prefix = random_mel(rng, 8, frames);
    const int k = static_cast<int>(rng.range(1, frames - 1));
    Eigen::MatrixXf perturbed = prefix;
    for (Eigen::Index j = k; j < frames; ++j) perturbed.col(j) += random_mel(rng, 8, 1);

    const Pass a = teacher_forced(model, ids, prefix);
    const Pass b = teacher_forced(model, ids, perturbed);
    CAPTURE(seed);
    CAPTURE(k);
    CHECK((a.mel.leftCols(k).array() == b.mel.leftCols(k).array()).all());
    CHECK((a.attention.leftCols(k).array() == b.attention.leftCols(k).array()).all());
    CHECK_FALSE((a.mel.col(k).array() == b.mel.col(k).array()).all());
  }
}

TEST_CASE("perturbing prefix frame 10 leaves frames 0..9 unchanged") {
  const Text2Mel model(small_t2m(), 5);
  Rng rng(5);
  const std::vector<int> ids{2, 5, 7, 3, 1};
  Eigen::MatrixXf prefix = random_mel(rng, 8, 20);
  const Pass a = teacher_forced(model, ids, prefix);
  prefix.col(10).array() += 0.5f;
  const Pass b = teacher_forced(model, ids, prefix);
  CHECK((a.mel.leftCols(10).array() == b.mel.leftCols(10).array()).all());
}

TEST_CASE("untrained model: outputs in (0,1) and attention column-stochastic") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Text2Mel model(small_t2m(), seed);
    Rng rng(seed + 100);
    const auto ids = random_ids(rng, static_cast<int>(rng.range(1, 20)), 11);
    const Pass p = teacher_forced(model, ids, random_mel(rng, 8, static_cast<int>(rng.range(1, 30))));
    CHECK(p.mel.minCoeff() > 0.0f);
    CHECK(p.mel.maxCoeff() < 1.0f);
    CHECK(p.attention.minCoeff() >= 0.0f);
    CHECK(p.attention.rows() == static_cast<Eigen::Index>(ids.size()));
    CHECK((p.attention.colwise().sum().array() - 1.0f).abs().maxCoeff() < 1e-6f);
  }
}

TEST_CASE("id outside the symbol table is rejected") {
  const Text2Mel model(small_t2m(), 1);
  Tape t;
  nn::Binder<float> b(t, model.params(), false);
  const std::vector<int> bad{2, 11, 1};
  CHECK_THROWS_AS(model.forward(b, bad, Eigen::MatrixXf::Zero(8, 3)), ModelError);
  const std::vector<int> negative{-1, 1};
  CHECK_THROWS_AS(model.synthesize(negative), ModelError);
  CHECK_THROWS_AS(model.synthesize(std::vector<int>{}), ModelError);
}

TEST_CASE("wrapping parameters checks names and shapes") {
  const Text2Mel model(small_t2m(), 1);
  Params copy;
  for (const auto& p : model.params()) copy.add(p.name, p.value);
  CHECK_NOTHROW(Text2Mel(small_t2m(), std::move(copy)));

  Params missing;
  for (const auto& p : model.params())
    if (p.name != "dec.out.w") missing.add(p.name, p.value);
  CHECK_THROWS_AS(Text2Mel(small_t2m(), std::move(missing)), ModelError);

  Params extra;
  for (const auto& p : model.params()) extra.add(p.name, p.value);
  extra.add("stray", Eigen::MatrixXf::Zero(1, 1));
  CHECK_THROWS_AS(Text2Mel(small_t2m(), std::move(extra)), ModelError);
}

TEST_CASE("hyperparameters round-trip through the string map") {
  Text2MelConfig c = small_t2m();
  c.guided_g = 0.3f;
  c.weights.attention = 0.5f;
  const Text2MelConfig r = Text2MelConfig::from_hyper(c.to_hyper());
  CHECK(r.n_symbols == c.n_symbols);
  CHECK(r.embed_dim == c.embed_dim);
  CHECK(r.hidden_dim == c.hidden_dim);
  CHECK(r.guided_g == c.guided_g);
  CHECK(r.weights.attention == c.weights.attention);
  const SsrnConfig s = SsrnConfig::from_hyper(small_ssrn().to_hyper());
  CHECK(s.n_bins == 17);
  CHECK(s.channels == 8);
}

TEST_CASE("synthesize: max_frames=1 gives one frame flagged truncated") {
  const Text2Mel model(small_t2m(), 2);
  const std::vector<int> ids{2, 3, 4, 1};
  const auto r = model.synthesize(ids, {.max_frames = 1, .monotonic = true, .eos_threshold = 0.5f, .eos_patience = 3});
  CHECK(r.mel.cols() == 1);
  CHECK(r.alignment.cols() == 1);
  CHECK(r.truncated);
  CHECK_FALSE(r.stop_rule.empty());
}

TEST_CASE("synthesize: EOS rule stops after exactly `patience` frames") {
  const Text2Mel model(small_t2m(), 2);
  const std::vector<int> ids{2, 3, 4, 1};
  // Any positive EOS weight counts, so the run ends at frame `patience`.
  const auto r = model.synthesize(ids, {.max_frames = 50, .monotonic = false, .eos_threshold = 0.0f, .eos_patience = 3});
  CHECK(r.mel.cols() == 3);
  CHECK_FALSE(r.truncated);
  const auto never = model.synthesize(ids, {.max_frames = 7, .monotonic = false, .eos_threshold = 1.0f, .eos_patience = 3});
  CHECK(never.mel.cols() == 7);
  CHECK(never.truncated);
}

TEST_CASE("synthesize: monotonic clamp bounds every argmax step to [-1, +3]") {
  int clamped_runs = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Text2Mel model(small_t2m(), seed);
    Rng rng(seed);
    const auto ids = random_ids(rng, static_cast<int>(rng.range(6, 16)), 11);
    const auto r = model.synthesize(ids, {.max_frames = 30, .monotonic = true, .eos_threshold = 1.0f, .eos_patience = 3});
    CHECK((r.alignment.colwise().sum().array() - 1.0f).abs().maxCoeff() < 1e-6f);
    for (Eigen::Index t = 1; t < r.alignment.cols(); ++t) {
      const auto step = argmax(r.alignment, t) - argmax(r.alignment, t - 1);
      CHECK(step >= -1);
      CHECK(step <= 3);
    }
    const auto free = model.synthesize(ids, {.max_frames = 30, .monotonic = false, .eos_threshold = 1.0f, .eos_patience = 3});
    for (Eigen::Index t = 1; t < free.alignment.cols(); ++t) {
      const auto step = argmax(free.alignment, t) - argmax(free.alignment, t - 1);
      if (step < -1 || step > 3) {
        ++clamped_runs;
        break;
      }
    }
  }
  // Untrained attention wanders, so the constraint has work to do.
  CHECK(clamped_runs > 0);
}

TEST_CASE("synthesis is deterministic in seed and inputs") {
  const std::vector<int> ids{2, 6, 6, 9, 1};
  const Text2Mel a(small_t2m(), 9);
  const Text2Mel b(small_t2m(), 9);
  const auto ra = a.synthesize(ids, {.max_frames = 12, .monotonic = true, .eos_threshold = 0.5f, .eos_patience = 3});
  const auto rb = b.synthesize(ids, {.max_frames = 12, .monotonic = true, .eos_threshold = 0.5f, .eos_patience = 3});
  CHECK((ra.mel.array() == rb.mel.array()).all());
  CHECK((ra.alignment.array() == rb.alignment.array()).all());
  const Text2Mel c(small_t2m(), 10);
  const auto rc = c.synthesize(ids, {.max_frames = 12, .monotonic = true, .eos_threshold = 0.5f, .eos_patience = 3});
  CHECK_FALSE((ra.mel.array() == rc.mel.array()).all());
}

TEST_CASE("ssrn: T_mel=25 with reduction 4 gives 100 frames") {
  SsrnConfig c = small_ssrn();
  const Ssrn s(c, 1);
  Rng rng(1);
  const auto mag = s.infer(random_mel(rng, 8, 25));
  CHECK(mag.rows() == 17);
  CHECK(mag.cols() == 100);
}

TEST_CASE("ssrn: length contract and (0,1) bounds for T_mel in 1..128") {
  for (int r : {1, 2, 4}) {
    SsrnConfig c = small_ssrn();
    c.reduction_factor = r;
    const Ssrn s(c, static_cast<std::uint64_t>(r));
    Rng rng(static_cast<std::uint64_t>(r));
    for (int frames = 1; frames <= 128; ++frames) {
      const auto mag = s.infer(random_mel(rng, 8, frames));
      REQUIRE(mag.cols() == static_cast<Eigen::Index>(frames) * r);
      REQUIRE(mag.rows() == 17);
      REQUIRE(mag.minCoeff() > 0.0f);
      REQUIRE(mag.maxCoeff() < 1.0f);
    }
  }
}

TEST_CASE("ssrn: channel mismatch and bad reduction are rejected") {
  const Ssrn s(small_ssrn(), 1);
  CHECK_THROWS_AS(s.infer(Eigen::MatrixXf::Zero(7, 4)), ModelError);
  SsrnConfig c = small_ssrn();
  c.reduction_factor = 3;
  CHECK_THROWS_AS(Ssrn(c, 1), ModelError);
}

TEST_CASE("fit_frames pads with zeros and crops") {
  Eigen::MatrixXf m = Eigen::MatrixXf::Ones(2, 3);
  const auto padded = fit_frames(m, 5);
  CHECK(padded.cols() == 5);
  CHECK(padded.leftCols(3).isOnes());
  CHECK(padded.rightCols(2).isZero());
  CHECK(fit_frames(m, 2).cols() == 2);
}

TEST_CASE("shift_right puts zeros first") {
  Eigen::MatrixXf m(1, 3);
  m << 1, 2, 3;
  const auto s = shift_right(m);
  CHECK(s(0, 0) == 0.0f);
  CHECK(s(0, 1) == 1.0f);
  CHECK(s(0, 2) == 2.0f);
  CHECK(shift_right(Eigen::MatrixXf::Ones(2, 1)).isZero());
}

TEST_CASE("attention_diagonality examples") {
  SUBCASE("identity") {
    for (int n : {4, 10, 37}) {
      const Eigen::MatrixXf a = Eigen::MatrixXf::Identity(n, n);
      CHECK(attention_diagonality(a) >= 1.0 - 2.0 / n);
    }
  }
  SUBCASE("stuck on the first symbol") {
    for (int t : {10, 100, 1000}) {
      Eigen::MatrixXf a = Eigen::MatrixXf::Zero(8, t);
      a.row(0).setOnes();
      // direct: 1 − 2·mean(c/T) = 1 − (T−1)/T
      double mean = 0;
      for (int c = 0; c < t; ++c) mean += static_cast<double>(c) / t / t;
      CHECK(attention_diagonality(a) == doctest::Approx(std::max(0.0, 1.0 - 2.0 * mean)).epsilon(1e-12));
    }
    Eigen::MatrixXf big = Eigen::MatrixXf::Zero(8, 1000);
    big.row(0).setOnes();
    CHECK(attention_diagonality(big) < 0.01);
  }
  SUBCASE("uniform random argmax scores about 1/3") {
    double total = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      Rng rng(seed);
      const int n = 50, t = 200;
      Eigen::MatrixXf a = Eigen::MatrixXf::Zero(n, t);
      for (int c = 0; c < t; ++c) a(static_cast<Eigen::Index>(rng.below(n)), c) = 1.0f;
      const double s = attention_diagonality(a);
      CHECK(s < 0.5);
      total += s;
    }
    CHECK(total / 100 == doctest::Approx(1.0 / 3.0).epsilon(0.1));
  }
  SUBCASE("empty") { CHECK(attention_diagonality(Eigen::MatrixXf(0, 0)) == 0.0); }
}

TEST_CASE("end-to-end shape: synthesize, ssrn, griffin-lim") {
  const Text2Mel t2m(small_t2m(), 4);
  const Ssrn ssrn(small_ssrn(), 4);
  dsp::DspConfig cfg;
  cfg.n_fft = 32;
  cfg.win_length = 32;
  cfg.hop_length = 8;
  cfg.n_mels = 8;
  const std::vector<int> ids{2, 4, 6, 1};
  for (int max_frames : {2, 5, 17}) {
    const auto mel = t2m.synthesize(ids, {.max_frames = max_frames, .monotonic = true, .eos_threshold = 1.0f,
                                          .eos_patience = 3});
    const auto mag = ssrn.infer(mel.mel);
    const auto frames = mag.cols();
    CHECK(frames == mel.mel.cols() * 4);
    const auto w = dsp::griffin_lim(mag.cast<double>(), 4, cfg).waveform;
    const auto expected = cfg.hop_length * frames;
    CHECK(std::abs(static_cast<long>(w.samples.size()) - static_cast<long>(expected)) <= cfg.win_length);
  }
}
