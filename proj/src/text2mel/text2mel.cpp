#include "laughsynth/text2mel/text2mel.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "laughsynth/nn/losses.hpp"

namespace laughsynth::text2mel {

namespace {

constexpr std::array<int, 6> kTextDilations{1, 3, 9, 27, 1, 1};
constexpr std::array<int, 4> kAudioDilations{1, 3, 9, 27};

void init_params(Params& p, const Text2MelConfig& c, Rng& rng) {
  const int d = c.hidden_dim;
  p.add_uniform("text.embed", c.embed_dim, c.n_symbols, 1, rng);
  nn::add_conv(p, "text.conv0", c.embed_dim, 2 * d, 1, rng);
  for (std::size_t i = 0; i < kTextDilations.size(); ++i) nn::add_highway(p, fmt::format("text.hw{}", i), 2 * d, 3, rng);

  nn::add_conv(p, "audio.conv0", c.n_mels, d, 1, rng);
  nn::add_conv(p, "audio.conv1", d, d, 1, rng);
  for (std::size_t i = 0; i < kAudioDilations.size(); ++i) nn::add_highway(p, fmt::format("audio.hw{}", i), d, 3, rng);

  nn::add_conv(p, "dec.conv0", 2 * d, d, 1, rng);
  for (std::size_t i = 0; i < kAudioDilations.size(); ++i) nn::add_highway(p, fmt::format("dec.hw{}", i), d, 3, rng);
  nn::add_conv(p, "dec.conv1", d, d, 1, rng);
  nn::add_conv(p, "dec.out", d, c.n_mels, 1, rng);
}

void validate(const Text2MelConfig& c) {
  if (c.n_symbols < 2) throw ModelError("text2mel: n_symbols must be >= 2");
  if (c.n_mels < 1 || c.embed_dim < 1 || c.hidden_dim < 1) throw ModelError("text2mel: dimensions must be positive");
  if (c.reduction_factor < 1) throw ModelError("text2mel: reduction_factor must be >= 1");
  if (!(c.guided_g > 0)) throw ModelError("text2mel: guided attention g must be positive");
}

Eigen::Index argmax(const Eigen::VectorXf& v) {
  Eigen::Index i;
  v.maxCoeff(&i);
  return i;
}

}  // namespace

int hyper_int(const Hyper& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw ModelError("missing hyperparameter " + key);
  int v = 0;
  auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || ptr != it->second.data() + it->second.size())
    throw ModelError(fmt::format("hyperparameter {}: '{}' is not an integer", key, it->second));
  return v;
}

float hyper_float(const Hyper& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw ModelError("missing hyperparameter " + key);
  try {
    std::size_t used = 0;
    const float v = std::stof(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ModelError(fmt::format("hyperparameter {}: '{}' is not a number", key, it->second));
  }
}

Hyper Text2MelConfig::to_hyper() const {
  return {{"n_symbols", std::to_string(n_symbols)},
          {"n_mels", std::to_string(n_mels)},
          {"embed_dim", std::to_string(embed_dim)},
          {"hidden_dim", std::to_string(hidden_dim)},
          {"reduction_factor", std::to_string(reduction_factor)},
          {"guided_g", fmt::format("{}", guided_g)},
          {"w_l1", fmt::format("{}", weights.l1)},
          {"w_divergence", fmt::format("{}", weights.divergence)},
          {"w_attention", fmt::format("{}", weights.attention)}};
}

Text2MelConfig Text2MelConfig::from_hyper(const Hyper& h) {
  Text2MelConfig c;
  c.n_symbols = hyper_int(h, "n_symbols");
  c.n_mels = hyper_int(h, "n_mels");
  c.embed_dim = hyper_int(h, "embed_dim");
  c.hidden_dim = hyper_int(h, "hidden_dim");
  c.reduction_factor = hyper_int(h, "reduction_factor");
  c.guided_g = hyper_float(h, "guided_g");
  c.weights = {hyper_float(h, "w_l1"), hyper_float(h, "w_divergence"), hyper_float(h, "w_attention")};
  return c;
}

void require_tensor(const Params& params, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  const auto* p = params.find(name);
  if (!p) throw ModelError("missing tensor " + name);
  if (p->value.rows() != rows || p->value.cols() != cols)
    throw ModelError(fmt::format("tensor {} has shape {}x{}, expected {}x{}", name, p->value.rows(), p->value.cols(),
                                 rows, cols));
}

Text2Mel::Text2Mel(const Text2MelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  Rng rng(seed);
  init_params(params_, cfg_, rng);
}

Text2Mel::Text2Mel(const Text2MelConfig& cfg, Params params) : cfg_(cfg), params_(std::move(params)) {
  validate(cfg_);
  Params reference;
  Rng rng(0);
  init_params(reference, cfg_, rng);
  for (const auto& p : reference) require_tensor(params_, p.name, p.value.rows(), p.value.cols());
  if (params_.size() != reference.size()) throw ModelError("text2mel: unexpected extra tensors");
}

void Text2Mel::check_ids(std::span<const int> ids) const {
  if (ids.empty()) throw ModelError("text2mel: empty id sequence");
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] < 0 || ids[i] >= cfg_.n_symbols)
      throw ModelError(fmt::format("text2mel: id {} at position {} outside symbol table of size {}", ids[i], i,
                                   cfg_.n_symbols));
}

Text2Mel::Encoding Text2Mel::encode_text(nn::Binder<float>& b, std::span<const int> ids) const {
  check_ids(ids);
  auto& t = b.tape();
  Var h = nn::embedding(t, b("text.embed"), ids);
  h = nn::relu(t, b.conv(h, "text.conv0"));
  for (std::size_t i = 0; i < kTextDilations.size(); ++i)
    h = b.highway(h, fmt::format("text.hw{}", i), {3, kTextDilations[i], false});
  const Eigen::Index d = cfg_.hidden_dim;
  return {nn::slice_rows(t, h, 0, d), nn::slice_rows(t, h, d, d)};
}

Text2Mel::Output Text2Mel::decode(nn::Binder<float>& b, const Encoding& enc, Var prefix, const Eigen::MatrixXf* forced,
                                  const Eigen::Array<bool, Eigen::Dynamic, 1>* mask) const {
  auto& t = b.tape();
  if (t.rows(prefix) != cfg_.n_mels)
    throw ModelError(fmt::format("text2mel: prefix has {} channels, expected {}", t.rows(prefix), cfg_.n_mels));

  Var q = nn::relu(t, b.conv(prefix, "audio.conv0"));
  q = nn::relu(t, b.conv(q, "audio.conv1"));
  for (std::size_t i = 0; i < kAudioDilations.size(); ++i)
    q = b.highway(q, fmt::format("audio.hw{}", i), {3, kAudioDilations[i], true});

  const nn::AttentionResult att = forced ? nn::scaled_dot_attention_forced(t, q, enc.keys, enc.values, *forced, *mask)
                                         : nn::scaled_dot_attention(t, q, enc.keys, enc.values);

  Var h = b.conv(nn::concat_rows(t, att.context, q), "dec.conv0");
  for (std::size_t i = 0; i < kAudioDilations.size(); ++i)
    h = b.highway(h, fmt::format("dec.hw{}", i), {3, kAudioDilations[i], true});
  h = nn::relu(t, b.conv(h, "dec.conv1"));
  Var logits = b.conv(h, "dec.out");
  return {logits, nn::sigmoid(t, logits), att};
}

Text2Mel::Output Text2Mel::forward(nn::Binder<float>& b, std::span<const int> ids, const Eigen::MatrixXf& prefix) const {
  const Encoding enc = encode_text(b, ids);
  return decode(b, enc, b.tape().constant(prefix));
}

T2MLoss Text2Mel::loss(Tape& t, const Output& out, const Eigen::MatrixXf& target) const {
  if (t.rows(out.mel) != target.rows() || t.cols(out.mel) != target.cols())
    throw ModelError("text2mel: target shape does not match prediction");
  T2MLoss r;
  Var l1 = nn::l1_loss(t, out.mel, target);
  Var bd = nn::sigmoid_binary_divergence(t, out.logits, target);
  Var ga = nn::guided_attention_loss(t, out.attention.alignment, cfg_.guided_g);
  r.total = nn::add(t, nn::add(t, nn::scale(t, l1, cfg_.weights.l1), nn::scale(t, bd, cfg_.weights.divergence)),
                    nn::scale(t, ga, cfg_.weights.attention));
  r.l1 = t.value(l1)(0, 0);
  r.divergence = t.value(bd)(0, 0);
  r.attention = t.value(ga)(0, 0);
  r.value = t.value(r.total)(0, 0);
  return r;
}

SynthesisResult Text2Mel::synthesize(std::span<const int> ids, const SynthesisOptions& options) const {
  check_ids(ids);
  const int max_frames = std::max(1, options.max_frames);
  const Eigen::Index n = static_cast<Eigen::Index>(ids.size());

  Eigen::MatrixXf keys, values;
  {
    Tape t;
    nn::Binder<float> b(t, params_, false);
    const Encoding enc = encode_text(b, ids);
    keys = t.value(enc.keys);
    values = t.value(enc.values);
  }

  SynthesisResult r;
  r.mel.resize(cfg_.n_mels, 0);
  Eigen::MatrixXf forced = Eigen::MatrixXf::Zero(n, max_frames);
  Eigen::MatrixXf prefix = Eigen::MatrixXf::Zero(cfg_.n_mels, 1);
  Eigen::Index prev = 0;
  int eos_run = 0;
  bool stopped = false;

  for (int step = 0; step < max_frames; ++step) {
    const Eigen::Index len = step + 1;
    Eigen::Array<bool, Eigen::Dynamic, 1> mask = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(len, true);
    mask(step) = false;
    Eigen::MatrixXf forced_now = forced.leftCols(len);

    auto run = [&](const Eigen::Array<bool, Eigen::Dynamic, 1>& m, Eigen::VectorXf& frame, Eigen::VectorXf& column) {
      Tape t;
      nn::Binder<float> b(t, params_, false);
      const Encoding enc{t.constant(keys), t.constant(values)};
      const Output out = decode(b, enc, t.constant(prefix), &forced_now, &m);
      frame = t.value(out.mel).col(step);
      column = t.value(out.attention.alignment).col(step);
    };

    Eigen::VectorXf frame, column;
    run(mask, frame, column);
    if (options.monotonic && step > 0) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, prev - 1);
      const Eigen::Index hi = std::min<Eigen::Index>(n - 1, prev + 3);
      const Eigen::Index arg = argmax(column);
      if (arg < lo || arg > hi) {
        forced_now.col(step).setZero();
        forced_now(std::clamp(arg, lo, hi), step) = 1.0f;
        mask(step) = true;
        run(mask, frame, column);
      }
    }
    forced.col(step) = column;
    prev = argmax(column);

    r.mel.conservativeResize(Eigen::NoChange, len);
    r.mel.col(step) = frame;
    if (column(n - 1) > options.eos_threshold) ++eos_run;
    else eos_run = 0;
    if (eos_run >= options.eos_patience) {
      stopped = true;
      break;
    }
    prefix.conservativeResize(Eigen::NoChange, len + 1);
    prefix.col(len) = frame;
  }

  r.alignment = forced.leftCols(r.mel.cols());
  r.truncated = !stopped;
  r.stop_rule = fmt::format("attention on EOS > {} for {} consecutive frames, else max_frames={}",
                            options.eos_threshold, options.eos_patience, max_frames);
  return r;
}

Eigen::MatrixXf shift_right(const Eigen::MatrixXf& mel) {
  Eigen::MatrixXf p = Eigen::MatrixXf::Zero(mel.rows(), mel.cols());
  if (mel.cols() > 1) p.rightCols(mel.cols() - 1) = mel.leftCols(mel.cols() - 1);
  return p;
}

double attention_diagonality(const Eigen::MatrixXf& alignment) {
  const Eigen::Index n = alignment.rows(), t = alignment.cols();
  if (n == 0 || t == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index c = 0; c < t; ++c) {
    const Eigen::Index arg = argmax(alignment.col(c));
    acc += std::abs(static_cast<double>(arg) / n - static_cast<double>(c) / t);
  }
  return std::clamp(1.0 - 2.0 * acc / static_cast<double>(t), 0.0, 1.0);
}

}  // namespace laughsynth::text2mel
