#include "laughsynth/text2mel/ssrn.hpp"

#include <bit>

#include <fmt/format.h>

#include "laughsynth/nn/losses.hpp"

namespace laughsynth::text2mel {

namespace {

int stages(const SsrnConfig& c) { return std::countr_zero(static_cast<unsigned>(c.reduction_factor)); }

void validate(const SsrnConfig& c) {
  if (c.reduction_factor < 1 || !std::has_single_bit(static_cast<unsigned>(c.reduction_factor)))
    throw ModelError("ssrn: reduction_factor must be a power of two");
  if (c.n_mels < 1 || c.n_bins < 1 || c.channels < 1) throw ModelError("ssrn: dimensions must be positive");
}

void init_params(Params& p, const SsrnConfig& c, Rng& rng) {
  nn::add_conv(p, "ssrn.conv0", c.n_mels, c.channels, 1, rng);
  nn::add_highway(p, "ssrn.hw0", c.channels, 3, rng);
  nn::add_highway(p, "ssrn.hw1", c.channels, 3, rng);
  for (int s = 0; s < stages(c); ++s) {
    nn::add_transposed_conv(p, fmt::format("ssrn.up{}", s), c.channels, c.channels, 4, 2, rng);
    nn::add_highway(p, fmt::format("ssrn.up{}.hw0", s), c.channels, 3, rng);
    nn::add_highway(p, fmt::format("ssrn.up{}.hw1", s), c.channels, 3, rng);
  }
  nn::add_conv(p, "ssrn.conv1", c.channels, c.channels, 1, rng);
  nn::add_conv(p, "ssrn.out", c.channels, c.n_bins, 1, rng);
}

}  // namespace

Hyper SsrnConfig::to_hyper() const {
  return {{"n_mels", std::to_string(n_mels)},
          {"n_bins", std::to_string(n_bins)},
          {"channels", std::to_string(channels)},
          {"reduction_factor", std::to_string(reduction_factor)},
          {"w_l1", fmt::format("{}", weights.l1)},
          {"w_divergence", fmt::format("{}", weights.divergence)}};
}

SsrnConfig SsrnConfig::from_hyper(const Hyper& h) {
  SsrnConfig c;
  c.n_mels = hyper_int(h, "n_mels");
  c.n_bins = hyper_int(h, "n_bins");
  c.channels = hyper_int(h, "channels");
  c.reduction_factor = hyper_int(h, "reduction_factor");
  c.weights.l1 = hyper_float(h, "w_l1");
  c.weights.divergence = hyper_float(h, "w_divergence");
  return c;
}

Ssrn::Ssrn(const SsrnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  Rng rng(seed);
  init_params(params_, cfg_, rng);
}

Ssrn::Ssrn(const SsrnConfig& cfg, Params params) : cfg_(cfg), params_(std::move(params)) {
  validate(cfg_);
  Params reference;
  Rng rng(0);
  init_params(reference, cfg_, rng);
  for (const auto& p : reference) require_tensor(params_, p.name, p.value.rows(), p.value.cols());
  if (params_.size() != reference.size()) throw ModelError("ssrn: unexpected extra tensors");
}

Ssrn::Output Ssrn::forward(nn::Binder<float>& b, Var mel) const {
  auto& t = b.tape();
  if (t.rows(mel) != cfg_.n_mels)
    throw ModelError(fmt::format("ssrn: input has {} channels, expected {}", t.rows(mel), cfg_.n_mels));
  Var h = b.conv(mel, "ssrn.conv0");
  h = b.highway(h, "ssrn.hw0", {3, 1});
  h = b.highway(h, "ssrn.hw1", {3, 3});
  for (int s = 0; s < stages(cfg_); ++s) {
    const std::string name = fmt::format("ssrn.up{}", s);
    h = b.upsample(h, name, 2, 4);
    h = b.highway(h, name + ".hw0", {3, 1});
    h = b.highway(h, name + ".hw1", {3, 3});
  }
  h = nn::relu(t, b.conv(h, "ssrn.conv1"));
  Var logits = b.conv(h, "ssrn.out");
  return {logits, nn::sigmoid(t, logits)};
}

SsrnLoss Ssrn::loss(Tape& t, const Output& out, const Eigen::MatrixXf& target) const {
  if (t.rows(out.magnitude) != target.rows() || t.cols(out.magnitude) != target.cols())
    throw ModelError("ssrn: target shape does not match prediction");
  SsrnLoss r;
  Var l1 = nn::l1_loss(t, out.magnitude, target);
  Var bd = nn::sigmoid_binary_divergence(t, out.logits, target);
  r.total = nn::add(t, nn::scale(t, l1, cfg_.weights.l1), nn::scale(t, bd, cfg_.weights.divergence));
  r.l1 = t.value(l1)(0, 0);
  r.divergence = t.value(bd)(0, 0);
  r.value = t.value(r.total)(0, 0);
  return r;
}

Eigen::MatrixXf Ssrn::infer(const Eigen::MatrixXf& mel) const {
  Tape t;
  nn::Binder<float> b(t, params_, false);
  return t.value(forward(b, t.constant(mel)).magnitude);
}

Eigen::MatrixXf fit_frames(const Eigen::MatrixXf& m, Eigen::Index frames) {
  Eigen::MatrixXf out = Eigen::MatrixXf::Zero(m.rows(), frames);
  const Eigen::Index n = std::min(frames, m.cols());
  out.leftCols(n) = m.leftCols(n);
  return out;
}

}  // namespace laughsynth::text2mel
