#include "laughsynth/vocoder/generator.hpp"

#include <numeric>
#include <sstream>

namespace laughsynth::vocoder {

namespace {

int parse_int(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw VocoderError("generator hyperparameter missing: " + key);
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw VocoderError(fmt::format("generator hyperparameter {} is not an integer: {}", key, it->second));
  }
}

std::vector<int> parse_list(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw VocoderError("generator hyperparameter missing: " + key);
  std::vector<int> v;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) v.push_back(std::stoi(item));
  return v;
}

}  // namespace

int GeneratorConfig::hop() const { return std::accumulate(strides.begin(), strides.end(), 1, std::multiplies<>()); }

int GeneratorConfig::width(int s) const {
  int c = channels;
  for (int i = 0; i <= s; ++i) c = std::max(min_channels, c / 2);
  return c;
}

void GeneratorConfig::validate() const {
  if (n_mels < 1 || channels < 1 || min_channels < 1) throw VocoderError("generator: dimensions must be positive");
  if (strides.empty()) throw VocoderError("generator: need at least one upsampling stage");
  for (int s : strides)
    if (s < 1) throw VocoderError("generator: strides must be >= 1");
  for (int d : dilations)
    if (d < 1) throw VocoderError("generator: dilations must be >= 1");
}

std::map<std::string, std::string> GeneratorConfig::to_hyper() const {
  return {{"n_mels", std::to_string(n_mels)},
          {"channels", std::to_string(channels)},
          {"min_channels", std::to_string(min_channels)},
          {"strides", fmt::format("{}", fmt::join(strides, ","))},
          {"dilations", fmt::format("{}", fmt::join(dilations, ","))},
          {"slope", fmt::format("{}", slope)}};
}

GeneratorConfig GeneratorConfig::from_hyper(const std::map<std::string, std::string>& h) {
  GeneratorConfig c;
  c.n_mels = parse_int(h, "n_mels");
  c.channels = parse_int(h, "channels");
  c.min_channels = parse_int(h, "min_channels");
  c.strides = parse_list(h, "strides");
  c.dilations = parse_list(h, "dilations");
  auto it = h.find("slope");
  if (it == h.end()) throw VocoderError("generator hyperparameter missing: slope");
  c.slope = std::stof(it->second);
  c.validate();
  return c;
}

Generator::Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  init_generator(params_, cfg_, rng);
}

Generator::Generator(const GeneratorConfig& cfg, nn::ParameterStore<float> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  nn::ParameterStore<float> reference;
  Rng rng(0);
  init_generator(reference, cfg_, rng);
  for (const auto& p : reference) {
    const auto* q = params_.find(p.name);
    if (!q) throw VocoderError("generator: missing tensor " + p.name);
    if (q->value.rows() != p.value.rows() || q->value.cols() != p.value.cols())
      throw VocoderError(fmt::format("generator: tensor {} is {}x{}, expected {}x{}", p.name, q->value.rows(),
                                     q->value.cols(), p.value.rows(), p.value.cols()));
  }
  if (params_.size() != reference.size()) throw VocoderError("generator: unexpected extra tensors");
}

nn::Var Generator::forward(nn::Binder<float>& b, nn::Var mel) const {
  if (b.tape().rows(mel) != cfg_.n_mels)
    throw VocoderError(fmt::format("generator: mel has {} channels, expected {}", b.tape().rows(mel), cfg_.n_mels));
  return generator_forward(b, cfg_, mel);
}

Eigen::VectorXd Generator::generate(const Eigen::MatrixXd& mel) const {
  nn::Tape<float> t;
  nn::Binder<float> b(t, params_, false);
  const nn::Var y = forward(b, t.constant(mel.cast<float>()));
  return t.value(y).row(0).transpose().cast<double>();
}

train::Checkpoint generator_checkpoint(const Generator& g, const nn::AdamState<float>& adam, std::uint64_t dsp_fp,
                                       std::uint64_t step, std::vector<std::uint64_t> provenance) {
  if (provenance.empty()) provenance.push_back(train::weights_hash(g.params()));
  return train::capture(train::ModelKind::generator, g.params(), adam, g.config().to_hyper(), 0, dsp_fp, step,
                        std::move(provenance));
}

Generator generator_from_checkpoint(const train::Checkpoint& c) {
  if (c.kind != train::ModelKind::generator)
    throw train::CheckpointError(train::CheckpointError::Code::kind,
                                 fmt::format("checkpoint holds a {} model, expected generator", to_string(c.kind)));
  return Generator(GeneratorConfig::from_hyper(c.hyper), train::restore_parameters(c));
}

}  // namespace laughsynth::vocoder
