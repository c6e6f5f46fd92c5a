#include "laughsynth/vocoder/vocoder.hpp"

#include <cmath>

#include "laughsynth/dsp/features.hpp"
#include "laughsynth/dsp/griffin_lim.hpp"

namespace laughsynth::vocoder {

dsp::Waveform gl_vocode(const Eigen::MatrixXd& mag_normalized, const dsp::DspConfig& cfg,
                        const GlVocodeOptions& options) {
  cfg.validate();
  if (mag_normalized.rows() != cfg.n_bins())
    throw VocoderError(fmt::format("gl_vocode: magnitude has {} bins, expected {}", mag_normalized.rows(), cfg.n_bins()));
  if (mag_normalized.cols() == 0) throw VocoderError("gl_vocode: no frames");

  Eigen::MatrixXd lin = dsp::denormalize_db(mag_normalized, cfg).array().pow(options.gamma);
  // Griffin-Lim needs at least one full window of signal.
  const Eigen::Index min_frames = 1 + (cfg.n_fft + cfg.hop_length - 1) / cfg.hop_length;
  if (lin.cols() < min_frames) lin.conservativeResizeLike(Eigen::MatrixXd::Zero(lin.rows(), min_frames));

  dsp::GriffinLimOptions gl;
  gl.random_phase_seed = options.random_phase_seed;
  dsp::Waveform w = dsp::griffin_lim(lin, options.n_iters, cfg, gl).waveform;
  w.samples = dsp::deemphasize(w.samples, cfg.preemphasis);
  const double peak = w.samples.size() ? w.samples.cwiseAbs().maxCoeff() : 0.0;
  if (peak >= options.silence_peak) w.samples *= options.peak / peak;
  return w;
}

Eigen::MatrixXd analysis_mel(const dsp::Waveform& w, const dsp::DspConfig& cfg) {
  return dsp::mel_spectrogram(w, cfg, false).mel.frames;
}

dsp::Waveform correct_waveform(const dsp::Waveform& w, const Generator& g, const dsp::DspConfig& cfg,
                               const CorrectionOptions& options) {
  if (g.config().hop() != cfg.hop_length)
    throw VocoderError(
        fmt::format("generator upsamples by {} but hop_length is {}", g.config().hop(), cfg.hop_length));
  const Eigen::Index len = w.samples.size();
  dsp::Waveform out{Eigen::VectorXd::Zero(len), w.sample_rate};
  const double rms_in = len ? std::sqrt(w.samples.squaredNorm() / static_cast<double>(len)) : 0.0;
  if (rms_in < options.silence_rms) return out;

  const Eigen::VectorXd y = g.generate(analysis_mel(w, cfg));
  const Eigen::Index n = std::min(len, y.size());
  out.samples.head(n) = y.head(n);
  if (options.loudness_match) {
    const double rms_out = std::sqrt(out.samples.squaredNorm() / static_cast<double>(len));
    if (rms_out > 0) out.samples *= rms_in / rms_out;
  }
  return out;
}

CorrectorPair make_corrector_pair(const dsp::Waveform& w, const dsp::DspConfig& cfg) {
  return {analysis_mel(w, cfg), w.samples};
}

namespace {

double pair_loss(nn::Tape<float>& t, nn::Var y, const CorrectorPair& p, const StftLossConfig& cfg, nn::Var* out) {
  const nn::Matrix<float> target = p.target.transpose().cast<float>();
  const nn::Var l = multiscale_stft_loss(t, y, target, cfg);
  if (out) *out = l;
  return t.value(l)(0, 0);
}

}  // namespace

double corrector_loss(const Generator& g, const std::vector<CorrectorPair>& corpus, const StftLossConfig& cfg) {
  if (corpus.empty()) throw VocoderError("corrector_loss: empty corpus");
  double total = 0;
  for (const auto& p : corpus) {
    nn::Tape<float> t;
    nn::Binder<float> b(t, g.params(), false);
    total += pair_loss(t, g.forward(b, t.constant(p.mel.cast<float>())), p, cfg, nullptr);
  }
  return total / static_cast<double>(corpus.size());
}

ToyTrainResult train_corrector_toy(const std::vector<CorrectorPair>& corpus, const GeneratorConfig& gcfg,
                                   const ToyTrainOptions& options) {
  if (corpus.empty()) throw VocoderError("train_corrector_toy: empty corpus");
  if (options.steps < 0) throw VocoderError("train_corrector_toy: steps must be non-negative");
  ToyTrainResult r{Generator(gcfg, options.seed), {}, {}, 0.0, 0.0};
  try {
    r.initial_loss = corrector_loss(r.generator, corpus, options.loss);
  } catch (const nn::NonFiniteError& e) {
    throw CorrectorDiverged(fmt::format("corrector loss is non-finite before training: {}", e.what()));
  }
  r.losses.emplace_back(0, r.initial_loss);
  for (int step = 1; step <= options.steps; ++step) {
    const CorrectorPair& p = corpus[static_cast<std::size_t>(step - 1) % corpus.size()];
    r.generator.params().zero_grad();
    nn::Tape<float> t;
    nn::Binder<float> b(t, r.generator.params(), true);
    nn::Var loss;
    double value = 0;
    try {
      value = pair_loss(t, r.generator.forward(b, t.constant(p.mel.cast<float>())), p, options.loss, &loss);
    } catch (const nn::NonFiniteError& e) {
      throw CorrectorDiverged(fmt::format("corrector training diverged at step {}: {}", step, e.what()));
    }
    if (!std::isfinite(value)) throw CorrectorDiverged(fmt::format("corrector loss is non-finite at step {}", step));
    t.backward(loss);
    try {
      nn::adam_step(r.generator.params(), r.adam, options.adam);
    } catch (const nn::NonFiniteError& e) {
      throw CorrectorDiverged(fmt::format("corrector training diverged at step {}: {}", step, e.what()));
    }
    if (options.log_every > 0 && step % options.log_every == 0 && step != options.steps)
      r.losses.emplace_back(step, corrector_loss(r.generator, corpus, options.loss));
  }
  r.final_loss = options.steps == 0 ? r.initial_loss : corrector_loss(r.generator, corpus, options.loss);
  if (options.steps > 0) r.losses.emplace_back(options.steps, r.final_loss);
  return r;
}

}  // namespace laughsynth::vocoder
