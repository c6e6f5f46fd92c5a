#include "laughsynth/train/dataset.hpp"

#include "laughsynth/dsp/features.hpp"
#include "laughsynth/text2mel/ssrn.hpp"

namespace laughsynth::train {

Example make_example(const annotation::Utterance& u, const dsp::Waveform& audio, const annotation::SymbolTable& table,
                     const dsp::DspConfig& cfg) {
  const dsp::Features f = dsp::mel_spectrogram(audio, cfg, true);
  Example e;
  e.id = u.id;
  e.style = u.style;
  e.ids = annotation::encode_utterance(u, table);
  e.mel = f.mel.frames.cast<float>();
  e.mag = text2mel::fit_frames(f.mag.frames.cast<float>(), e.mel.cols() * cfg.reduction_factor);
  return e;
}

std::vector<Example> build_dataset(const annotation::Manifest& m, const annotation::SymbolTable& table,
                                   const dsp::DspConfig& cfg) {
  std::vector<Example> out;
  out.reserve(m.utterances.size());
  for (const auto& u : m.utterances) out.push_back(make_example(u, dsp::load_wav(m.audio_path(u), cfg.sample_rate), table, cfg));
  return out;
}

}  // namespace laughsynth::train
