#include "laughsynth/train/feature_cache.hpp"

#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "laughsynth/train/checkpoint.hpp"

namespace laughsynth::train {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'F', 'E', 'A', 'T', 0, 0};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_matrix(std::string& out, const Eigen::MatrixXf& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint32_t bits;
    const float v = m.data()[i];
    std::memcpy(&bits, &v, 4);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

struct Reader {
  const std::string& s;
  std::size_t pos = 0;

  bool u64(std::uint64_t& v) {
    if (s.size() - pos < 8) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    pos += 8;
    return true;
  }
  bool matrix(Eigen::MatrixXf& m) {
    std::uint64_t r, c;
    if (!u64(r) || !u64(c)) return false;
    if (r > (1u << 20) || c > (1u << 24) || (s.size() - pos) / 4 < r * c) return false;
    m.resize(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + static_cast<std::size_t>(b)])) << (8 * b);
      std::memcpy(m.data() + i, &bits, 4);
      pos += 4;
    }
    return true;
  }
};

}  // namespace

void save_features(const std::filesystem::path& path, const CachedFeatures& f) {
  std::string out(kMagic, 8);
  put_u64(out, f.dsp_fingerprint);
  put_u64(out, f.audio_hash);
  put_matrix(out, f.mel);
  put_matrix(out, f.mag);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    if (!o.write(out.data(), static_cast<std::streamsize>(out.size())))
      throw std::runtime_error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::optional<CachedFeatures> load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (s.size() < 8 || std::memcmp(s.data(), kMagic, 8) != 0) return std::nullopt;
  Reader r{s, 8};
  CachedFeatures f;
  if (!r.u64(f.dsp_fingerprint) || !r.u64(f.audio_hash) || !r.matrix(f.mel) || !r.matrix(f.mag)) return std::nullopt;
  if (r.pos != s.size()) return std::nullopt;
  return f;
}

std::vector<Example> build_dataset_cached(const annotation::Manifest& m, const annotation::SymbolTable& table,
                                          const dsp::DspConfig& cfg, const std::filesystem::path& cache_dir,
                                          CacheReport* report) {
  std::filesystem::create_directories(cache_dir);
  const std::uint64_t fp = cfg.fingerprint();
  CacheReport rep;
  std::vector<Example> out;
  out.reserve(m.utterances.size());
  for (const auto& u : m.utterances) {
    const auto audio_path = m.audio_path(u);
    const std::uint64_t audio_hash = file_hash(audio_path);
    const auto entry = cache_dir / (u.id + ".feat");
    const auto hit = load_features(entry);
    if (hit && hit->dsp_fingerprint == fp && hit->audio_hash == audio_hash) {
      Example e;
      e.id = u.id;
      e.style = u.style;
      e.ids = annotation::encode_utterance(u, table);
      e.mel = hit->mel;
      e.mag = hit->mag;
      out.push_back(std::move(e));
      ++rep.cached;
      spdlog::info("cache hit {}", u.id);
      continue;
    }
    if (hit) {
      ++rep.stale;
      spdlog::info("stale cache entry {} ({}), recomputing", u.id,
                   hit->dsp_fingerprint != fp ? "dsp config changed" : "audio changed");
    }
    Example e = make_example(u, dsp::load_wav(audio_path, cfg.sample_rate), table, cfg);
    save_features(entry, {fp, audio_hash, e.mel, e.mag});
    out.push_back(std::move(e));
    ++rep.computed;
  }
  if (report) *report = rep;
  return out;
}

}  // namespace laughsynth::train
