#include "laughsynth/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "laughsynth/random.hpp"

namespace laughsynth::train {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'C', 'K', 'P', 'T', '\0', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), c, c + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    uint<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<unsigned char>& data() { return out_; }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& in, std::size_t end) : in_(in), end_(end) {}
  void need(std::size_t n) const {
    if (n > end_ - pos_)
      throw CheckpointError(CheckpointError::Code::corrupt,
                            fmt::format("checkpoint truncated: needed {} bytes at offset {}", n, pos_));
  }
  template <typename T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const std::vector<unsigned char>& in_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint64_t hash_bytes(const unsigned char* p, std::size_t n) {
  return fnv1a(std::string_view(reinterpret_cast<const char*>(p), n));
}

struct Entry {
  const NamedTensor* tensor;
  std::uint8_t group;
};

}  // namespace

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::t2m: return "t2m";
    case ModelKind::ssrn: return "ssrn";
    case ModelKind::generator: return "generator";
  }
  return "unknown";
}

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : parameters)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<unsigned char> serialize(const Checkpoint& c) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.kind));
  w.uint<std::uint64_t>(c.symbol_fingerprint);
  w.uint<std::uint64_t>(c.dsp_fingerprint);
  w.uint<std::uint64_t>(c.step);
  w.uint<std::uint64_t>(c.adam_step);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.hyper.size()));
  for (const auto& [k, v] : c.hyper) {
    w.str(k);
    w.str(v);
  }
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.provenance.size()));
  for (auto h : c.provenance) w.uint<std::uint64_t>(h);

  std::vector<Entry> entries;
  for (const auto& t : c.parameters) entries.push_back({&t, 0});
  for (const auto& t : c.adam_first) entries.push_back({&t, 1});
  for (const auto& t : c.adam_second) entries.push_back({&t, 2});
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    w.str(e.tensor->name);
    w.uint<std::uint8_t>(e.group);
    w.uint<std::uint8_t>(e.tensor->trainable ? 1 : 0);
    w.uint<std::uint64_t>(static_cast<std::uint64_t>(e.tensor->value.rows()));
    w.uint<std::uint64_t>(static_cast<std::uint64_t>(e.tensor->value.cols()));
    w.uint<std::uint64_t>(offset);
    offset += static_cast<std::uint64_t>(e.tensor->value.size());
  }
  w.uint<std::uint64_t>(offset);
  for (const auto& e : entries) {
    const auto& v = e.tensor->value;
    for (Eigen::Index i = 0; i < v.size(); ++i) w.uint<std::uint32_t>(std::bit_cast<std::uint32_t>(v(i)));
  }
  w.uint<std::uint64_t>(hash_bytes(w.data().data(), w.data().size()));
  return std::move(w.data());
}

Checkpoint deserialize(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError(CheckpointError::Code::magic, "not a checkpoint file (bad magic)");
  if (bytes.size() < sizeof kMagic + 4 + 8)
    throw CheckpointError(CheckpointError::Code::corrupt, "checkpoint truncated in header");

  // The version is checked before the body so a future format yields a
  // version error rather than a confusing parse failure.
  Reader head(bytes, bytes.size());
  head.skip(sizeof kMagic);
  const auto version = head.uint<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Code::version,
                          fmt::format("checkpoint format version {} is not supported (expected {})", version,
                                      kCheckpointVersion));

  Reader r(bytes, bytes.size() - 8);
  r.skip(sizeof kMagic + 4);
  Checkpoint c;
  const auto kind = r.uint<std::uint32_t>();
  if (kind < 1 || kind > 3) throw CheckpointError(CheckpointError::Code::corrupt, fmt::format("unknown model kind {}", kind));
  c.kind = static_cast<ModelKind>(kind);
  c.symbol_fingerprint = r.uint<std::uint64_t>();
  c.dsp_fingerprint = r.uint<std::uint64_t>();
  c.step = r.uint<std::uint64_t>();
  c.adam_step = r.uint<std::uint64_t>();
  const auto n_hyper = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_hyper; ++i) {
    std::string k = r.str();
    c.hyper[k] = r.str();
  }
  const auto n_prov = r.uint<std::uint32_t>();
  r.need(8ull * n_prov);
  for (std::uint32_t i = 0; i < n_prov; ++i) c.provenance.push_back(r.uint<std::uint64_t>());

  struct Dir {
    std::string name;
    std::uint8_t group, trainable;
    std::uint64_t rows, cols, offset;
  };
  const auto n_tensors = r.uint<std::uint32_t>();
  std::vector<Dir> dir;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Dir d;
    d.name = r.str();
    d.group = r.uint<std::uint8_t>();
    d.trainable = r.uint<std::uint8_t>();
    d.rows = r.uint<std::uint64_t>();
    d.cols = r.uint<std::uint64_t>();
    d.offset = r.uint<std::uint64_t>();
    if (d.group > 2) throw CheckpointError(CheckpointError::Code::corrupt, "bad tensor group in " + d.name);
    dir.push_back(std::move(d));
  }
  const auto n_values = r.uint<std::uint64_t>();
  const std::size_t payload = r.pos();
  if (n_values > (bytes.size() - 8 - payload) / 4 || payload + 4 * n_values + 8 != bytes.size())
    throw CheckpointError(CheckpointError::Code::corrupt,
                          fmt::format("checkpoint length {} does not match its directory ({} values)", bytes.size(),
                                      n_values));
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
  if (stored != hash_bytes(bytes.data(), bytes.size() - 8))
    throw CheckpointError(CheckpointError::Code::corrupt, "checkpoint checksum mismatch");

  for (const auto& d : dir) {
    if (d.rows * d.cols > n_values || d.offset > n_values - d.rows * d.cols)
      throw CheckpointError(CheckpointError::Code::corrupt, "tensor " + d.name + " lies outside the payload");
    NamedTensor t;
    t.name = d.name;
    t.trainable = d.trainable != 0;
    t.value.resize(static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(d.cols));
    const unsigned char* p = bytes.data() + payload + 4 * d.offset;
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
      t.value(i) = std::bit_cast<float>(u);
    }
    (d.group == 0 ? c.parameters : d.group == 1 ? c.adam_first : c.adam_second).push_back(std::move(t));
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = serialize(c);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Code::io, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Code::io, "cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize(read_file(path)); }

Checkpoint load_checkpoint(const std::filesystem::path& path, ModelKind expected) {
  Checkpoint c = load_checkpoint(path);
  if (c.kind != expected)
    throw CheckpointError(CheckpointError::Code::kind, fmt::format("{} holds a {} model, expected {}", path.string(),
                                                                   to_string(c.kind), to_string(expected)));
  return c;
}

std::uint64_t checkpoint_hash(const Checkpoint& c) {
  const auto bytes = serialize(c);
  return hash_bytes(bytes.data(), bytes.size());
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return hash_bytes(bytes.data(), bytes.size());
}

std::uint64_t weights_hash(const nn::ParameterStore<float>& params) {
  std::uint64_t h = fnv1a("");
  for (const auto& p : params) {
    h = fnv1a(p.name, h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(p.value.data()), sizeof(float) * p.value.size()), h);
  }
  return h;
}

void check_fingerprints(Checkpoint& c, std::uint64_t symbol_fp, std::uint64_t dsp_fp, bool allow_override) {
  std::string problem;
  if (c.symbol_fingerprint != symbol_fp)
    problem = fmt::format("symbol table fingerprint {:016x} != {:016x}", c.symbol_fingerprint, symbol_fp);
  else if (c.dsp_fingerprint != dsp_fp)
    problem = fmt::format("dsp config fingerprint {:016x} != {:016x}", c.dsp_fingerprint, dsp_fp);
  if (problem.empty()) return;
  if (!allow_override) throw CheckpointError(CheckpointError::Code::fingerprint, "checkpoint mismatch: " + problem);
  spdlog::warn("checkpoint mismatch overridden ({}); optimizer state cleared", problem);
  c.adam_first.clear();
  c.adam_second.clear();
  c.adam_step = 0;
  c.symbol_fingerprint = symbol_fp;
  c.dsp_fingerprint = dsp_fp;
}

bool extends(const Checkpoint& child, const Checkpoint& parent) {
  if (child.provenance.size() != parent.provenance.size() + 1) return false;
  if (!std::equal(parent.provenance.begin(), parent.provenance.end(), child.provenance.begin())) return false;
  return child.provenance.back() == checkpoint_hash(parent);
}

Checkpoint capture(ModelKind kind, const nn::ParameterStore<float>& params, const nn::AdamState<float>& adam,
                   std::map<std::string, std::string> hyper, std::uint64_t symbol_fp, std::uint64_t dsp_fp,
                   std::uint64_t step, std::vector<std::uint64_t> provenance) {
  Checkpoint c;
  c.kind = kind;
  c.hyper = std::move(hyper);
  c.symbol_fingerprint = symbol_fp;
  c.dsp_fingerprint = dsp_fp;
  c.step = step;
  c.provenance = std::move(provenance);
  c.adam_step = adam.step;
  for (const auto& p : params) {
    c.parameters.push_back({p.name, p.value, p.trainable});
    if (auto it = adam.moments.find(p.name); it != adam.moments.end()) {
      c.adam_first.push_back({p.name, it->second.first, true});
      c.adam_second.push_back({p.name, it->second.second, true});
    }
  }
  return c;
}

nn::ParameterStore<float> restore_parameters(const Checkpoint& c) {
  nn::ParameterStore<float> store;
  for (const auto& t : c.parameters) store.add(t.name, t.value, t.trainable);
  return store;
}

nn::AdamState<float> restore_adam(const Checkpoint& c) {
  nn::AdamState<float> s;
  if (c.adam_first.size() != c.adam_second.size())
    throw CheckpointError(CheckpointError::Code::corrupt, "optimizer moments are incomplete");
  s.step = c.adam_step;
  for (std::size_t i = 0; i < c.adam_first.size(); ++i) {
    if (c.adam_first[i].name != c.adam_second[i].name)
      throw CheckpointError(CheckpointError::Code::corrupt, "optimizer moments are misaligned");
    s.moments[c.adam_first[i].name] = {c.adam_first[i].value, c.adam_second[i].value};
  }
  return s;
}

}  // namespace laughsynth::train
