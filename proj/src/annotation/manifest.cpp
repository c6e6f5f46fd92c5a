#include "laughsynth/annotation/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "laughsynth/dsp/waveform.hpp"

namespace laughsynth::annotation {

std::string_view to_string(Style s) {
  switch (s) {
    case Style::speech: return "speech";
    case Style::smiled_speech: return "smiled_speech";
    case Style::laugh: return "laugh";
    case Style::speech_laugh: return "speech_laugh";
  }
  return "speech";
}

std::string_view to_string(VowelContext v) {
  switch (v) {
    case VowelContext::a: return "a";
    case VowelContext::e: return "e";
    case VowelContext::i: return "i";
  }
  return "a";
}

std::optional<Style> parse_style(std::string_view s) {
  for (Style st : {Style::speech, Style::smiled_speech, Style::laugh, Style::speech_laugh})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

std::optional<VowelContext> parse_vowel_context(std::string_view s) {
  for (VowelContext v : {VowelContext::a, VowelContext::e, VowelContext::i})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::string_view style_marker(Style s) {
  switch (s) {
    case Style::speech: return kStyleSpeech;
    case Style::laugh: return kStyleLaugh;
    case Style::smiled_speech:
    case Style::speech_laugh: return kStyleSmile;
  }
  return kStyleSpeech;
}

std::string_view vowel_marker(VowelContext v) {
  switch (v) {
    case VowelContext::a: return kCtxA;
    case VowelContext::e: return kCtxE;
    case VowelContext::i: return kCtxI;
  }
  return kCtxA;
}

ManifestError::ManifestError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(fmt::format("manifest line {}, column {}: {}", line, column, message)),
      line_(line),
      column_(column) {}

std::filesystem::path Manifest::audio_path(const Utterance& u) const {
  std::filesystem::path p(u.audio_path);
  return p.is_absolute() ? p : base_dir / p;
}

const Utterance* Manifest::find(std::string_view id) const {
  for (const auto& u : utterances)
    if (u.id == id) return &u;
  return nullptr;
}

namespace {

bool is_marker_symbol(std::string_view s) {
  return s == kCtxA || s == kCtxE || s == kCtxI || s == kStyleSpeech || s == kStyleLaugh || s == kStyleSmile ||
         s == kPad || s == kEos;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Manifest parse_manifest(std::istream& in, const ParseOptions& options) {
  Manifest m;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      if (body.starts_with("corpus:")) {
        m.corpus = trim(std::string_view(body).substr(7));
      } else if (body.starts_with("sample_rate:")) {
        const std::string v = trim(std::string_view(body).substr(12));
        int rate = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), rate);
        if (ec != std::errc() || ptr != v.data() + v.size() || rate <= 0)
          throw ManifestError(lineno, 1, fmt::format("invalid sample_rate '{}'", v));
        m.sample_rate = rate;
      }
      continue;
    }

    std::vector<std::string> fields;
    std::vector<std::size_t> columns;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      columns.push_back(start + 1);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 6)
      throw ManifestError(lineno, 1, fmt::format("expected 6 tab-separated fields, found {}", fields.size()));

    Utterance u;
    u.id = fields[0];
    if (u.id.empty()) throw ManifestError(lineno, columns[0], "empty utterance id");
    if (!seen.insert(u.id).second) throw ManifestError(lineno, columns[0], fmt::format("duplicate id '{}'", u.id));

    auto style = parse_style(fields[1]);
    if (!style) throw ManifestError(lineno, columns[1], fmt::format("unknown style tag '{}'", fields[1]));
    u.style = *style;

    if (fields[2] != "-") {
      auto ctx = parse_vowel_context(fields[2]);
      if (!ctx) throw ManifestError(lineno, columns[2], fmt::format("unknown vowel context '{}'", fields[2]));
      u.vowel_context = *ctx;
    }
    if (u.style == Style::laugh && !u.vowel_context)
      throw ManifestError(lineno, columns[2], "laugh record requires a vowel context");
    if (u.style != Style::laugh && u.vowel_context)
      throw ManifestError(lineno, columns[2], "vowel context is only allowed on laugh records");

    u.speaker = fields[3];
    u.audio_path = fields[4];
    if (u.audio_path.empty()) throw ManifestError(lineno, columns[4], "empty audio path");

    std::istringstream syms(fields[5]);
    std::string s;
    while (syms >> s) {
      if (is_marker_symbol(s))
        throw ManifestError(lineno, columns[5],
                            fmt::format("marker '{}' must not appear in symbols; it is derived from the style", s));
      if (u.style == Style::laugh &&
          std::find(options.laugh_labels.begin(), options.laugh_labels.end(), s) == options.laugh_labels.end())
        throw ManifestError(lineno, columns[5], fmt::format("laugh record contains non-laughter symbol '{}'", s));
      u.symbols.push_back(s);
    }
    if (u.symbols.empty()) throw ManifestError(lineno, columns[5], "empty symbol sequence");
    m.utterances.push_back(std::move(u));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path, PathCheck check, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ManifestError(0, 0, fmt::format("cannot open manifest '{}'", path.string()));
  Manifest m = parse_manifest(in, options);
  m.base_dir = path.parent_path();
  if (check == PathCheck::verify) {
    for (const auto& u : m.utterances)
      if (!std::filesystem::exists(m.audio_path(u)))
        throw ManifestError(0, 0, fmt::format("audio for '{}' not found at '{}'", u.id, m.audio_path(u).string()));
  }
  return m;
}

std::string format_manifest(const Manifest& m) {
  std::string out;
  if (!m.corpus.empty()) out += fmt::format("# corpus: {}\n", m.corpus);
  if (m.sample_rate > 0) out += fmt::format("# sample_rate: {}\n", m.sample_rate);
  for (const auto& u : m.utterances) {
    std::string syms;
    for (std::size_t i = 0; i < u.symbols.size(); ++i) syms += (i ? " " : "") + u.symbols[i];
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", u.id, to_string(u.style),
                       u.vowel_context ? std::string(to_string(*u.vowel_context)) : std::string("-"), u.speaker,
                       u.audio_path, syms);
  }
  return out;
}

std::vector<int> encode_utterance(const Utterance& u, const SymbolTable& table) {
  if (u.symbols.empty()) throw EncodeError(fmt::format("utterance '{}' has no symbols", u.id));
  std::vector<int> ids;
  ids.reserve(u.symbols.size() + 3);
  ids.push_back(table.id(style_marker(u.style)));
  if (u.style == Style::laugh) {
    if (!u.vowel_context) throw EncodeError(fmt::format("laugh utterance '{}' lacks a vowel context", u.id));
    ids.push_back(table.id(vowel_marker(*u.vowel_context)));
  }
  for (std::size_t i = 0; i < u.symbols.size(); ++i) {
    auto id = table.find(u.symbols[i]);
    if (!id) throw EncodeError(fmt::format("utterance '{}': unknown symbol '{}' at position {}", u.id, u.symbols[i], i));
    ids.push_back(*id);
  }
  ids.push_back(table.eos_id());
  return ids;
}

std::vector<int> encode_tokens(std::span<const std::string> tokens, const SymbolTable& table) {
  if (tokens.empty()) throw EncodeError("empty symbol sequence");
  std::vector<int> ids;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto id = table.find(tokens[i]);
    if (!id) throw EncodeError(fmt::format("unknown symbol '{}' at position {}", tokens[i], i));
    if (*id == table.pad_id()) throw EncodeError(fmt::format("PAD is not allowed in input (position {})", i));
    if (*id == table.eos_id() && i + 1 != tokens.size())
      throw EncodeError(fmt::format("EOS may only appear last (position {})", i));
    ids.push_back(*id);
  }
  if (ids.back() != table.eos_id()) ids.push_back(table.eos_id());
  return ids;
}

std::vector<std::string> decode_ids(std::span<const int> ids, const SymbolTable& table) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(table.symbol(id));
  return out;
}

std::size_t CorpusStats::laugh_count() const {
  std::size_t n = 0;
  for (const auto& [ctx, c] : laugh_count_by_context) n += c;
  return n;
}

double CorpusStats::laugh_seconds() const {
  double s = 0.0;
  for (const auto& [ctx, d] : laugh_seconds_by_context) s += d;
  return s;
}

CorpusStats corpus_stats(const Manifest& m, const std::map<std::string, double>& durations) {
  CorpusStats st;
  for (const auto& u : m.utterances) {
    auto it = durations.find(u.id);
    if (it == durations.end()) throw std::invalid_argument(fmt::format("no duration for utterance '{}'", u.id));
    const double d = it->second;
    if (!(d >= 0.0)) throw std::invalid_argument(fmt::format("negative duration for utterance '{}'", u.id));
    ++st.count_by_style[u.style];
    st.seconds_by_style[u.style] += d;
    if (u.style == Style::laugh && u.vowel_context) {
      ++st.laugh_count_by_context[*u.vowel_context];
      st.laugh_seconds_by_context[*u.vowel_context] += d;
    }
    ++st.utterances;
    st.total_seconds += d;
  }
  return st;
}

std::map<std::string, double> durations_from_audio(const Manifest& m) {
  std::map<std::string, double> out;
  for (const auto& u : m.utterances) out[u.id] = dsp::read_wav_info(m.audio_path(u)).duration();
  return out;
}

}  // namespace laughsynth::annotation
