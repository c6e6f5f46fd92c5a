#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "laughsynth/annotation/symbols.hpp"

namespace laughsynth::annotation {

enum class Style { speech, smiled_speech, laugh, speech_laugh };
enum class VowelContext { a, e, i };

std::string_view to_string(Style s);
std::string_view to_string(VowelContext v);
std::optional<Style> parse_style(std::string_view s);
std::optional<VowelContext> parse_vowel_context(std::string_view s);

/// Parse failure with 1-based line and column of the offending field.
class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class EncodeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Utterance {
  std::string id;
  Style style = Style::speech;
  std::optional<VowelContext> vowel_context;
  std::string speaker;
  std::string audio_path;
  std::vector<std::string> symbols;
};

struct Manifest {
  std::string corpus;
  int sample_rate = 0;
  std::vector<Utterance> utterances;
  /// Directory relative audio paths resolve against.
  std::filesystem::path base_dir;

  std::filesystem::path audio_path(const Utterance& u) const;
  const Utterance* find(std::string_view id) const;
};

struct ParseOptions {
  /// Symbols treated as laughter labels when checking laugh records.
  std::vector<std::string> laugh_labels{std::string(kLaughVoiced), std::string(kLaughUnvoiced)};
};

/// Line format:
///   id TAB style TAB vowel_context|- TAB speaker TAB audio_path TAB symbols
/// Lines starting with '#' are comments, except `# corpus: NAME` and
/// `# sample_rate: HZ` which set manifest metadata.
Manifest parse_manifest(std::istream& in, const ParseOptions& options = {});

enum class PathCheck { verify, defer };
Manifest load_manifest(const std::filesystem::path& path, PathCheck check = PathCheck::verify,
                       const ParseOptions& options = {});

/// Serializes in the format parse_manifest reads.
std::string format_manifest(const Manifest& m);

/// [style marker] + [vowel marker if laugh] + symbol ids + [EOS].
std::vector<int> encode_utterance(const Utterance& u, const SymbolTable& table);

/// Maps raw tokens (markers allowed) to ids and appends EOS unless the
/// last token already is EOS. Used for free-form synthesis input.
std::vector<int> encode_tokens(std::span<const std::string> tokens, const SymbolTable& table);
std::vector<std::string> decode_ids(std::span<const int> ids, const SymbolTable& table);

std::string_view style_marker(Style s);
std::string_view vowel_marker(VowelContext v);

struct CorpusStats {
  std::map<Style, std::size_t> count_by_style;
  std::map<Style, double> seconds_by_style;
  std::map<VowelContext, std::size_t> laugh_count_by_context;
  std::map<VowelContext, double> laugh_seconds_by_context;
  std::size_t utterances = 0;
  double total_seconds = 0.0;

  double total_minutes() const { return total_seconds / 60.0; }
  std::size_t laugh_count() const;
  double laugh_seconds() const;
};

/// Exact per-style and per-vowel-context counts and summed durations.
/// `durations` maps utterance id to seconds; a missing id is an error.
CorpusStats corpus_stats(const Manifest& m, const std::map<std::string, double>& durations);

/// Reads every referenced WAV header for its duration.
std::map<std::string, double> durations_from_audio(const Manifest& m);

}  // namespace laughsynth::annotation
