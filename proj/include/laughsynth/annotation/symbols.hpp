#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace laughsynth::annotation {

inline constexpr std::string_view kPad = "PAD";
inline constexpr std::string_view kEos = "EOS";
inline constexpr std::string_view kLaughVoiced = "LV";
inline constexpr std::string_view kLaughUnvoiced = "LU";
inline constexpr std::string_view kCtxA = "CTX_A";
inline constexpr std::string_view kCtxE = "CTX_E";
inline constexpr std::string_view kCtxI = "CTX_I";
inline constexpr std::string_view kStyleSpeech = "STYLE_SPEECH";
inline constexpr std::string_view kStyleLaugh = "STYLE_LAUGH";
inline constexpr std::string_view kStyleSmile = "STYLE_SMILE";

class SymbolError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SymbolKind { pad, eos, phone, laugh, vowel_marker, style_marker };

/// Bijective symbol <-> id map. Layout is fixed:
/// [PAD, EOS] + phones + laugh labels + CTX_A/E/I + STYLE_SPEECH/LAUGH/SMILE.
class SymbolTable {
 public:
  static SymbolTable build(std::span<const std::string> phones, std::span<const std::string> laugh_labels);
  /// 39-phone inventory with the default {LV, LU} laugh labels.
  static SymbolTable standard();

  std::size_t size() const { return symbols_.size(); }
  int pad_id() const { return 0; }
  int eos_id() const { return 1; }

  std::optional<int> find(std::string_view symbol) const;
  /// Throws SymbolError for unknown symbols.
  int id(std::string_view symbol) const;
  const std::string& symbol(int id) const;
  SymbolKind kind(int id) const;
  bool is_marker(int id) const {
    const auto k = kind(id);
    return k == SymbolKind::vowel_marker || k == SymbolKind::style_marker;
  }

  const std::vector<std::string>& symbols() const { return symbols_; }
  /// Hash of the ordered symbol list; embedded in model checkpoints.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> symbols_;
  std::vector<SymbolKind> kinds_;
  std::unordered_map<std::string, int> index_;
};

/// General-American 39-phone inventory (lower-case ARPAbet).
std::vector<std::string> default_phone_inventory();

/// One symbol per line; blank lines and '#' comments skipped.
std::vector<std::string> load_symbol_inventory(const std::filesystem::path& path);

}  // namespace laughsynth::annotation
