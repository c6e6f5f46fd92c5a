#include "laughsynth/annotation/symbols.hpp"

#include <fstream>

#include <fmt/format.h>

#include "laughsynth/random.hpp"

namespace laughsynth::annotation {

SymbolTable SymbolTable::build(std::span<const std::string> phones, std::span<const std::string> laugh_labels) {
  if (phones.empty()) throw SymbolError("phone inventory is empty");
  if (laugh_labels.empty()) throw SymbolError("laugh label inventory is empty");

  SymbolTable t;
  auto add = [&](std::string_view s, SymbolKind kind) {
    if (s.empty()) throw SymbolError("empty symbol in inventory");
    if (t.index_.contains(std::string(s))) throw SymbolError(fmt::format("duplicate symbol '{}'", s));
    t.index_.emplace(std::string(s), static_cast<int>(t.symbols_.size()));
    t.symbols_.emplace_back(s);
    t.kinds_.push_back(kind);
  };
  add(kPad, SymbolKind::pad);
  add(kEos, SymbolKind::eos);
  for (const auto& p : phones) add(p, SymbolKind::phone);
  for (const auto& l : laugh_labels) add(l, SymbolKind::laugh);
  for (auto m : {kCtxA, kCtxE, kCtxI}) add(m, SymbolKind::vowel_marker);
  for (auto m : {kStyleSpeech, kStyleLaugh, kStyleSmile}) add(m, SymbolKind::style_marker);
  return t;
}

SymbolTable SymbolTable::standard() {
  const std::vector<std::string> laughs{std::string(kLaughVoiced), std::string(kLaughUnvoiced)};
  return build(default_phone_inventory(), laughs);
}

std::optional<int> SymbolTable::find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int SymbolTable::id(std::string_view symbol) const {
  auto found = find(symbol);
  if (!found) throw SymbolError(fmt::format("unknown symbol '{}'", symbol));
  return *found;
}

const std::string& SymbolTable::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size())
    throw SymbolError(fmt::format("symbol id {} out of range [0, {})", id, symbols_.size()));
  return symbols_[static_cast<std::size_t>(id)];
}

SymbolKind SymbolTable::kind(int id) const {
  symbol(id);
  return kinds_[static_cast<std::size_t>(id)];
}

std::uint64_t SymbolTable::fingerprint() const {
  std::uint64_t h = fnv1a("symbols");
  for (const auto& s : symbols_) {
    h = fnv1a(s, h);
    h = fnv1a("\n", h);
  }
  return h;
}

std::vector<std::string> default_phone_inventory() {
  return {"aa", "ae", "ah", "ao", "aw", "ay", "b",  "ch", "d",  "dh", "eh", "er", "ey",
          "f",  "g",  "hh", "ih", "iy", "jh", "k",  "l",  "m",  "n",  "ng", "ow", "oy",
          "p",  "r",  "s",  "sh", "t",  "th", "uh", "uw", "v",  "w",  "y",  "z",  "zh"};
}

std::vector<std::string> load_symbol_inventory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SymbolError(fmt::format("cannot open symbol inventory '{}'", path.string()));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    out.push_back(line.substr(first));
  }
  return out;
}

}  // namespace laughsynth::annotation
