#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace imhs::kb {

enum class CodetypeKey { Abbreviation, Metaphor, Irony, Pun, Idiom, Argot };

std::string_view to_string(CodetypeKey key);
CodetypeKey parse_codetype_key(std::string_view s);

/// Canonical taxonomy size.
inline constexpr std::size_t kCanonicalSize = 6;

/// Text keyed by language tag ("zh", "en").
using LocalizedText = std::map<std::string, std::string, std::less<>>;

struct Codetype {
  CodetypeKey key;
  LocalizedText name;
  LocalizedText explanation;
  LocalizedText sample;
};

/// Ordered codetypes plus the active language. The order is persisted in the
/// KB file and fixes the block order of concatenated features.
class CodetypeSet {
public:
  CodetypeSet(std::vector<Codetype> codetypes, std::string language);

  [[nodiscard]] const std::vector<Codetype>& codetypes() const noexcept { return codetypes_; }
  [[nodiscard]] const std::string& language() const noexcept { return language_; }
  [[nodiscard]] std::size_t size() const noexcept { return codetypes_.size(); }

  /// Same codetypes rendered in another language.
  [[nodiscard]] CodetypeSet with_language(std::string language) const;
  /// Single-codetype view, used for per-codetype encoder inputs.
  [[nodiscard]] CodetypeSet only(std::size_t index) const;

private:
  std::vector<Codetype> codetypes_;
  std::string language_;
};

enum class Part : std::uint8_t { Name = 1, Expl = 2, Samp = 4 };

/// Subset of {Name, Expl, Samp}. The empty combo is the no-codetype baseline.
class InfoCombo {
public:
  constexpr InfoCombo() = default;
  constexpr explicit InfoCombo(std::uint8_t bits) : bits_(bits & 7u) {}
  constexpr InfoCombo(std::initializer_list<Part> parts) {
    for (Part p : parts) bits_ |= static_cast<std::uint8_t>(p);
  }

  [[nodiscard]] constexpr bool has(Part p) const { return (bits_ & static_cast<std::uint8_t>(p)) != 0; }
  [[nodiscard]] constexpr bool empty() const { return bits_ == 0; }
  [[nodiscard]] constexpr std::uint8_t bits() const { return bits_; }

  /// Row label, e.g. "Name+Samp+Expl"; "-" for the baseline.
  [[nodiscard]] std::string label() const;
  /// Inverse of label(); throws Error(Parse) on unknown spellings.
  static InfoCombo parse(std::string_view label);

  friend constexpr bool operator==(InfoCombo a, InfoCombo b) = default;

private:
  std::uint8_t bits_ = 0;
};

struct LoadOptions {
  std::string language = "en";
  /// Accept sets whose size differs from the canonical six.
  bool allow_noncanonical_size = false;
};

CodetypeSet load_codetypes(const std::filesystem::path& path, const LoadOptions& options = {});
CodetypeSet parse_codetypes(std::string_view json_text, const LoadOptions& options = {});

/// One line per codetype in set order; parts in the fixed order Name, Samp,
/// Expl joined by " — "; lines joined by "\n".
std::string render_info(const CodetypeSet& set, InfoCombo combo);

/// The seven nonempty combos in result-table row order.
std::vector<InfoCombo> enumerate_combos();

}  // namespace imhs::kb
