#pragma once

#include "imhs/label.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace imhs::corpus {

struct Instance {
  std::string id;
  std::string text;  // NFC, trimmed, nonempty
  Label label;
};

enum class Format { ToxiCN, Latent, ISHate, GenericJsonl };

std::string_view to_string(Format f);
Format parse_format(std::string_view s);

struct Dataset {
  std::vector<Instance> instances;
  std::filesystem::path source;
  std::string source_checksum;
  /// Rows of other classes (explicit hate etc.) that the adapter dropped.
  std::size_t skipped_rows = 0;

  [[nodiscard]] const Instance& find(std::string_view id) const;
};

/// ToxiCN: CSV with `content`, `toxic`, `expression` (2 = implicit) columns.
/// Latent: TSV with `post`, `class` (implicit_hate / not_hate / explicit_hate).
/// ISHate: CSV with `text`, `hateful_layer` (HS / Non-HS), `implicit_layer`.
/// GenericJsonl: {"id", "text", "label": "im_hate" | "no_hate"} per line.
/// Ids come from an id column when the adapter finds one, else the 1-based row.
Dataset load_dataset(const std::filesystem::path& path, Format format);

struct ClassStats {
  std::size_t im_hate = 0;
  std::size_t no_hate = 0;

  [[nodiscard]] std::size_t total() const { return im_hate + no_hate; }
  [[nodiscard]] double positive_ratio() const { return total() == 0 ? 0.0 : double(im_hate) / double(total()); }

  friend ClassStats operator+(ClassStats a, ClassStats b) { return {a.im_hate + b.im_hate, a.no_hate + b.no_hate}; }
  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

ClassStats class_stats(const Dataset& dataset);
ClassStats class_stats(const Dataset& dataset, const std::vector<std::string>& ids);

struct SplitManifest {
  std::uint64_t seed = 0;
  std::array<int, 3> ratios{8, 1, 1};
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::string source_checksum;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

/// Per-class sizes under the floor/floor/remainder rule.
struct SplitSizes {
  std::size_t train, val, test;
};
SplitSizes split_sizes(std::size_t class_count);

/// Stratified, seeded 8:1:1 split. Each class is shuffled with a
/// platform-independent Fisher-Yates over mt19937_64; ids inside each list
/// keep dataset order.
SplitManifest split(const Dataset& dataset, std::uint64_t seed);

std::string manifest_to_json(const SplitManifest& m);
SplitManifest manifest_from_json(std::string_view text);
void write_manifest(const SplitManifest& m, const std::filesystem::path& path);
SplitManifest read_manifest(const std::filesystem::path& path);

}  // namespace imhs::corpus
