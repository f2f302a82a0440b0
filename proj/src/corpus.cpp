#include "imhs/corpus.hpp"

#include "imhs/error.hpp"
#include "imhs/random.hpp"
#include "imhs/text.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <random>
#include <set>

namespace imhs::corpus {

namespace {

struct RawRow {
  std::string id;
  std::string text;
  std::optional<Label> label;  // nullopt: row belongs to a class the adapter drops
};

class Header {
public:
  explicit Header(const std::vector<std::string>& names) {
    for (size_t i = 0; i < names.size(); ++i) index_.emplace(trim(names[i]), i);
  }

  [[nodiscard]] std::optional<size_t> find(std::initializer_list<std::string_view> candidates) const {
    for (auto c : candidates) {
      auto it = index_.find(std::string(c));
      if (it != index_.end()) return it->second;
    }
    return std::nullopt;
  }

  [[nodiscard]] size_t require(std::initializer_list<std::string_view> candidates, std::string_view format) const {
    if (auto i = find(candidates)) return *i;
    throw Error(ErrorKind::MissingField,
                std::string(format) + " file lacks a '" + std::string(*candidates.begin()) + "' column");
  }

private:
  std::map<std::string, size_t> index_;
};

const std::string& cell(const std::vector<std::string>& row, size_t i, size_t row_no) {
  if (i >= row.size()) {
    throw Error(ErrorKind::Parse, "row " + std::to_string(row_no) + " is missing column " + std::to_string(i));
  }
  return row[i];
}

std::string row_id(const std::vector<std::string>& row, std::optional<size_t> id_col, size_t row_no) {
  if (id_col && *id_col < row.size() && !trim(row[*id_col]).empty()) return trim(row[*id_col]);
  return std::to_string(row_no);
}

[[noreturn]] void bad_label(const std::string& id, std::string_view value) {
  throw Error(ErrorKind::BadLabel, "row '" + id + "' has label '" + std::string(value) + "'");
}

std::vector<RawRow> read_toxicn(std::string_view content) {
  const auto rows = parse_csv(content);
  if (rows.empty()) return {};
  Header h(rows[0]);
  const size_t text = h.require({"content", "text"}, "ToxiCN");
  const size_t toxic = h.require({"toxic"}, "ToxiCN");
  const size_t expression = h.require({"expression"}, "ToxiCN");
  const auto id_col = h.find({"id", "ID"});
  std::vector<RawRow> out;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto id = row_id(rows[r], id_col, r);
    const auto tox = trim(cell(rows[r], toxic, r));
    const auto expr = trim(cell(rows[r], expression, r));
    std::optional<Label> label;
    if (tox == "0") {
      label = Label::NoHate;
    } else if (tox == "1" && expr == "2") {
      label = Label::ImHate;
    } else if (tox == "1" && (expr == "0" || expr == "1" || expr == "3")) {
      // Offensive, explicit or reporting: toxic but not implicit hate.
      label = std::nullopt;
    } else {
      bad_label(id, "toxic=" + tox + ",expression=" + expr);
    }
    out.push_back({id, cell(rows[r], text, r), label});
  }
  return out;
}

std::vector<RawRow> read_latent(std::string_view content) {
  const auto rows = parse_csv(content, '\t');
  if (rows.empty()) return {};
  Header h(rows[0]);
  const size_t text = h.require({"post", "text"}, "Latent");
  const size_t cls = h.require({"class"}, "Latent");
  const auto id_col = h.find({"ID", "id"});
  std::vector<RawRow> out;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto id = row_id(rows[r], id_col, r);
    const auto value = trim(cell(rows[r], cls, r));
    std::optional<Label> label;
    if (value == "implicit_hate") {
      label = Label::ImHate;
    } else if (value == "not_hate") {
      label = Label::NoHate;
    } else if (value == "explicit_hate") {
      label = std::nullopt;
    } else {
      bad_label(id, value);
    }
    out.push_back({id, cell(rows[r], text, r), label});
  }
  return out;
}

std::vector<RawRow> read_ishate(std::string_view content) {
  const auto rows = parse_csv(content);
  if (rows.empty()) return {};
  Header h(rows[0]);
  const size_t text = h.require({"text", "cleaned_text"}, "ISHate");
  const size_t hateful = h.require({"hateful_layer"}, "ISHate");
  const size_t implicit = h.require({"implicit_layer"}, "ISHate");
  const auto id_col = h.find({"message_id", "id"});
  std::vector<RawRow> out;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto id = row_id(rows[r], id_col, r);
    const auto hs = trim(cell(rows[r], hateful, r));
    const auto imp = trim(cell(rows[r], implicit, r));
    std::optional<Label> label;
    if (hs == "Non-HS") {
      label = Label::NoHate;
    } else if (hs == "HS" && imp == "Implicit HS") {
      label = Label::ImHate;
    } else if (hs == "HS" && imp == "Explicit HS") {
      label = std::nullopt;
    } else {
      bad_label(id, hs + "/" + imp);
    }
    out.push_back({id, cell(rows[r], text, r), label});
  }
  return out;
}

std::vector<RawRow> read_generic(std::string_view content) {
  std::vector<RawRow> out;
  size_t line_no = 0;
  for (const auto& line : split_lines(content)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("text") || !j["text"].is_string() || !j.contains("label") || !j["label"].is_string()) {
      throw Error(ErrorKind::MissingField, "line " + std::to_string(line_no) + " needs string 'text' and 'label'");
    }
    std::string id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                      : std::to_string(line_no);
    const auto value = j["label"].get<std::string>();
    Label label;
    if (value == "im_hate") {
      label = Label::ImHate;
    } else if (value == "no_hate") {
      label = Label::NoHate;
    } else {
      bad_label(id, value);
    }
    out.push_back({std::move(id), j["text"].get<std::string>(), label});
  }
  return out;
}

}  // namespace

std::string_view to_string(Format f) {
  switch (f) {
    case Format::ToxiCN: return "toxicn";
    case Format::Latent: return "latent";
    case Format::ISHate: return "ishate";
    case Format::GenericJsonl: return "generic_jsonl";
  }
  return "unknown";
}

Format parse_format(std::string_view s) {
  for (Format f : {Format::ToxiCN, Format::Latent, Format::ISHate, Format::GenericJsonl}) {
    if (to_string(f) == s) return f;
  }
  throw Error(ErrorKind::UnknownFormat, "dataset format '" + std::string(s) + "'");
}

const Instance& Dataset::find(std::string_view id) const {
  for (const auto& inst : instances) {
    if (inst.id == id) return inst;
  }
  throw Error(ErrorKind::MissingField, "instance '" + std::string(id) + "' not in dataset");
}

Dataset load_dataset(const std::filesystem::path& path, Format format) {
  const std::string content = read_file(path);
  std::vector<RawRow> rows;
  switch (format) {
    case Format::ToxiCN: rows = read_toxicn(content); break;
    case Format::Latent: rows = read_latent(content); break;
    case Format::ISHate: rows = read_ishate(content); break;
    case Format::GenericJsonl: rows = read_generic(content); break;
  }

  Dataset ds;
  ds.source = path;
  ds.source_checksum = sha256_hex(content);
  std::set<std::string> ids;
  for (auto& row : rows) {
    if (!row.label) {
      ++ds.skipped_rows;
      continue;
    }
    std::string text = trim(nfc(row.text));
    if (text.empty()) {
      throw Error(ErrorKind::Parse, "row '" + row.id + "' has empty text");
    }
    if (!ids.insert(row.id).second) {
      throw Error(ErrorKind::DuplicateKey, "instance id '" + row.id + "' appears twice");
    }
    ds.instances.push_back({std::move(row.id), std::move(text), *row.label});
  }
  if (ds.instances.empty()) {
    throw Error(ErrorKind::EmptyDataset, path.string() + " has no implicit-hate or no-hate rows");
  }
  return ds;
}

ClassStats class_stats(const Dataset& dataset) {
  ClassStats s;
  for (const auto& inst : dataset.instances) {
    (inst.label == Label::ImHate ? s.im_hate : s.no_hate) += 1;
  }
  return s;
}

ClassStats class_stats(const Dataset& dataset, const std::vector<std::string>& ids) {
  std::map<std::string_view, Label> labels;
  for (const auto& inst : dataset.instances) labels.emplace(inst.id, inst.label);
  ClassStats s;
  for (const auto& id : ids) {
    auto it = labels.find(id);
    if (it == labels.end()) {
      throw Error(ErrorKind::MissingField, "instance '" + id + "' not in dataset");
    }
    (it->second == Label::ImHate ? s.im_hate : s.no_hate) += 1;
  }
  return s;
}

SplitSizes split_sizes(std::size_t n) {
  const std::size_t train = (8 * n) / 10;
  const std::size_t val = n / 10;
  return {train, val, n - train - val};
}

SplitManifest split(const Dataset& dataset, std::uint64_t seed) {
  if (dataset.instances.empty()) {
    throw Error(ErrorKind::EmptyDataset, "cannot split an empty dataset");
  }
  // Which split each dataset position lands in: 0 train, 1 val, 2 test.
  std::vector<int> assignment(dataset.instances.size(), -1);
  std::mt19937_64 rng(seed);
  for (Label cls : {Label::ImHate, Label::NoHate}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
      if (dataset.instances[i].label == cls) members.push_back(i);
    }
    if (members.empty()) continue;
    if (members.size() < 3) {
      throw Error(ErrorKind::ClassTooSmall, "class " + std::string(to_string(cls)) + " has only " +
                                                std::to_string(members.size()) + " instances");
    }
    seeded_shuffle(std::span(members), rng);
    const auto sizes = split_sizes(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      assignment[members[k]] = k < sizes.train ? 0 : (k < sizes.train + sizes.val ? 1 : 2);
    }
  }

  SplitManifest m;
  m.seed = seed;
  m.source_checksum = dataset.source_checksum;
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    auto& list = assignment[i] == 0 ? m.train : (assignment[i] == 1 ? m.val : m.test);
    list.push_back(dataset.instances[i].id);
  }
  return m;
}

std::string manifest_to_json(const SplitManifest& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["ratios"] = m.ratios;
  j["source_checksum"] = m.source_checksum;
  j["train"] = m.train;
  j["val"] = m.val;
  j["test"] = m.test;
  return j.dump(2) + "\n";
}

SplitManifest manifest_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.ratios = j.at("ratios").get<std::array<int, 3>>();
    m.source_checksum = j.at("source_checksum").get<std::string>();
    m.train = j.at("train").get<std::vector<std::string>>();
    m.val = j.at("val").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("split manifest: ") + e.what());
  }
}

void write_manifest(const SplitManifest& m, const std::filesystem::path& path) { write_file(path, manifest_to_json(m)); }

SplitManifest read_manifest(const std::filesystem::path& path) { return manifest_from_json(read_file(path)); }

}  // namespace imhs::corpus
