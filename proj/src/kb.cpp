#include "imhs/kb.hpp"

#include "imhs/error.hpp"
#include "imhs/text.hpp"

#include <json.hpp>

#include <set>

namespace imhs::kb {

namespace {

constexpr std::string_view kPartSeparator = " — ";

constexpr std::array<std::pair<CodetypeKey, std::string_view>, 6> kKeyNames{{
    {CodetypeKey::Abbreviation, "abbreviation"},
    {CodetypeKey::Metaphor, "metaphor"},
    {CodetypeKey::Irony, "irony"},
    {CodetypeKey::Pun, "pun"},
    {CodetypeKey::Idiom, "idiom"},
    {CodetypeKey::Argot, "argot"},
}};

LocalizedText read_localized(const nlohmann::json& entry, const char* field, std::string_view key) {
  if (!entry.contains(field) || !entry[field].is_object()) {
    throw Error(ErrorKind::MissingField, std::string("field '") + field + "' of codetype '" + std::string(key) + "'");
  }
  LocalizedText out;
  for (const auto& [lang, value] : entry[field].items()) {
    if (!value.is_string()) {
      throw Error(ErrorKind::MissingField,
                  std::string("field '") + field + "." + lang + "' of codetype '" + std::string(key) + "' is not a string");
    }
    out.emplace(lang, value.get<std::string>());
  }
  return out;
}

const std::string& localized(const LocalizedText& text, const std::string& language) {
  auto it = text.find(language);
  if (it == text.end()) {
    throw Error(ErrorKind::MissingField, "language '" + language + "' not present");
  }
  return it->second;
}

}  // namespace

std::string_view to_string(CodetypeKey key) {
  for (const auto& [k, name] : kKeyNames) {
    if (k == key) return name;
  }
  return "unknown";
}

CodetypeKey parse_codetype_key(std::string_view s) {
  for (const auto& [k, name] : kKeyNames) {
    if (name == s) return k;
  }
  throw Error(ErrorKind::Parse, "unknown codetype key '" + std::string(s) + "'");
}

CodetypeSet::CodetypeSet(std::vector<Codetype> codetypes, std::string language)
    : codetypes_(std::move(codetypes)), language_(std::move(language)) {}

CodetypeSet CodetypeSet::with_language(std::string language) const {
  for (const auto& c : codetypes_) {
    for (const auto* field : {&c.name, &c.explanation, &c.sample}) {
      if (!field->contains(language)) {
        throw Error(ErrorKind::MissingField,
                    "codetype '" + std::string(to_string(c.key)) + "' has no '" + language + "' text");
      }
    }
  }
  return CodetypeSet(codetypes_, std::move(language));
}

CodetypeSet CodetypeSet::only(std::size_t index) const {
  return CodetypeSet({codetypes_.at(index)}, language_);
}

std::string InfoCombo::label() const {
  if (empty()) return "-";
  // Spelled in Name, Samp, Expl order to match the result-table rows.
  std::string out;
  auto append = [&out](std::string_view s) {
    if (!out.empty()) out += '+';
    out += s;
  };
  if (has(Part::Name)) append("Name");
  if (has(Part::Samp)) append("Samp");
  if (has(Part::Expl)) append("Expl");
  return out;
}

InfoCombo InfoCombo::parse(std::string_view label) {
  if (label == "-" || label.empty() || label == "baseline") return InfoCombo{};
  std::uint8_t bits = 0;
  size_t start = 0;
  while (start <= label.size()) {
    size_t end = label.find('+', start);
    if (end == std::string_view::npos) end = label.size();
    std::string_view part = label.substr(start, end - start);
    if (part == "Name") {
      bits |= static_cast<std::uint8_t>(Part::Name);
    } else if (part == "Expl") {
      bits |= static_cast<std::uint8_t>(Part::Expl);
    } else if (part == "Samp") {
      bits |= static_cast<std::uint8_t>(Part::Samp);
    } else {
      throw Error(ErrorKind::Parse, "unknown combo part '" + std::string(part) + "'");
    }
    start = end + 1;
  }
  return InfoCombo(bits);
}

CodetypeSet parse_codetypes(std::string_view json_text, const LoadOptions& options) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("KB file: ") + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorKind::Parse, "KB file must be a top-level list");
  }

  std::vector<Codetype> codetypes;
  std::set<CodetypeKey> seen;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("key") || !entry["key"].is_string()) {
      throw Error(ErrorKind::MissingField, "field 'key' of codetype #" + std::to_string(codetypes.size()));
    }
    const auto key_text = entry["key"].get<std::string>();
    const CodetypeKey key = parse_codetype_key(key_text);
    if (!seen.insert(key).second) {
      throw Error(ErrorKind::DuplicateKey, "codetype '" + key_text + "' appears more than once");
    }
    Codetype c{key, read_localized(entry, "name", key_text), read_localized(entry, "explanation", key_text),
               read_localized(entry, "sample", key_text)};

    std::set<std::string> languages;
    for (const auto* field : {&c.name, &c.explanation, &c.sample}) {
      for (const auto& [lang, _] : *field) languages.insert(lang);
    }
    languages.insert(options.language);
    const std::array<std::pair<const char*, const LocalizedText*>, 3> fields{
        {{"name", &c.name}, {"explanation", &c.explanation}, {"sample", &c.sample}}};
    for (const auto& lang : languages) {
      for (const auto& [field_name, field] : fields) {
        auto it = field->find(lang);
        if (it == field->end() || trim(it->second).empty()) {
          throw Error(ErrorKind::MissingField,
                      std::string("field '") + field_name + "." + lang + "' of codetype '" + key_text + "'");
        }
      }
    }
    codetypes.push_back(std::move(c));
  }

  if (!options.allow_noncanonical_size && codetypes.size() != kCanonicalSize) {
    throw Error(ErrorKind::WrongCardinality,
                "expected " + std::to_string(kCanonicalSize) + " codetypes, found " + std::to_string(codetypes.size()));
  }
  if (codetypes.empty()) {
    throw Error(ErrorKind::WrongCardinality, "KB file contains no codetypes");
  }
  return CodetypeSet(std::move(codetypes), options.language);
}

CodetypeSet load_codetypes(const std::filesystem::path& path, const LoadOptions& options) {
  return parse_codetypes(read_file(path), options);
}

std::string render_info(const CodetypeSet& set, InfoCombo combo) {
  if (combo.empty()) {
    throw Error(ErrorKind::EmptyCombo, "render_info needs at least one of Name/Expl/Samp");
  }
  const std::string& lang = set.language();
  std::string out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Codetype& c = set.codetypes()[i];
    if (i > 0) out += '\n';
    bool first = true;
    auto append = [&](const LocalizedText& text) {
      if (!first) out += kPartSeparator;
      out += localized(text, lang);
      first = false;
    };
    if (combo.has(Part::Name)) append(c.name);
    if (combo.has(Part::Samp)) append(c.sample);
    if (combo.has(Part::Expl)) append(c.explanation);
  }
  return out;
}

std::vector<InfoCombo> enumerate_combos() {
  using enum Part;
  return {
      InfoCombo{Name},
      InfoCombo{Expl},
      InfoCombo{Samp},
      InfoCombo{Name, Expl},
      InfoCombo{Name, Samp},
      InfoCombo{Samp, Expl},
      InfoCombo{Name, Samp, Expl},
  };
}

}  // namespace imhs::kb
