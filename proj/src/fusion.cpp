#include "imhs/fusion.hpp"

#include "imhs/text.hpp"

#include <json.hpp>

#include <charconv>
#include <map>

namespace imhs::fusion {

namespace {

constexpr std::string_view kSentenceSeparator = "\n";

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::Parse, "bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::I: return "I";
    case Strategy::II: return "II";
    case Strategy::III: return "III";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  if (s == "I") return Strategy::I;
  if (s == "II") return Strategy::II;
  if (s == "III") return Strategy::III;
  throw Error(ErrorKind::Parse, "unknown fusion strategy '" + std::string(s) + "'");
}

std::vector<std::string> build_inputs(std::string_view sentence, const kb::CodetypeSet& set, kb::InfoCombo combo,
                                      Strategy strategy) {
  auto join = [&](const kb::CodetypeSet& s) {
    return kb::render_info(s, combo) + std::string(kSentenceSeparator) + std::string(sentence);
  };
  if (strategy == Strategy::I) return {join(set)};
  std::vector<std::string> out;
  out.reserve(set.size());
  for (std::size_t k = 0; k < set.size(); ++k) out.push_back(join(set.only(k)));
  return out;
}

FeaturizeResult featurize_split(const std::vector<std::string>& ids, const corpus::Dataset& dataset,
                                const kb::CodetypeSet& set, std::optional<FeatureSpec> spec,
                                gateway::EmbeddingProvider& provider) {
  std::map<std::string_view, const corpus::Instance*> by_id;
  for (const auto& inst : dataset.instances) by_id.emplace(inst.id, &inst);

  const std::size_t d = provider.dim();
  const std::size_t dim = spec ? fused_dim(spec->strategy, set.size(), d) : d;

  FeaturizeResult result;
  std::vector<Eigen::VectorXd> rows;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::MissingField, "manifest id '" + id + "' not in dataset");
    }
    const corpus::Instance& inst = *it->second;
    try {
      Eigen::VectorXd row;
      if (!spec) {
        auto v = provider.embed(inst.text);
        gateway::validate_embedding(v, d);
        row = std::move(v.values);
      } else {
        std::vector<Eigen::VectorXd> parts;
        for (const auto& text : build_inputs(inst.text, set, spec->combo, spec->strategy)) {
          auto v = provider.embed(text);
          gateway::validate_embedding(v, d);
          parts.push_back(std::move(v.values));
        }
        row = fuse<double>(spec->strategy, parts, set.size());
      }
      rows.push_back(std::move(row));
      result.matrix.ids.push_back(inst.id);
      result.matrix.golds.push_back(inst.label);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DumpMiss) throw;
      result.missing.push_back(inst.id);
    }
  }

  auto& m = result.matrix;
  m.header = {provider.provider_id(), spec ? std::string(to_string(spec->strategy)) : "-",
              spec ? spec->combo.label() : "-", dim, rows.size()};
  m.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) m.features.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return result;
}

std::string matrix_to_csv(const FeatureMatrix& m) {
  nlohmann::ordered_json header;
  header["provider_id"] = m.header.provider_id;
  header["strategy"] = m.header.strategy;
  header["combo"] = m.header.combo;
  header["dim"] = m.header.dim;
  header["rows"] = m.header.rows;
  std::string out = header.dump() + "\n";
  for (Eigen::Index i = 0; i < m.features.rows(); ++i) {
    out += csv_escape(m.ids[static_cast<size_t>(i)]);
    out += ',';
    out += to_string(m.golds[static_cast<size_t>(i)]);
    for (Eigen::Index j = 0; j < m.features.cols(); ++j) {
      out += ',';
      out += format_double(m.features(i, j));
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix matrix_from_csv(std::string_view text) {
  const auto newline = text.find('\n');
  if (newline == std::string_view::npos) {
    throw Error(ErrorKind::Parse, "feature matrix has no header line");
  }
  FeatureMatrix m;
  try {
    const auto h = nlohmann::json::parse(text.substr(0, newline));
    m.header = {h.at("provider_id").get<std::string>(), h.at("strategy").get<std::string>(),
                h.at("combo").get<std::string>(), h.at("dim").get<std::size_t>(), h.at("rows").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("feature matrix header: ") + e.what());
  }
  const auto rows = parse_csv(text.substr(newline + 1));
  if (rows.size() != m.header.rows) {
    throw Error(ErrorKind::Parse, "feature matrix declares " + std::to_string(m.header.rows) + " rows, found " +
                                      std::to_string(rows.size()));
  }
  m.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.header.dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != m.header.dim + 2) {
      throw Error(ErrorKind::DimMismatch, "feature row " + std::to_string(i) + " has " + std::to_string(r.size() - 2) +
                                              " values, header dim " + std::to_string(m.header.dim));
    }
    m.ids.push_back(r[0]);
    if (r[1] == "im_hate") {
      m.golds.push_back(Label::ImHate);
    } else if (r[1] == "no_hate") {
      m.golds.push_back(Label::NoHate);
    } else {
      throw Error(ErrorKind::BadLabel, "feature row '" + r[0] + "' has label '" + r[1] + "'");
    }
    for (std::size_t j = 0; j < m.header.dim; ++j) {
      m.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(r[j + 2]);
    }
  }
  if (!m.features.allFinite()) {
    throw Error(ErrorKind::Parse, "feature matrix contains non-finite values");
  }
  return m;
}

void write_matrix(const FeatureMatrix& m, const std::filesystem::path& path) { write_file(path, matrix_to_csv(m)); }

FeatureMatrix read_matrix(const std::filesystem::path& path) { return matrix_from_csv(read_file(path)); }

}  // namespace imhs::fusion
