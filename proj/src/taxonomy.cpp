#include "imhs/taxonomy.hpp"

#include "imhs/text.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace imhs::taxonomy {

std::vector<CandidateCodetype> load_candidates(const std::filesystem::path& path) {
  std::vector<CandidateCodetype> out;
  int line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto values = j.at("vector").get<std::vector<double>>();
      CandidateCodetype c;
      c.name = j.at("name").get<std::string>();
      c.present_zh = j.value("present_zh", false);
      c.present_en = j.value("present_en", false);
      c.vector = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
      if (!c.vector.allFinite()) {
        throw Error(ErrorKind::Parse, "non-finite vector for candidate '" + c.name + "'");
      }
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<CandidateCodetype> filter_by_presence(const std::vector<CandidateCodetype>& cands, Stage stage) {
  std::vector<CandidateCodetype> out;
  std::copy_if(cands.begin(), cands.end(), std::back_inserter(out), [stage](const CandidateCodetype& c) {
    return stage == Stage::Zh ? c.present_zh : c.present_en;
  });
  return out;
}

PruneResult prune_by_similarity(const std::vector<CandidateCodetype>& cands, double threshold) {
  PruneResult result;
  for (const auto& cand : cands) {
    std::optional<Removal> hit;
    for (const auto& kept : result.retained) {
      const double s = cosine_similarity(cand.vector, kept.vector);
      if (s > threshold) {
        hit = Removal{cand.name, kept.name, s};
        break;
      }
    }
    if (hit) {
      result.log.push_back(*hit);
    } else {
      result.retained.push_back(cand);
    }
  }
  return result;
}

Eigen::MatrixXd similarity_matrix(const std::vector<CandidateCodetype>& cands) {
  if (cands.empty()) {
    throw Error(ErrorKind::InvalidMatrix, "similarity matrix needs at least one candidate");
  }
  const auto n = static_cast<Eigen::Index>(cands.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Validates the vector even though the diagonal is fixed.
    (void)cosine_similarity(cands[i].vector, cands[i].vector);
    m(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      m(i, j) = m(j, i) = cosine_similarity(cands[i].vector, cands[j].vector);
    }
  }
  return m;
}

std::string similarity_matrix_csv(const std::vector<CandidateCodetype>& cands) {
  const Eigen::MatrixXd m = similarity_matrix(cands);
  std::ostringstream out;
  out << "name";
  for (const auto& c : cands) out << ',' << csv_escape(c.name);
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << csv_escape(cands[static_cast<size_t>(i)].name);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
    out << '\n';
  }
  return out.str();
}

KappaResult fleiss_kappa(const AnnotationMatrix& m) {
  const int n = m.raters;
  const auto items = m.counts.rows();
  if (n < 2) {
    throw Error(ErrorKind::InvalidMatrix, "Fleiss' kappa needs at least two raters per item");
  }
  if (items == 0 || m.counts.cols() == 0) {
    throw Error(ErrorKind::InvalidMatrix, "empty annotation matrix");
  }
  if ((m.counts.array() < 0).any()) {
    throw Error(ErrorKind::InvalidMatrix, "negative vote count");
  }
  const Eigen::VectorXi row_sums = m.counts.rowwise().sum();
  for (Eigen::Index i = 0; i < items; ++i) {
    if (row_sums(i) != n) {
      throw Error(ErrorKind::InvalidMatrix, "row " + std::to_string(i) + " sums to " + std::to_string(row_sums(i)) +
                                                ", expected " + std::to_string(n));
    }
  }

  const Eigen::ArrayXXd counts = m.counts.cast<double>().array();
  const Eigen::ArrayXd per_item = (counts * (counts - 1.0)).rowwise().sum() / (double(n) * (n - 1));
  const double p_bar = per_item.mean();
  const Eigen::ArrayXd proportions = counts.colwise().sum().transpose() / (double(items) * n);
  const double p_e = proportions.square().sum();

  double kappa;
  if (p_e < 1.0) {
    kappa = (p_bar - p_e) / (1.0 - p_e);
  } else {
    // Every rating falls in one category, so agreement is total.
    kappa = 1.0;
  }
  return {kappa, p_bar, p_e};
}

std::vector<ConsensusOutcome> consensus_labels(const std::vector<ItemVotes>& votes) {
  std::vector<ConsensusOutcome> out;
  out.reserve(votes.size());
  for (const auto& item : votes) {
    if (item.primary.size() != 3) {
      throw Error(ErrorKind::InvalidMatrix, "item '" + item.item_id + "' has " + std::to_string(item.primary.size()) +
                                                " primary votes, expected 3");
    }
    std::map<std::string, int> tally;
    for (const auto& v : item.primary) ++tally[v];
    ConsensusOutcome o{item.item_id, std::nullopt, false};
    for (const auto& [category, count] : tally) {
      if (count >= 2) o.category = category;
    }
    if (!o.category) {
      o.escalated = true;
      o.category = item.escalation;
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<ItemVotes> parse_annotations(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (!rows.empty() && !rows.front().empty() && rows.front()[0] == "item_id") {
    rows.erase(rows.begin());
  }
  std::vector<ItemVotes> items;
  std::map<std::string, size_t> index;
  std::map<std::string, std::vector<std::string>> annotators;
  for (const auto& row : rows) {
    if (row.size() != 3) {
      throw Error(ErrorKind::Parse, "annotation row must have item_id,annotator_id,category");
    }
    const auto& item_id = row[0];
    auto [it, inserted] = index.emplace(item_id, items.size());
    if (inserted) items.push_back(ItemVotes{item_id, {}, std::nullopt});
    auto& seen = annotators[item_id];
    if (std::find(seen.begin(), seen.end(), row[1]) != seen.end()) {
      throw Error(ErrorKind::Parse, "annotator '" + row[1] + "' voted twice on item '" + item_id + "'");
    }
    seen.push_back(row[1]);
    auto& item = items[it->second];
    if (item.primary.size() < 3) {
      item.primary.push_back(trim(row[2]));
    } else if (!item.escalation) {
      item.escalation = trim(row[2]);
    } else {
      throw Error(ErrorKind::Parse, "item '" + item_id + "' has more than four votes");
    }
  }
  for (const auto& item : items) {
    if (item.primary.size() != 3) {
      throw Error(ErrorKind::Parse, "item '" + item.item_id + "' has fewer than three votes");
    }
  }
  return items;
}

std::vector<ItemVotes> load_annotations(const std::filesystem::path& path) { return parse_annotations(read_file(path)); }

AnnotationMatrix build_annotation_matrix(const std::vector<ItemVotes>& votes) {
  std::set<std::string> categories;
  for (const auto& item : votes) categories.insert(item.primary.begin(), item.primary.end());
  AnnotationMatrix m;
  m.raters = 3;
  m.categories.assign(categories.begin(), categories.end());
  m.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(votes.size()), static_cast<Eigen::Index>(categories.size()));
  for (size_t i = 0; i < votes.size(); ++i) {
    for (const auto& v : votes[i].primary) {
      const auto col = std::distance(m.categories.begin(), std::find(m.categories.begin(), m.categories.end(), v));
      m.counts(static_cast<Eigen::Index>(i), col) += 1;
    }
  }
  return m;
}

std::map<std::string, int> final_counts(const std::vector<ConsensusOutcome>& outcomes) {
  std::map<std::string, int> counts;
  for (const auto& o : outcomes) {
    if (o.category) ++counts[*o.category];
  }
  return counts;
}

std::string distribution_csv(const std::map<std::string, int>& counts) {
  int total = 0;
  for (const auto& [_, c] : counts) total += c;
  std::vector<std::pair<std::string, int>> rows(counts.begin(), counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::ostringstream out;
  out << "category,count,share\n";
  for (const auto& [category, c] : rows) {
    out << csv_escape(category) << ',' << c << ',' << format_double(total > 0 ? double(c) / total : 0.0) << '\n';
  }
  return out.str();
}

std::vector<std::string> select_top_k(const std::map<std::string, int>& counts, std::size_t k,
                                      const std::set<std::string>& exclude) {
  std::vector<std::pair<std::string, int>> eligible;
  for (const auto& [category, c] : counts) {
    if (c < 0) {
      throw Error(ErrorKind::InvalidMatrix, "negative count for '" + category + "'");
    }
    if (!exclude.contains(category)) eligible.emplace_back(category, c);
  }
  if (eligible.size() < k) {
    throw Error(ErrorKind::InsufficientCategories,
                "asked for " + std::to_string(k) + " categories, only " + std::to_string(eligible.size()) + " eligible");
  }
  // std::map iteration is already lexicographic, so a stable sort keeps ties in name order.
  std::stable_sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(eligible[i].first);
  return out;
}

}  // namespace imhs::taxonomy
