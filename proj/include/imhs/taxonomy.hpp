#pragma once

#include "imhs/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace imhs::taxonomy {

/// Cosine similarity of two equal-length vectors, clamped to [-1, 1].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v) {
  using Scalar = typename DerivedA::Scalar;
  if (u.size() != v.size()) {
    throw Error(ErrorKind::DimMismatch,
                "cosine over dims " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (!(nu > Scalar(0)) || !(nv > Scalar(0))) {
    throw Error(ErrorKind::ZeroVector, "cosine similarity of a zero-norm vector");
  }
  const Scalar s = u.dot(v) / (nu * nv);
  return std::clamp(s, Scalar(-1), Scalar(1));
}

struct CandidateCodetype {
  std::string name;
  Eigen::VectorXd vector;
  bool present_zh = false;
  bool present_en = false;
};

enum class Stage { Zh, En };

/// JSONL: {"name", "present_zh", "present_en", "vector"} per line.
std::vector<CandidateCodetype> load_candidates(const std::filesystem::path& path);

std::vector<CandidateCodetype> filter_by_presence(const std::vector<CandidateCodetype>& cands, Stage stage);

struct Removal {
  std::string removed;
  std::string kept;
  double similarity;
};

struct PruneResult {
  std::vector<CandidateCodetype> retained;
  std::vector<Removal> log;
};

inline constexpr double kDefaultSimilarityThreshold = 0.9;

/// Greedy scan in input order: a candidate is dropped iff its similarity to
/// some already-retained candidate is strictly greater than the threshold.
/// The log names the first retained candidate that exceeded it.
PruneResult prune_by_similarity(const std::vector<CandidateCodetype>& cands,
                                double threshold = kDefaultSimilarityThreshold);

/// Pairwise cosine matrix; symmetric with an exact unit diagonal.
Eigen::MatrixXd similarity_matrix(const std::vector<CandidateCodetype>& cands);
std::string similarity_matrix_csv(const std::vector<CandidateCodetype>& cands);

// --- annotation aggregation ---

/// items x categories vote counts, with a fixed number of raters per item.
struct AnnotationMatrix {
  Eigen::MatrixXi counts;
  int raters = 0;
  std::vector<std::string> categories;
};

struct KappaResult {
  double kappa;
  double p_bar;
  double p_e;
};

KappaResult fleiss_kappa(const AnnotationMatrix& m);

struct ItemVotes {
  std::string item_id;
  std::vector<std::string> primary;       // exactly three
  std::optional<std::string> escalation;  // fourth annotator
};

struct ConsensusOutcome {
  std::string item_id;
  /// Empty when the item needed escalation and had no fourth vote.
  std::optional<std::string> category;
  bool escalated = false;
};

inline bool is_unresolved(const ConsensusOutcome& o) { return !o.category.has_value(); }

/// 2-of-3 quorum, otherwise the fourth vote; missing fourth vote -> unresolved.
std::vector<ConsensusOutcome> consensus_labels(const std::vector<ItemVotes>& votes);

/// Annotation CSV: item_id,annotator_id,category (header optional).
/// Annotators are ordered by first appearance; the fourth distinct
/// annotator on an item is its escalation vote.
std::vector<ItemVotes> load_annotations(const std::filesystem::path& path);
std::vector<ItemVotes> parse_annotations(std::string_view csv);

/// Matrix over the three primary votes of every item; categories sorted.
AnnotationMatrix build_annotation_matrix(const std::vector<ItemVotes>& votes);

std::map<std::string, int> final_counts(const std::vector<ConsensusOutcome>& outcomes);

/// Category distribution CSV: category,count,share.
std::string distribution_csv(const std::map<std::string, int>& counts);

/// Highest counts first, ties by category name, excluded categories skipped.
std::vector<std::string> select_top_k(const std::map<std::string, int>& counts, std::size_t k = 6,
                                      const std::set<std::string>& exclude = {"None"});

}  // namespace imhs::taxonomy
