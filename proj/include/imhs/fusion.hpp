#pragma once

#include "imhs/corpus.hpp"
#include "imhs/error.hpp"
#include "imhs/gateway.hpp"
#include "imhs/kb.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace imhs::fusion {

/// I: one embedding of all codetypes + sentence.
/// II: per-codetype embeddings concatenated (dim K*d).
/// III: per-codetype embeddings averaged element-wise (dim d).
enum class Strategy { I, II, III };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

inline std::size_t fused_dim(Strategy s, std::size_t k, std::size_t d) { return s == Strategy::II ? k * d : d; }

/// Encoder inputs for one sentence. Strategy I gives a single text; II and
/// III give K texts, the k-th carrying only codetype k's selected parts.
std::vector<std::string> build_inputs(std::string_view sentence, const kb::CodetypeSet& set, kb::InfoCombo combo,
                                      Strategy strategy);

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Combine the encoder outputs of build_inputs into one feature vector.
template <typename Scalar>
Vector<Scalar> fuse(Strategy strategy, std::span<const Vector<Scalar>> parts, std::size_t k) {
  const std::size_t expected = strategy == Strategy::I ? 1 : k;
  if (parts.size() != expected || parts.empty()) {
    throw Error(ErrorKind::PartCountMismatch,
                "strategy " + std::string(to_string(strategy)) + " needs " + std::to_string(expected) + " parts, got " +
                    std::to_string(parts.size()));
  }
  const Eigen::Index d = parts.front().size();
  for (const auto& p : parts) {
    if (p.size() != d) {
      throw Error(ErrorKind::DimMismatch, "fusion parts have dims " + std::to_string(d) + " and " +
                                              std::to_string(p.size()));
    }
  }
  switch (strategy) {
    case Strategy::I:
      return parts.front();
    case Strategy::II: {
      Vector<Scalar> out(d * static_cast<Eigen::Index>(parts.size()));
      for (std::size_t i = 0; i < parts.size(); ++i) out.segment(static_cast<Eigen::Index>(i) * d, d) = parts[i];
      return out;
    }
    case Strategy::III: {
      // Mean as an offset from the first part, so identical parts average to
      // exactly that part.
      const Vector<Scalar>& base = parts.front();
      Vector<Scalar> offset = Vector<Scalar>::Zero(d);
      for (const auto& p : parts.subspan(1)) offset += p - base;
      return base + offset / static_cast<Scalar>(parts.size());
    }
  }
  return {};
}

/// Combo + strategy for codetype-augmented features; nullopt is the raw-text baseline.
struct FeatureSpec {
  kb::InfoCombo combo;
  Strategy strategy;
};

struct MatrixHeader {
  std::string provider_id;
  std::string strategy;  // "-" for the baseline
  std::string combo;     // "-" for the baseline
  std::size_t dim = 0;
  std::size_t rows = 0;

  friend bool operator==(const MatrixHeader&, const MatrixHeader&) = default;
};

struct FeatureMatrix {
  MatrixHeader header;
  std::vector<std::string> ids;
  std::vector<Label> golds;
  Eigen::MatrixXd features;  // rows x dim
};

struct FeaturizeResult {
  FeatureMatrix matrix;
  /// Instances dropped because the dump had no vector for one of their inputs.
  std::vector<std::string> missing;
};

/// Rows follow `ids` order. Only DumpMiss is tolerated per instance.
FeaturizeResult featurize_split(const std::vector<std::string>& ids, const corpus::Dataset& dataset,
                                const kb::CodetypeSet& set, std::optional<FeatureSpec> spec,
                                gateway::EmbeddingProvider& provider);

/// JSON header line, then instance_id,gold,v1..vd rows.
std::string matrix_to_csv(const FeatureMatrix& m);
FeatureMatrix matrix_from_csv(std::string_view text);
void write_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_matrix(const std::filesystem::path& path);

}  // namespace imhs::fusion
