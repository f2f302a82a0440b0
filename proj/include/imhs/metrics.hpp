#pragma once

#include "imhs/label.hpp"

#include <cstddef>
#include <vector>

namespace imhs::metrics {

/// Positive class is ImHate.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  [[nodiscard]] std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const std::vector<Label>& preds, const std::vector<Label>& golds);

struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1_positive = 0.0;
  double f1_macro = 0.0;
  double abstain_rate = 0.0;
  std::size_t unscored = 0;
};

/// 0/0 anywhere yields 0 for that quantity.
MetricReport f1_from_counts(const ConfusionCounts& c);

}  // namespace imhs::metrics
