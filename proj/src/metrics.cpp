#include "imhs/metrics.hpp"

#include "imhs/error.hpp"

namespace imhs::metrics {

namespace {

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : double(num) / double(den); }

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double p = ratio(tp, tp + fp);
  const double r = ratio(tp, tp + fn);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

}  // namespace

ConfusionCounts confusion(const std::vector<Label>& preds, const std::vector<Label>& golds) {
  if (preds.size() != golds.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(preds.size()) + " predictions vs " + std::to_string(golds.size()) + " gold labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool pred_pos = preds[i] == Label::ImHate;
    const bool gold_pos = golds[i] == Label::ImHate;
    if (pred_pos && gold_pos) {
      ++c.tp;
    } else if (pred_pos) {
      ++c.fp;
    } else if (gold_pos) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

MetricReport f1_from_counts(const ConfusionCounts& c) {
  MetricReport r;
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.f1_positive = f1(c.tp, c.fp, c.fn);
  // Negative-class F1 swaps the roles of the two classes.
  r.f1_macro = 0.5 * (r.f1_positive + f1(c.tn, c.fn, c.fp));
  return r;
}

}  // namespace imhs::metrics
