#include "imhs/error.hpp"
#include "imhs/metrics.hpp"

#include <doctest.h>

#include <random>

using namespace imhs;
using namespace imhs::metrics;

namespace {

std::vector<Label> labels(std::initializer_list<int> bits) {
  std::vector<Label> out;
  for (int b : bits) out.push_back(b ? Label::ImHate : Label::NoHate);
  return out;
}

// Dice form of F1 computed directly from a per-item tally.
struct Oracle {
  double f1_pos, f1_neg;
};

Oracle oracle(const std::vector<Label>& preds, const std::vector<Label>& golds) {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == Label::ImHate;
    const bool g = golds[i] == Label::ImHate;
    if (p && g) ++tp;
    if (p && !g) ++fp;
    if (!p && g) ++fn;
    if (!p && !g) ++tn;
  }
  auto dice = [](long hit, long a, long b) { return hit == 0 && a + b == 0 ? 0.0 : 2.0 * hit / double(2 * hit + a + b); };
  return {dice(tp, fp, fn), dice(tn, fn, fp)};
}

}  // namespace

TEST_CASE("confusion and F1 examples") {
  auto c = confusion(labels({1, 1, 0, 0, 1}), labels({1, 0, 0, 1, 1}));
  CHECK(c == ConfusionCounts{2, 1, 1, 1});
  auto r = f1_from_counts(c);
  CHECK(r.precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1_positive == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1_macro == doctest::Approx((2.0 / 3.0 + 0.5) / 2.0));

  auto none = f1_from_counts(confusion(labels({0, 0}), labels({0, 0})));
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1_positive == 0.0);
  CHECK(none.f1_macro == 0.5);

  auto perfect = f1_from_counts(confusion(labels({1, 0}), labels({1, 0})));
  CHECK(perfect.f1_positive == 1.0);
  CHECK(perfect.f1_macro == 1.0);

  CHECK_THROWS_AS(confusion(labels({1}), labels({1, 0})), Error);
  CHECK(f1_from_counts(confusion({}, {})).f1_positive == 0.0);
}

TEST_CASE("F1 agrees with the tally oracle") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = rng() % 40;
    std::vector<Label> p, g;
    for (std::size_t i = 0; i < n; ++i) {
      p.push_back(rng() % 2 ? Label::ImHate : Label::NoHate);
      g.push_back(rng() % 3 ? Label::ImHate : Label::NoHate);
    }
    auto r = f1_from_counts(confusion(p, g));
    auto o = oracle(p, g);
    CHECK(std::abs(r.f1_positive - o.f1_pos) <= 1e-12);
    CHECK(std::abs(r.f1_macro - (o.f1_pos + o.f1_neg) / 2) <= 1e-12);
    if (r.precision + r.recall > 0) {
      CHECK(std::abs(r.f1_positive - 2 * r.precision * r.recall / (r.precision + r.recall)) <= 1e-12);
    }
  }
}

TEST_CASE("macro F1 is symmetric under swapping the classes") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<Label> p, g;
    for (int i = 0; i < 15; ++i) {
      p.push_back(rng() % 2 ? Label::ImHate : Label::NoHate);
      g.push_back(rng() % 2 ? Label::ImHate : Label::NoHate);
    }
    std::vector<Label> pf, gf;
    for (auto l : p) pf.push_back(flip(l));
    for (auto l : g) gf.push_back(flip(l));
    CHECK(std::abs(f1_from_counts(confusion(p, g)).f1_macro - f1_from_counts(confusion(pf, gf)).f1_macro) <= 1e-12);
  }
}
