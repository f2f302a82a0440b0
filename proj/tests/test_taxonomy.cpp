#include "imhs/error.hpp"
#include "imhs/taxonomy.hpp"
#include "imhs/text.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace imhs;
using namespace imhs::taxonomy;

namespace {

const std::filesystem::path kFixtures = std::filesystem::path(IMHS_SOURCE_DIR) / "tests" / "fixtures" / "taxonomy";

CandidateCodetype cand(std::string name, std::vector<double> v, bool zh = true, bool en = true) {
  return {std::move(name), Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())), zh, en};
}

std::vector<std::string> names(const std::vector<CandidateCodetype>& cs) {
  std::vector<std::string> out;
  for (const auto& c : cs) out.push_back(c.name);
  return out;
}

// Fleiss' kappa from individual ratings: agreement is the share of ordered
// rater pairs on an item that chose the same category.
double kappa_oracle(const Eigen::MatrixXi& counts, int n) {
  const int items = static_cast<int>(counts.rows());
  const int cats = static_cast<int>(counts.cols());
  double agree_sum = 0.0;
  std::vector<double> per_cat(cats, 0.0);
  for (int i = 0; i < items; ++i) {
    std::vector<int> ratings;
    for (int j = 0; j < cats; ++j)
      for (int r = 0; r < counts(i, j); ++r) ratings.push_back(j);
    int agree = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b && ratings[a] == ratings[b]) ++agree;
    agree_sum += double(agree) / double(n * (n - 1));
    for (int r : ratings) per_cat[r] += 1.0;
  }
  const double p_bar = agree_sum / items;
  double p_e = 0.0;
  for (double c : per_cat) p_e += (c / (items * n)) * (c / (items * n));
  return (p_bar - p_e) / (1.0 - p_e);
}

Eigen::MatrixXi random_counts(std::mt19937_64& rng, int items, int cats, int raters) {
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(items, cats);
  std::uniform_int_distribution<int> pick(0, cats - 1);
  for (int i = 0; i < items; ++i)
    for (int r = 0; r < raters; ++r) m(i, pick(rng)) += 1;
  return m;
}

}  // namespace

TEST_CASE("cosine similarity examples") {
  Eigen::Vector3d u(1, 2, 3);
  CHECK(cosine_similarity(u, u) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == 0.0);
  CHECK(cosine_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(cosine_similarity(Eigen::Vector2f(1, 0), Eigen::Vector2f(-1, 0)) == -1.0f);
  CHECK_THROWS_AS(cosine_similarity(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(3)), Error);
  CHECK_THROWS_AS(cosine_similarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)), Error);
}

TEST_CASE("cosine stays within [-1, 1] on near-parallel vectors") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd v(7);
    for (auto& x : v) x = g(rng);
    double s = cosine_similarity(v, v * 3.0);
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
  }
}

TEST_CASE("filter_by_presence") {
  std::vector<CandidateCodetype> cs{cand("a", {1, 0}, true, false), cand("b", {0, 1})};
  CHECK(names(filter_by_presence(cs, Stage::En)) == std::vector<std::string>{"b"});
  CHECK(names(filter_by_presence(cs, Stage::Zh)) == std::vector<std::string>{"a", "b"});
  CHECK(filter_by_presence({}, Stage::En).empty());
}

TEST_CASE("prune_by_similarity") {
  SUBCASE("near-duplicate removed, first kept") {
    auto r = prune_by_similarity({cand("a", {1, 0}), cand("b", {1, 0.1})});
    CHECK(names(r.retained) == std::vector<std::string>{"a"});
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].removed == "b");
    CHECK(r.log[0].kept == "a");
    CHECK(r.log[0].similarity == doctest::Approx(1.0 / std::sqrt(1.01)).epsilon(1e-12));
  }
  SUBCASE("orthogonal pair retained") {
    CHECK(prune_by_similarity({cand("a", {1, 0}), cand("b", {0, 1})}).retained.size() == 2);
  }
  SUBCASE("similarity exactly at the threshold is retained") {
    // 9 / (1 * 10) is exactly the double nearest 0.9.
    std::vector<CandidateCodetype> cs{cand("a", {1, 0, 0, 0}), cand("b", {9, 3, 3, 1})};
    REQUIRE(cosine_similarity(cs[0].vector, cs[1].vector) == 0.9);
    CHECK(prune_by_similarity(cs, 0.9).retained.size() == 2);
  }
  SUBCASE("fixture file matches the hand-flagged pairs") {
    auto cs = filter_by_presence(load_candidates(kFixtures / "candidates.jsonl"), Stage::En);
    auto r = prune_by_similarity(cs);
    auto expected = parse_csv(read_file(kFixtures / "expected_removals.csv"));
    REQUIRE(r.log.size() + 1 == expected.size());
    for (std::size_t i = 0; i < r.log.size(); ++i) {
      CHECK(r.log[i].removed == expected[i + 1][0]);
      CHECK(r.log[i].kept == expected[i + 1][1]);
    }
  }
}

TEST_CASE("prune properties on random candidates") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    std::vector<CandidateCodetype> cs;
    for (int i = 0; i < 12; ++i) {
      Eigen::VectorXd v(3);
      for (auto& x : v) x = g(rng);
      cs.push_back({"c" + std::to_string(i), v, true, true});
    }
    const double thr = 0.8;
    auto r = prune_by_similarity(cs, thr);
    for (std::size_t i = 0; i < r.retained.size(); ++i)
      for (std::size_t j = i + 1; j < r.retained.size(); ++j)
        CHECK(cosine_similarity(r.retained[i].vector, r.retained[j].vector) <= thr);
    CHECK(r.retained.size() + r.log.size() == cs.size());
    auto again = prune_by_similarity(r.retained, thr);
    CHECK(names(again.retained) == names(r.retained));
    CHECK(again.log.empty());
  }
}

TEST_CASE("similarity matrix") {
  CHECK_THROWS_AS(similarity_matrix({}), Error);
  auto one = similarity_matrix({cand("a", {3, 4})});
  CHECK(one.rows() == 1);
  CHECK(one(0, 0) == 1.0);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<CandidateCodetype> cs;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd v(4);
    for (auto& x : v) x = g(rng);
    cs.push_back({"c" + std::to_string(i), v, true, true});
  }
  auto m = similarity_matrix(cs);
  CHECK(m == m.transpose());
  for (int i = 0; i < 5; ++i) {
    CHECK(m(i, i) == 1.0);
    for (int j = 0; j < 5; ++j) CHECK(m(i, j) == doctest::Approx(cosine_similarity(cs[i].vector, cs[j].vector)));
  }
  auto csv = parse_csv(similarity_matrix_csv(cs));
  CHECK(csv.size() == 6);
  CHECK(csv[0].size() == 6);
}

TEST_CASE("fleiss kappa examples") {
  SUBCASE("perfect agreement") {
    AnnotationMatrix m{Eigen::MatrixXi(2, 2), 3, {"x", "y"}};
    m.counts << 3, 0, 0, 3;
    CHECK(fleiss_kappa(m).kappa == 1.0);
  }
  SUBCASE("every item split evenly") {
    AnnotationMatrix m{Eigen::MatrixXi(2, 2), 2, {"x", "y"}};
    m.counts << 1, 1, 1, 1;
    auto k = fleiss_kappa(m);
    CHECK(k.p_bar == 0.0);
    CHECK(k.p_e == 0.5);
    CHECK(k.kappa == -1.0);
  }
  SUBCASE("invalid matrices") {
    AnnotationMatrix bad_sum{Eigen::MatrixXi(1, 2), 3, {"x", "y"}};
    bad_sum.counts << 2, 0;
    CHECK_THROWS_AS(fleiss_kappa(bad_sum), Error);
    AnnotationMatrix one_rater{Eigen::MatrixXi(1, 2), 1, {"x", "y"}};
    one_rater.counts << 1, 0;
    CHECK_THROWS_AS(fleiss_kappa(one_rater), Error);
  }
}

TEST_CASE("fleiss kappa matches the pairwise oracle and ignores column order") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 50; ++t) {
    const int cats = 2 + t % 5;
    const int raters = 2 + t % 4;
    AnnotationMatrix m{random_counts(rng, 10, cats, raters), raters, {}};
    for (int j = 0; j < cats; ++j) m.categories.push_back("c" + std::to_string(j));
    auto k = fleiss_kappa(m);
    CHECK(std::abs(k.kappa - kappa_oracle(m.counts, raters)) <= 1e-12);

    std::vector<int> perm(cats);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    AnnotationMatrix p = m;
    for (int j = 0; j < cats; ++j) p.counts.col(j) = m.counts.col(perm[j]);
    CHECK(std::abs(fleiss_kappa(p).kappa - k.kappa) <= 1e-12);
  }
}

TEST_CASE("single nonzero cell per row gives kappa one") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXi c = Eigen::MatrixXi::Zero(8, 4);
    for (int i = 0; i < 8; ++i) c(i, static_cast<int>(rng() % 4)) = 3;
    CHECK(fleiss_kappa({c, 3, {"a", "b", "c", "d"}}).kappa == 1.0);
  }
}

TEST_CASE("consensus labels") {
  auto out = consensus_labels({
      {"1", {"A", "A", "B"}, std::nullopt},
      {"2", {"A", "B", "C"}, "B"},
      {"3", {"A", "B", "C"}, std::nullopt},
  });
  REQUIRE(out.size() == 3);
  CHECK(out[0].category == "A");
  CHECK_FALSE(out[0].escalated);
  CHECK(out[1].category == "B");
  CHECK(out[1].escalated);
  CHECK(is_unresolved(out[2]));
}

TEST_CASE("consensus winner never has fewer primary votes than another category") {
  const std::vector<std::string> cats{"A", "B", "C", "D"};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        ItemVotes v{"i", {cats[a], cats[b], cats[c]}, "D"};
        auto out = consensus_labels({v})[0];
        if (out.escalated) continue;
        auto votes_for = [&](const std::string& x) { return std::count(v.primary.begin(), v.primary.end(), x); };
        for (const auto& other : cats) CHECK(votes_for(*out.category) >= votes_for(other));
      }
}

TEST_CASE("annotation csv aggregation") {
  const std::string csv =
      "item_id,annotator_id,category\n"
      "s1,ann1,Irony\ns1,ann2,Irony\ns1,ann3,Pun\n"
      "s2,ann1,Argot\ns2,ann2,Pun\ns2,ann3,Irony\ns2,ann4,Pun\n"
      "s3,ann1,None\ns3,ann2,None\ns3,ann3,None\n";
  auto votes = parse_annotations(csv);
  REQUIRE(votes.size() == 3);
  CHECK(votes[1].escalation == "Pun");

  auto m = build_annotation_matrix(votes);
  CHECK(m.raters == 3);
  CHECK(m.categories == std::vector<std::string>{"Argot", "Irony", "None", "Pun"});
  CHECK(m.counts.rowwise().sum().minCoeff() == 3);

  auto counts = final_counts(consensus_labels(votes));
  CHECK(counts.at("Irony") == 1);
  CHECK(counts.at("Pun") == 1);
  CHECK(counts.at("None") == 1);
  auto dist = parse_csv(distribution_csv(counts));
  CHECK(dist[0] == std::vector<std::string>{"category", "count", "share"});

  CHECK_THROWS_AS(parse_annotations("s1,a,X\ns1,b,Y\n"), Error);
  CHECK_THROWS_AS(parse_annotations("s1,a,X\ns1,a,Y\ns1,b,Y\ns1,c,Y\n"), Error);
}

TEST_CASE("select_top_k on the final-round counts") {
  const std::map<std::string, int> counts{
      {"Irony", 62},        {"Metaphor", 34}, {"Argot", 30},    {"Pun", 18},        {"Abbreviation", 16}, {"Idiom", 9},
      {"Rhetorical", 7}, {"Loanword", 2},   {"Hyperbole", 1}, {"Deformation", 1}, {"None", 20}};
  CHECK(select_top_k(counts) ==
        std::vector<std::string>{"Irony", "Metaphor", "Argot", "Pun", "Abbreviation", "Idiom"});
  CHECK_THROWS_AS(select_top_k(counts, 11), Error);
  CHECK(select_top_k({{"b", 3}, {"a", 3}, {"c", 5}}, 3) == std::vector<std::string>{"c", "a", "b"});
}
