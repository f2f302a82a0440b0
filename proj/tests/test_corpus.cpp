#include "imhs/corpus.hpp"
#include "imhs/error.hpp"
#include "imhs/text.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace imhs;
using namespace imhs::corpus;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(IMHS_BINARY_DIR) / "test-scratch" / "corpus";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::filesystem::path toxicn_file(int implicit, int neutral, int explicit_rows) {
  std::string s = "id,content,toxic,expression\n";
  int id = 0;
  auto row = [&](const char* tox, const char* expr) {
    s += std::to_string(id) + ",\"text " + std::to_string(id) + ", with comma\"," + tox + "," + expr + "\n";
    ++id;
  };
  for (int i = 0; i < std::max({implicit, neutral, explicit_rows}); ++i) {
    if (i < implicit) row("1", "2");
    if (i < neutral) row("0", "0");
    if (i < explicit_rows) row("1", "1");
  }
  auto path = scratch("toxicn_" + std::to_string(implicit) + ".csv");
  write_file(path, s);
  return path;
}

Dataset synthetic(std::size_t pos, std::size_t neg) {
  Dataset d;
  for (std::size_t i = 0; i < pos + neg; ++i) {
    d.instances.push_back({"x" + std::to_string(i), "t" + std::to_string(i), i < pos ? Label::ImHate : Label::NoHate});
  }
  d.source_checksum = "synthetic";
  return d;
}

}  // namespace

TEST_CASE("ToxiCN adapter keeps implicit and non-toxic rows") {
  auto ds = load_dataset(toxicn_file(5645, 5550, 816), Format::ToxiCN);
  auto stats = class_stats(ds);
  CHECK(stats.im_hate == 5645);
  CHECK(stats.no_hate == 5550);
  CHECK(stats.total() == 11195);
  CHECK(ds.skipped_rows == 816);
  CHECK(ds.instances[0].text == "text 0, with comma");
  CHECK(ds.source_checksum == file_sha256(ds.source));
}

TEST_CASE("ISHate adapter") {
  std::string s = "message_id,text,hateful_layer,implicit_layer\n";
  for (int i = 0; i < 1238; ++i) s += "i" + std::to_string(i) + ",coded " + std::to_string(i) + ",HS,Implicit HS\n";
  for (int i = 0; i < 17869; ++i) s += "n" + std::to_string(i) + ",plain " + std::to_string(i) + ",Non-HS,\n";
  for (int i = 0; i < 40; ++i) s += "e" + std::to_string(i) + ",overt " + std::to_string(i) + ",HS,Explicit HS\n";
  auto path = scratch("ishate.csv");
  write_file(path, s);
  auto ds = load_dataset(path, Format::ISHate);
  CHECK(class_stats(ds) == ClassStats{1238, 17869});
  CHECK(ds.find("i7").label == Label::ImHate);
}

TEST_CASE("Latent adapter and positive ratio") {
  std::string s = "ID\tpost\tclass\n";
  for (int i = 0; i < 7100; ++i) s += "p" + std::to_string(i) + "\tcoded " + std::to_string(i) + "\timplicit_hate\n";
  for (int i = 0; i < 13291; ++i) s += "q" + std::to_string(i) + "\tplain " + std::to_string(i) + "\tnot_hate\n";
  for (int i = 0; i < 30; ++i) s += "r" + std::to_string(i) + "\tovert " + std::to_string(i) + "\texplicit_hate\n";
  auto path = scratch("latent.tsv");
  write_file(path, s);
  auto stats = class_stats(load_dataset(path, Format::Latent));
  CHECK(stats.total() == 20391);
  CHECK(stats.positive_ratio() == doctest::Approx(7100.0 / 20391.0).epsilon(1e-15));
  CHECK(stats.positive_ratio() == doctest::Approx(0.3482).epsilon(1e-4));
}

TEST_CASE("unknown label names the row") {
  auto path = scratch("bad.jsonl");
  write_file(path, "{\"id\": \"a\", \"text\": \"x\", \"label\": \"no_hate\"}\n"
                   "{\"id\": \"row-17\", \"text\": \"y\", \"label\": \"maybe\"}\n");
  try {
    load_dataset(path, Format::GenericJsonl);
    FAIL("expected BadLabel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadLabel);
    CHECK(std::string(e.what()).find("row-17") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_format("parquet"), Error);
}

TEST_CASE("text is normalized and loading is idempotent") {
  auto path = scratch("nfc.jsonl");
  write_file(path, "{\"id\": \"a\", \"text\": \"  cafe\xCC\x81 \\n\", \"label\": \"im_hate\"}\n"
                   "{\"id\": \"b\", \"text\": \"ok\", \"label\": \"no_hate\"}\n");
  auto a = load_dataset(path, Format::GenericJsonl);
  CHECK(a.instances[0].text == "caf\xC3\xA9");
  auto b = load_dataset(path, Format::GenericJsonl);
  REQUIRE(a.instances.size() == b.instances.size());
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    CHECK(a.instances[i].id == b.instances[i].id);
    CHECK(a.instances[i].text == b.instances[i].text);
  }
  write_file(scratch("empty.jsonl"), "");
  CHECK_THROWS_AS(load_dataset(scratch("empty.jsonl"), Format::GenericJsonl), Error);
}

TEST_CASE("split sizes follow the flooring rule") {
  auto ds = load_dataset(toxicn_file(5645, 5550, 0), Format::ToxiCN);
  auto m = split(ds, 42);
  CHECK(m.train.size() == 8956);
  CHECK(m.val.size() == 564 + 555);
  CHECK(m.test.size() == 565 + 555);
  CHECK(class_stats(ds, m.train) == ClassStats{4516, 4440});
  CHECK(class_stats(ds, m.val) == ClassStats{564, 555});
  CHECK(class_stats(ds, m.test) == ClassStats{565, 555});

  auto single = split(synthetic(10, 0), 1);
  CHECK(single.train.size() == 8);
  CHECK(single.val.size() == 1);
  CHECK(single.test.size() == 1);

  CHECK_THROWS_AS(split(synthetic(2, 10), 1), Error);
  CHECK(class_stats(ds, {}) == ClassStats{});
}

TEST_CASE("split is deterministic and seed-sensitive") {
  auto ds = synthetic(120, 230);
  auto a = split(ds, 9);
  auto b = split(ds, 9);
  CHECK(manifest_to_json(a) == manifest_to_json(b));
  CHECK(split(ds, 10).test != a.test);

  auto path = scratch("manifest.json");
  write_manifest(a, path);
  CHECK(read_manifest(path) == a);
  CHECK(manifest_from_json(manifest_to_json(a)) == a);
}

TEST_CASE("split partitions and stays close to proportional for every class size") {
  // Flooring train and val puts the rounding slack in test: a class of size n
  // gets test = n - floor(0.8n) - floor(0.1n), at most 1.4 above 0.1n.
  for (std::size_t pos = 3; pos <= 60; ++pos) {
    for (std::size_t neg : {3u, 7u, 10u, 19u, 36u}) {
      auto ds = synthetic(pos, neg);
      auto m = split(ds, pos * 31 + neg);
      std::set<std::string> seen;
      for (const auto* list : {&m.train, &m.val, &m.test})
        for (const auto& id : *list) CHECK(seen.insert(id).second);
      CHECK(seen.size() == ds.instances.size());
      CHECK(class_stats(ds, m.train) + class_stats(ds, m.val) + class_stats(ds, m.test) == class_stats(ds));

      for (auto [n, label] : {std::pair{pos, Label::ImHate}, std::pair{neg, Label::NoHate}}) {
        auto count = [&](const std::vector<std::string>& ids) {
          auto s = class_stats(ds, ids);
          return double(label == Label::ImHate ? s.im_hate : s.no_hate);
        };
        CHECK(std::abs(count(m.train) - 0.8 * n) < 1.0);
        CHECK(std::abs(count(m.val) - 0.1 * n) < 1.0);
        CHECK(std::abs(count(m.test) - 0.1 * n) <= 1.4 + 1e-9);
      }
    }
  }
}
