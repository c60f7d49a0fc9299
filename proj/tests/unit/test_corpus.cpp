#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "detectlab/corpus.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/synthetic.hpp"
#include "detectlab/text.hpp"
#include "util.hpp"

using namespace detectlab;

namespace {

Corpus make_corpus(std::size_t humans, std::size_t ais, const std::string& gen = "g") {
  std::vector<TextRecord> rs;
  for (std::size_t i = 0; i < humans; ++i) rs.push_back({"human text " + std::to_string(i), Label::Human, "human", "d", "h" + std::to_string(i)});
  for (std::size_t i = 0; i < ais; ++i) rs.push_back({"ai text " + std::to_string(i), Label::Ai, gen, "d", "a" + std::to_string(i)});
  return Corpus("c", rs);
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("utf8 decoding replaces invalid bytes") {
    const auto cps = text::decode_utf8("a\xC3\xA9\xFF");
    REQUIRE(cps.size() == 3);
    CHECK(cps[1] == U'é');
    CHECK(cps[2] == U'�');
    CHECK(text::encode_utf8(text::decode_utf8("“x” — y")) == "“x” — y");
    CHECK(text::length("héllo") == 5);
  }

  TEST_CASE("jsonl parsing maps labels and defaults") {
    const auto c = parse_jsonl(R"({"text":"hello","label":"human"}
{"text":"x y","label":"AI","generator":"gpt","domain":"news","id":"r7"}
{"text":"z","label":"ai"}
)",
                               "f.jsonl");
    REQUIRE(c.size() == 3);
    CHECK(c[0].label == Label::Human);
    CHECK(c[0].generator == "human");
    CHECK(c[0].domain == "unknown");
    CHECK(c[0].record_id == "f.jsonl:1");
    CHECK(c[1].label == Label::Ai);
    CHECK(c[1].generator == "gpt");
    CHECK(c[1].record_id == "r7");
    CHECK(c[2].generator == "unknown");
  }

  TEST_CASE("jsonl errors") {
    CHECK_THROWS_AS(parse_jsonl(R"({"text":"x","label":"robot"})", "f"), ValidationError);
    CHECK_THROWS_AS(parse_jsonl(R"({"text":"   ","label":"ai"})", "f"), ValidationError);
    try {
      parse_jsonl("{\"text\":\"a\",\"label\":\"ai\"}\n{broken\n", "f");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_jsonl(R"({"text":"a","label":"human","generator":"gpt"})", "f"), ValidationError);
    CHECK_THROWS_AS(load_jsonl("/nonexistent/file.jsonl"), Error);
  }

  TEST_CASE("load save load round-trips") {
    testutil::TempDir dir("corpus");
    const auto c = parse_jsonl("{\"text\":\"caf\\u00e9 \\\"q\\\"\",\"label\":\"ai\",\"generator\":\"g\",\"domain\":\"d\",\"id\":\"1\"}\n"
                               "{\"text\":\"b\",\"label\":\"human\"}\n",
                               "x");
    save_jsonl(c, dir.path / "a.jsonl");
    const auto once = load_jsonl(dir.path / "a.jsonl");
    save_jsonl(once, dir.path / "a.jsonl");
    const auto twice = load_jsonl(dir.path / "a.jsonl");
    CHECK(once.records() == c.records());
    CHECK(twice == once);
  }

  TEST_CASE("stratified split sizes and determinism") {
    const auto c = make_corpus(50, 50);
    const auto s = stratified_split(c, {0.8, 0.1, 0.1}, 7);
    CHECK(s.train.size() == 80);
    CHECK(s.val.size() == 10);
    CHECK(s.test.size() == 10);
    CHECK(s.train.count(Label::Human) == 40);
    CHECK(s.val.count(Label::Human) == 5);
    CHECK(s.test.count(Label::Human) == 5);
    const auto again = stratified_split(c, {0.8, 0.1, 0.1}, 7);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);
    // partition of the input
    std::multiset<std::string> ids;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      for (const auto& r : *part) ids.insert(r.record_id);
    }
    CHECK(ids.size() == 100);
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == 100);
  }

  TEST_CASE("stratified split errors") {
    CHECK_THROWS_AS(stratified_split(make_corpus(10, 10), {1.0, 0.0, 0.0}, 1), ValidationError);
    CHECK_THROWS_AS(stratified_split(make_corpus(10, 10), {0.5, 0.2, 0.2}, 1), ValidationError);
    try {
      stratified_split(make_corpus(10, 2), {0.8, 0.1, 0.1}, 1);
      FAIL("expected StratificationError");
    } catch (const StratificationError& e) {
      CHECK(std::string(e.what()).find("g") != std::string::npos);
    }
  }

  TEST_CASE("property: split ratios within one record per stratum") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<TextRecord> rs;
      const int strata = 1 + static_cast<int>(rng() % 3);
      for (int s = 0; s < strata; ++s) {
        const auto n = 3 + rng() % 40;
        for (std::size_t i = 0; i < n; ++i) {
          rs.push_back({"t", Label::Ai, "g" + std::to_string(s), "d", std::to_string(s) + ":" + std::to_string(i)});
        }
      }
      const auto nh = 3 + rng() % 40;
      for (std::size_t i = 0; i < nh; ++i) rs.push_back({"t", Label::Human, "human", "d", "h" + std::to_string(i)});
      const Corpus c("c", rs);
      const SplitFractions f{0.6, 0.2, 0.2};
      const auto s = stratified_split(c, f, rng());
      std::map<std::string, std::size_t> total, tr, va, te;
      for (const auto& r : c) ++total[r.generator];
      for (const auto& r : s.train) ++tr[r.generator];
      for (const auto& r : s.val) ++va[r.generator];
      for (const auto& r : s.test) ++te[r.generator];
      for (const auto& [g, n] : total) {
        CHECK(std::abs(static_cast<double>(tr[g]) - f.train * n) <= 1.0 + 1e-9 + (n * f.val < 1 || n * f.test < 1 ? 2.0 : 0.0));
        CHECK(std::abs(static_cast<double>(va[g]) - f.val * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(te[g]) - f.test * n) <= 1.0);
        CHECK(tr[g] + va[g] + te[g] == n);
      }
    }
  }

  TEST_CASE("corpus_stats examples") {
    auto one = [](std::vector<std::string> texts) {
      std::vector<TextRecord> rs;
      for (std::size_t i = 0; i < texts.size(); ++i) rs.push_back({texts[i], Label::Ai, "g", "d", std::to_string(i)});
      return corpus_stats(Corpus("c", rs));
    };
    auto s = one({"a1"});
    CHECK(s.digit_density == doctest::Approx(0.5));
    CHECK(s.char_diversity == doctest::Approx(2));
    CHECK(s.mean_length == doctest::Approx(2));
    s = one({"aaaa"});
    CHECK(s.digit_density == 0.0);
    CHECK(s.char_diversity == 1.0);
    CHECK(s.mean_length == 4.0);
    s = one({"ab", "1234"});
    CHECK(s.digit_density == doctest::Approx(0.5));
    CHECK(s.mean_length == doctest::Approx(3));
    CHECK_THROWS_AS(corpus_stats(Corpus()), EmptyInputError);
  }

  TEST_CASE("property: corpus_stats is permutation invariant") {
    const auto b = make_synthetic({.train_per_source = 20, .test_per_source = 5, .unseen_per_source = 5});
    auto rs = b.test_ood.records();
    std::mt19937_64 rng(11);
    for (int t = 0; t < 5; ++t) {
      std::shuffle(rs.begin(), rs.end(), rng);
      const auto s = corpus_stats(Corpus("p", rs));
      const auto base = corpus_stats(b.test_ood);
      CHECK(s.digit_density == doctest::Approx(base.digit_density).epsilon(1e-12));
      CHECK(s.char_diversity == doctest::Approx(base.char_diversity).epsilon(1e-12));
      CHECK(s.mean_length == doctest::Approx(base.mean_length).epsilon(1e-12));
    }
  }

  TEST_CASE("synthetic corpora are deterministic and shifted") {
    SyntheticConfig cfg;
    cfg.train_per_source = 30;
    cfg.test_per_source = 20;
    cfg.unseen_per_source = 20;
    const auto a = make_synthetic(cfg);
    const auto b = make_synthetic(cfg);
    CHECK(a.train == b.train);
    CHECK(a.unseen == b.unseen);
    const auto in = corpus_stats(a.test_in), ood = corpus_stats(a.test_ood);
    CHECK(ood.digit_density > in.digit_density);
    CHECK(ood.char_diversity > in.char_diversity);
    CHECK(ood.mean_length > in.mean_length);
    CHECK(in.digit_density == 0.0);
    cfg.seed = 1;
    CHECK(!(make_synthetic(cfg).train == a.train));
  }

  TEST_CASE("cap_per_stratum") {
    const auto c = make_corpus(10, 20);
    const auto capped = cap_per_stratum(c, 5, 1);
    CHECK(capped.count(Label::Human) == 5);
    CHECK(capped.count(Label::Ai) == 5);
    CHECK(cap_per_stratum(c, 5, 1) == capped);
  }
}
