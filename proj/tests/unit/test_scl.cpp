#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "detectlab/errors.hpp"
#include "detectlab/scl.hpp"
#include "util.hpp"

using namespace detectlab;

namespace {

ad::Vector vec(std::initializer_list<double> xs) {
  ad::Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Corpus styled(std::size_t per_class, std::uint64_t seed, const std::string& prefix, const std::string& gen = "g",
              const std::string& ai_prefix = "x") {
  std::mt19937_64 rng(seed);
  std::vector<TextRecord> rs;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool ai = i % 2;
    std::string text;
    for (int w = 0; w < 8; ++w) text += (ai ? ai_prefix : "y") + std::to_string(rng() % 20) + " ";
    rs.push_back({text, ai ? Label::Ai : Label::Human, ai ? gen : "human", "d", prefix + std::to_string(i)});
  }
  return Corpus(prefix, rs);
}

EncoderSpec small_spec() {
  EncoderSpec s;
  s.hidden_dim = 16;
  s.ff_dim = 32;
  s.layers = 1;
  s.max_len = 16;
  return s;
}

SclConfig scl_cfg(int epochs) {
  SclConfig c;
  c.train.learning_rate = 3e-3;
  c.train.epochs = epochs;
  c.train.seed = 5;
  c.contrastive_batch = 16;
  c.temperature = 0.1;
  return c;
}

}  // namespace

TEST_SUITE("scl") {
  TEST_CASE("centroid examples") {
    const std::vector<losses::LabeledEmbedding> samples = {
        {vec({1, 0}), Label::Human}, {vec({0, 1}), Label::Human}, {vec({-1, 0}), Label::Ai}};
    const auto c = compute_centroids(samples);
    CHECK(c.human.isApprox(vec({std::sqrt(0.5), std::sqrt(0.5)})));
    CHECK(c.ai.isApprox(vec({-1, 0})));
    CHECK(c.human_count == 2);
    CHECK(c.ai_count == 1);
    const auto d = centroid_classify(c, vec({-2, 0.1}));
    CHECK(d.label == Label::Ai);
    CHECK(d.margin > 0);
    CHECK(centroid_classify(c, vec({1, 1})).label == Label::Human);

    const std::vector<losses::LabeledEmbedding> humans_only = {{vec({1, 0}), Label::Human}};
    CHECK_THROWS_AS(compute_centroids(humans_only), ValidationError);
    const std::vector<losses::LabeledEmbedding> cancel = {
        {vec({1, 0}), Label::Human}, {vec({1, 0}), Label::Ai}, {vec({-1, 0}), Label::Ai}};
    CHECK_THROWS_AS(compute_centroids(cancel), DegenerateError);
  }

  TEST_CASE("equidistant embedding is a tie and goes to HUMAN") {
    CentroidPair c;
    c.human = vec({1, 0});
    c.ai = vec({0, 1});
    const auto d = centroid_classify(c, vec({1, 1}));
    CHECK(std::abs(d.margin) < 1e-12);
    CHECK(d.label == Label::Human);
    CHECK_THROWS_AS(centroid_classify(c, vec({0, 0})), DegenerateError);
  }

  TEST_CASE("adaptation alpha endpoints and midpoint") {
    CentroidPair c;
    c.human = vec({1, 0, 0});
    c.ai = vec({0, 1, 0});
    const std::vector<ad::Vector> adapt = {vec({0, 0, 1}), vec({0, 0, 1})};
    const auto a0 = adapt_ai_centroid(c, adapt, 0.0);
    CHECK(a0.ai == c.ai);
    const auto a1 = adapt_ai_centroid(c, adapt, 1.0);
    CHECK(a1.ai.isApprox(vec({0, 0, 1})));
    const auto half = adapt_ai_centroid(c, adapt, 0.5);
    CHECK(half.ai.isApprox(vec({0, std::sqrt(0.5), std::sqrt(0.5)})));
    for (const auto* out : {&a0, &a1, &half}) CHECK(out->human == c.human);
    CHECK_THROWS_AS(adapt_ai_centroid(c, adapt, 1.5), ValidationError);
    CHECK_THROWS_AS(adapt_ai_centroid(c, std::vector<ad::Vector>{}, 0.5), ValidationError);
  }

  TEST_CASE("centroid JSON round-trips") {
    CentroidPair c;
    c.human = vec({0.1, 0.2, 0.3});
    c.ai = vec({1.0 / 3, -0.5, 1e-17});
    c.human_count = 4;
    c.ai_count = 9;
    c.alpha = 0.25;
    c.source_checkpoint_hash = "00ff";
    const auto back = centroids_from_json(centroids_to_json(c));
    CHECK(back.human == c.human);
    CHECK(back.ai == c.ai);
    CHECK(back.human_count == 4);
    CHECK(back.ai_count == 9);
    CHECK(back.alpha == 0.25);
    CHECK(back.source_checkpoint_hash == "00ff");
    CHECK_THROWS_AS(centroids_from_json("{}"), ParseError);
  }

  TEST_CASE("contrastive training separates styles") {
    const auto train = styled(32, 1, "train");
    auto m = make_style_model(train, small_spec(), 8, 3, 1);
    const auto h = train_scl(m, train, scl_cfg(8));
    REQUIRE(h.epoch_loss.size() == 8);
    // chance level for a batch of 16 is ln 15
    CHECK(h.epoch_loss.back() < std::log(15.0));
    CHECK(h.epoch_loss.back() < h.epoch_loss.front());

    const auto test = styled(16, 2, "test");
    double intra = 0, inter = 0;
    std::size_t n_intra = 0, n_inter = 0;
    std::vector<ad::Vector> zs;
    for (const auto& r : test) zs.push_back(m.embed(r.text));
    for (std::size_t i = 0; i < zs.size(); ++i) {
      CHECK(zs[i].norm() == doctest::Approx(1.0));
      for (std::size_t j = i + 1; j < zs.size(); ++j) {
        const double s = zs[i].dot(zs[j]);
        if (test[i].label == test[j].label) {
          intra += s;
          ++n_intra;
        } else {
          inter += s;
          ++n_inter;
        }
      }
    }
    CHECK(intra / static_cast<double>(n_intra) > inter / static_cast<double>(n_inter));

    const auto c = compute_centroids(m, train);
    std::size_t correct = 0;
    for (const auto& r : test) correct += centroid_classify(m, c, r.text).label == r.label;
    CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) >= 0.9);
  }

  TEST_CASE("few-shot adaptation leaves the model untouched and keeps sets disjoint") {
    const auto train = styled(16, 1, "train");
    auto m = make_style_model(train, small_spec(), 8, 3, 1);
    train_scl(m, train, scl_cfg(2));
    const auto target = styled(20, 9, "target", "new-gen", "x");
    const auto before = m.checksum();
    const auto r = few_shot_eval(m, train, target, 5, 7);
    CHECK(m.checksum() == before);
    CHECK(r.target_generator == "new-gen");
    CHECK(r.k == 5);
    CHECK(r.adaptation_ids.size() == 5);
    CHECK(r.eval_size == target.size() - 5);
    CHECK(r.k_shot.total() == r.eval_size);
    CHECK(r.zero_shot.total() == r.eval_size);
    std::set<std::string> adapt(r.adaptation_ids.begin(), r.adaptation_ids.end());
    CHECK(adapt.size() == 5);
    // same seed, same draw
    CHECK(few_shot_eval(m, train, target, 5, 7).adaptation_ids == r.adaptation_ids);

    const auto k0 = few_shot_eval(m, train, target, 0, 7);
    CHECK(k0.k_shot == k0.zero_shot);
    CHECK(k0.eval_size == target.size());

    CHECK_THROWS_AS(few_shot_eval(m, train, target, 500, 7), ValidationError);
    const auto base = compute_centroids(m, train);
    CHECK_THROWS_AS(few_shot_eval_sets(m, base, target, target, 1.0), ValidationError);
  }

  TEST_CASE("scl training errors") {
    const auto train = styled(4, 1, "t");
    auto m = make_style_model(train, small_spec(), 8, 3, 1);
    auto cfg = scl_cfg(1);
    cfg.temperature = 0;
    CHECK_THROWS_AS(train_scl(m, train, cfg), ValidationError);
    const auto one_ai = train.filter("x", [](const TextRecord& r) { return r.label == Label::Human || r.record_id == "t1"; });
    CHECK_THROWS_AS(train_scl(m, one_ai, scl_cfg(1)), TrainingError);
    const auto before = m.checksum();
    CHECK(train_scl(m, train, scl_cfg(0)).epoch_loss.empty());
    CHECK(m.checksum() == before);
  }
}
