#include <doctest.h>

#include <cmath>
#include <random>

#include "detectlab/errors.hpp"
#include "detectlab/gan.hpp"
#include "util.hpp"

using namespace detectlab;

namespace {

ad::Vector v3(double h, double a, double f) {
  ad::Vector v(3);
  v << h, a, f;
  return v;
}

Corpus separable(std::size_t per_class, std::uint64_t seed, const std::string& prefix) {
  std::mt19937_64 rng(seed);
  std::vector<TextRecord> rs;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool ai = i % 2;
    std::string text;
    for (int w = 0; w < 8; ++w) text += (ai ? "x" : "y") + std::to_string(rng() % 30) + " ";
    rs.push_back({text, ai ? Label::Ai : Label::Human, ai ? "g" : "human", "d", prefix + std::to_string(i)});
  }
  return Corpus(prefix, rs);
}

GanConfig small_gan(int epochs) {
  GanConfig c;
  c.train.learning_rate = 3e-3;
  c.train.epochs = epochs;
  c.train.batch_size = 8;
  c.train.seed = 2;
  c.noise_dim = 8;
  c.generator_hidden = 16;
  c.discriminator_hidden = 16;
  return c;
}

EncoderSpec small_spec() {
  EncoderSpec s;
  s.hidden_dim = 16;
  s.ff_dim = 32;
  s.layers = 1;
  s.max_len = 16;
  return s;
}

}  // namespace

TEST_SUITE("gan") {
  TEST_CASE("softmax is a distribution") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 30);
    for (int i = 0; i < 50; ++i) {
      const auto p = softmax(v3(n(rng), n(rng), n(rng)));
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK((p.array() >= 0).all());
    }
    CHECK(softmax(v3(1000, 1000, 1000)).isApprox(ad::Vector::Constant(3, 1.0 / 3)));
  }

  TEST_CASE("verdict ignores FAKE and breaks ties toward HUMAN") {
    CHECK(gan_verdict(v3(2, 1, 5)) == Label::Human);
    CHECK(gan_verdict(v3(1, 2, 5)) == Label::Ai);
    CHECK(gan_verdict(v3(0.3, 0.3, -1)) == Label::Human);
    CHECK(gan_ai_probability(v3(0, 0, 9)) == 0.5);
    CHECK(gan_ai_probability(v3(0, std::log(3.0), 0)) == doctest::Approx(0.75));
    CHECK_THROWS_AS(gan_verdict(ad::Vector::Zero(2)), ContractError);
  }

  TEST_CASE("property: FAKE logit does not affect the verdict") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 3);
    for (int i = 0; i < 200; ++i) {
      auto l = v3(n(rng), n(rng), n(rng));
      const auto verdict = gan_verdict(l);
      const auto prob = gan_ai_probability(l);
      l(2) = n(rng) * 100;
      CHECK(gan_verdict(l) == verdict);
      CHECK(gan_ai_probability(l) == doctest::Approx(prob).epsilon(1e-12));
    }
  }

  TEST_CASE("zero generator has a constant output") {
    const auto g = Generator::zeros(4, 5, 6);
    std::mt19937_64 rng(2);
    const auto a = g.generate(testutil::random_unit(4, rng));
    const auto b = g.generate(testutil::random_unit(4, rng) * 7);
    CHECK(a.size() == 6);
    CHECK(a == b);
    CHECK_THROWS_AS(g.generate(ad::Vector::Zero(3)), ContractError);
  }

  TEST_CASE("discriminator logits come out of the tape forward") {
    const Discriminator d(5, 7, 1);
    std::mt19937_64 rng(4);
    const auto e = testutil::random_unit(5, rng);
    ad::Tape tape;
    const ad::Vector via_tape = d.forward(tape, tape.constant(e.transpose())).value().row(0).transpose();
    CHECK(via_tape.size() == 3);
    CHECK(via_tape == d.logits(e));
  }

  TEST_CASE("learns a separable toy task") {
    const auto train = separable(40, 1, "train");
    const auto test = separable(20, 2, "test");
    const auto cfg = small_gan(15);
    auto d = make_gan_detector(train, small_spec(), cfg, 1);
    const auto h = gan_train(d, train, cfg);
    CHECK(h.discriminator_loss.size() == 15);
    CHECK(h.generator_loss.size() == 15);
    std::size_t correct = 0;
    for (const auto& r : test) correct += gan_predict(d, r.text) == r.label;
    CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) >= 0.9);
  }

  TEST_CASE("frozen encoder stays fixed; training is deterministic") {
    const auto train = separable(10, 1, "t");
    auto cfg = small_gan(2);
    cfg.freeze_encoder = true;
    auto d = make_gan_detector(train, small_spec(), cfg, 1);
    const auto enc_before = checksum(d.encoder.parameters());
    const auto disc_before = checksum(d.discriminator.parameters());
    gan_train(d, train, cfg);
    CHECK(checksum(d.encoder.parameters()) == enc_before);
    CHECK(checksum(d.discriminator.parameters()) != disc_before);

    cfg.freeze_encoder = false;
    auto a = make_gan_detector(train, small_spec(), cfg, 1);
    auto b = make_gan_detector(train, small_spec(), cfg, 1);
    CHECK(gan_train(a, train, cfg).discriminator_loss == gan_train(b, train, cfg).discriminator_loss);
    CHECK(gan_logits(a, "x1 x2") == gan_logits(b, "x1 x2"));
  }

  TEST_CASE("training errors") {
    const auto train = separable(5, 1, "t");
    auto cfg = small_gan(1);
    auto d = make_gan_detector(train, small_spec(), cfg, 1);
    cfg.noise_dim = 3;
    CHECK_THROWS_AS(gan_train(d, train, cfg), ContractError);
    const auto ais = train.filter("a", [](const TextRecord& r) { return r.label == Label::Ai; });
    CHECK_THROWS_AS(gan_train(d, ais, small_gan(1)), TrainingError);
  }
}
