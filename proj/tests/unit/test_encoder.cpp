#include <doctest.h>

#include <random>

#include <json.hpp>

#include "detectlab/checkpoint.hpp"
#include "detectlab/encoder.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/gan.hpp"
#include "detectlab/scl.hpp"
#include "detectlab/supervised.hpp"
#include "util.hpp"

using namespace detectlab;

namespace {

EncoderSpec tiny_spec(int layers = 2) {
  EncoderSpec s;
  s.vocab_size = 7;
  s.hidden_dim = 4;
  s.layers = layers;
  s.ff_dim = 6;
  s.max_len = 8;
  return s;
}

// Scalar readout r . encode(ids) through a fresh tape.
double readout(const EncoderModel& m, const std::vector<int>& ids, const ad::Vector& r) {
  return m.encode(ids).dot(r);
}

Corpus toy_corpus() {
  std::vector<TextRecord> rs;
  for (int i = 0; i < 6; ++i) {
    rs.push_back({"alpha beta gamma alpha beta", Label::Human, "human", "d", "h" + std::to_string(i)});
    rs.push_back({"delta epsilon zeta delta zeta", Label::Ai, "g", "d", "a" + std::to_string(i)});
  }
  return Corpus("toy", rs);
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("tokenize definitional examples") {
    const Tokenizer t({"a", "b", "<unk>"}, 2, 256);
    CHECK(t.tokenize("a b c") == std::vector<int>{0, 1, 2});
    const Tokenizer short_t({"a", "b", "<unk>"}, 2, 2);
    CHECK(short_t.tokenize("a a a") == std::vector<int>{0, 0});
    CHECK(short_t.tokenize_full("a a a").size() == 3);
    CHECK(t.tokenize("A, b!") == t.tokenize("A, b!"));
    CHECK_THROWS_AS(t.tokenize("   "), ValidationError);
    CHECK(Tokenizer::split("Hello, World!") == std::vector<std::string>{"hello", ",", "world", "!"});
  }

  TEST_CASE("vocabulary build keeps min_freq tokens, unk first") {
    const std::vector<std::string> texts = {"b a a", "c b", "a d"};
    const auto t = Tokenizer::build(texts, 2);
    CHECK(t.token(0) == "<unk>");
    CHECK(t.tokens() == std::vector<std::string>{"<unk>", "a", "b"});
    CHECK(t.tokenize("d a") == std::vector<int>{0, 1});
  }

  TEST_CASE("zero encoder gives a constant zero output") {
    const auto m = EncoderModel::zeros(tiny_spec());
    const auto a = m.encode(std::vector<int>{1, 2, 3});
    const auto b = m.encode(std::vector<int>{6});
    CHECK(a.size() == 4);
    CHECK(a.isZero(0.0));
    CHECK(b.isZero(0.0));
  }

  TEST_CASE("output shape, determinism and range errors") {
    const EncoderModel m(tiny_spec(), 3);
    CHECK(m.encode(std::vector<int>{2}).size() == 4);
    CHECK(m.encode(std::vector<int>(8, 1)).size() == 4);
    const std::vector<int> ids = {1, 5, 2};
    CHECK(m.encode(ids) == m.encode(ids));
    CHECK_THROWS_AS(m.encode(std::vector<int>{7}), ValidationError);
    CHECK_THROWS_AS(m.encode(std::vector<int>{}), ValidationError);
    // longer inputs are truncated to max_len
    std::vector<int> longer(12, 1);
    CHECK(m.encode(longer) == m.encode(std::vector<int>(8, 1)));
  }

  TEST_CASE("parameter gradients match central differences") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      EncoderModel m(tiny_spec(), rng());
      // larger weights so the test exercises non-linear regions
      for (auto* p : m.parameters()) p->value *= 8.0;
      std::vector<int> ids(1 + rng() % 6);
      for (auto& id : ids) id = static_cast<int>(rng() % 7);
      const ad::Vector r = testutil::random_unit(4, rng);
      ad::Tape tape;
      auto h = m.forward(tape, ids);
      tape.backward(h, r.transpose());
      for (auto* p : m.parameters()) {
        const auto analytic = tape.param_grad(*p);
        const auto numeric = testutil::numeric_grad(p->value, [&](const Eigen::MatrixXd& v) {
          const auto saved = p->value;
          p->value = v;
          const double out = readout(m, ids, r);
          p->value = saved;
          return out;
        });
        const Eigen::MatrixXd a = analytic.size() ? analytic : Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
        CHECK_MESSAGE(testutil::max_rel_err(a, numeric) < 1e-3, p->name);
      }
    }
  }

  TEST_CASE("projection head is unit-norm and scale-invariant") {
    std::mt19937_64 rng(2);
    const ProjectionHead head(4, 3, 9);
    for (int i = 0; i < 10; ++i) {
      const auto v = testutil::random_unit(4, rng) * 3.0;
      const auto z = head.project(v);
      CHECK(z.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK((head.project(2.0 * v) - z).norm() < 1e-12);
      CHECK(z.dot(z) == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(head.project(ad::Vector::Zero(4)), DegenerateError);
    ad::Vector bad = ad::Vector::Ones(4);
    bad(1) = std::nan("");
    CHECK_THROWS_AS(head.project(bad), ValidationError);
  }

  TEST_CASE("input gradient: constant loss is zero") {
    const EncoderModel m(tiny_spec(), 1);
    LossHook constant{[](const ad::Vector&) { return 3.0; }, [](const ad::Vector& h) { return ad::Vector::Zero(h.size()); }};
    const auto g = grad_wrt_input(m, std::vector<int>{1, 2, 3}, constant);
    CHECK(g.onehot.rows() == 3);
    CHECK(g.onehot.cols() == 7);
    CHECK(g.onehot.isZero(0.0));
    LossHook broken{[](const ad::Vector&) { return 0.0; }, nullptr};
    CHECK_THROWS_AS(grad_wrt_input(m, std::vector<int>{1}, broken), ContractError);
  }

  TEST_CASE("input gradient: closed form on a pooling-only model") {
    auto spec = tiny_spec(0);
    spec.positional = false;
    const EncoderModel m(spec, 4);
    std::mt19937_64 rng(1);
    const ad::Vector r = testutil::random_unit(4, rng);
    const std::vector<int> ids = {3, 1, 3, 6};
    LossHook dot{[r](const ad::Vector& h) { return h.dot(r); }, [r](const ad::Vector&) { return r; }};
    const auto g = grad_wrt_input(m, ids, dot);
    const ad::Vector expected = m.token_embedding().value * r / 4.0;
    for (int t = 0; t < 4; ++t) CHECK((g.onehot.row(t).transpose() - expected).norm() < 1e-12);
  }

  TEST_CASE("input gradient matches finite differences of the one-hot relaxation") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
      EncoderModel m(tiny_spec(), rng());
      for (auto* p : m.parameters()) p->value *= 8.0;
      std::vector<int> ids(2 + rng() % 4);
      for (auto& id : ids) id = static_cast<int>(rng() % 7);
      const ad::Vector r = testutil::random_unit(4, rng);
      LossHook hook{[r](const ad::Vector& h) { return std::tanh(h.dot(r)); },
                    [r](const ad::Vector& h) {
                      const double t = std::tanh(h.dot(r));
                      return ad::Vector((1 - t * t) * r);
                    }};
      const auto g = grad_wrt_input(m, ids, hook);
      Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ids.size()), 7);
      for (std::size_t t = 0; t < ids.size(); ++t) onehot(static_cast<Eigen::Index>(t), ids[t]) = 1.0;
      const auto numeric = testutil::numeric_grad(onehot, [&](const Eigen::MatrixXd& x) {
        ad::Tape tape;
        auto h = m.forward_embedded(tape, tape.constant(x * m.token_embedding().value));
        return std::tanh(ad::Vector(h.value().row(0).transpose()).dot(r));
      });
      CHECK(testutil::max_rel_err(g.onehot, numeric) < 1e-3);
      CHECK(g.loss == doctest::Approx(hook.value(m.encode(ids))));
    }
  }

  TEST_CASE("checksum tracks parameter values") {
    EncoderModel m(tiny_spec(), 1);
    const auto before = checksum(m.parameters());
    CHECK(checksum(m.parameters()) == before);
    m.parameters()[0]->value(0, 0) += 1e-9;
    CHECK(checksum(m.parameters()) != before);
    CHECK(checksum_hex(0x1f).size() == 16);
  }
}

TEST_SUITE("encoder") {
  TEST_CASE("checkpoints round-trip exactly") {
    const auto corpus = toy_corpus();
    EncoderSpec spec = tiny_spec();
    auto sup = make_supervised_detector(corpus, spec, 3, 1);
    sup.threshold = 0.4;
    const auto sup2 = supervised_from_checkpoint(checkpoint_json(sup));
    CHECK(sup2.tokenizer == sup.tokenizer);
    CHECK(checksum(sup2.parameters()) == checksum(sup.parameters()));
    CHECK(sup2.threshold == 0.4);
    CHECK(predict_proba(sup2, "alpha beta") == predict_proba(sup, "alpha beta"));

    const auto style = make_style_model(corpus, spec, 3, 4, 1);
    const auto style2 = style_model_from_checkpoint(checkpoint_json(style));
    CHECK(style2.checksum() == style.checksum());

    GanConfig gc;
    gc.noise_dim = 5;
    gc.generator_hidden = 6;
    gc.discriminator_hidden = 7;
    const auto gan = make_gan_detector(corpus, spec, gc, 1);
    const auto gan2 = gan_from_checkpoint(checkpoint_json(gan));
    CHECK(gan_logits(gan2, "delta zeta") == gan_logits(gan, "delta zeta"));
    CHECK(checkpoint_kind(checkpoint_json(gan)) == ModelKind::Gan);
  }

  TEST_CASE("checkpoint loading rejects wrong version, kind and garbage") {
    const auto corpus = toy_corpus();
    const auto sup = make_supervised_detector(corpus, tiny_spec(), 3, 1);
    const auto text = checkpoint_json(sup);
    auto j = nlohmann::json::parse(text);
    REQUIRE(j["version"] == 1);
    j["version"] = 2;
    CHECK_THROWS_AS(supervised_from_checkpoint(j.dump()), ValidationError);
    j.erase("version");
    CHECK_THROWS_AS(supervised_from_checkpoint(j.dump()), ValidationError);
    j = nlohmann::json::parse(text);
    j["format"] = "other";
    CHECK_THROWS_AS(supervised_from_checkpoint(j.dump()), ValidationError);
    CHECK_THROWS_AS(style_model_from_checkpoint(text), ValidationError);
    CHECK_THROWS_AS(supervised_from_checkpoint("{not json"), ParseError);
  }
}
