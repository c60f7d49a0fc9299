#include "detectlab/scl.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <json.hpp>

#include "detectlab/errors.hpp"
#include "detectlab/optim.hpp"

namespace detectlab {

ad::Var StyleModel::forward(ad::Tape& tape, std::span<const int> ids) const {
  return head.forward(tape, encoder.forward(tape, ids));
}

ad::Vector StyleModel::embed_ids(std::span<const int> ids) const {
  ad::Tape tape;
  return forward(tape, ids).value().row(0).transpose();
}

ad::Vector StyleModel::embed(std::string_view text) const { return embed_ids(tokenizer.tokenize(text)); }

std::vector<ad::Parameter*> StyleModel::parameters() {
  auto ps = encoder.parameters();
  for (auto* p : head.parameters()) ps.push_back(p);
  return ps;
}

std::vector<const ad::Parameter*> StyleModel::parameters() const {
  auto ps = encoder.parameters();
  for (auto* p : head.parameters()) ps.push_back(p);
  return ps;
}

std::uint64_t StyleModel::checksum() const {
  const auto ps = parameters();
  return detectlab::checksum(ps);
}

StyleModel make_style_model(const Corpus& train, EncoderSpec spec, int projection_dim, std::uint64_t seed,
                            int min_freq) {
  StyleModel m;
  m.tokenizer = Tokenizer::build(train, min_freq, spec.max_len);
  spec.vocab_size = m.tokenizer.vocab_size();
  m.encoder = EncoderModel(spec, seed);
  m.head = ProjectionHead(spec.hidden_dim, projection_dim, seed + 7);
  return m;
}

TrainHistory train_scl(StyleModel& model, const Corpus& corpus, const SclConfig& cfg) {
  cfg.train.validate();
  if (!(cfg.temperature > 0.0)) throw ValidationError("temperature must be > 0");
  if (corpus.count(Label::Human) < 2 || corpus.count(Label::Ai) < 2) {
    throw TrainingError("contrastive training needs at least 2 samples per class");
  }
  std::vector<std::vector<int>> ids;
  std::vector<Label> labels;
  for (const auto& r : corpus) {
    ids.push_back(model.tokenizer.tokenize(r.text));
    labels.push_back(r.label);
  }

  TrainHistory history;
  if (cfg.train.epochs == 0) return history;

  const auto params = model.parameters();
  Adam optimizer(params, cfg.train.adam());
  optimizer.zero_grad();
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    const auto plans = losses::plan_contrastive_batches(labels, cfg.contrastive_batch,
                                                        cfg.train.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    double sum = 0.0;
    for (const auto& plan : plans) {
      ad::Tape tape;
      losses::ContrastiveBatch batch;
      batch.temperature = cfg.temperature;
      std::vector<ad::Var> outputs;
      for (auto idx : plan.members) {
        outputs.push_back(model.forward(tape, ids[idx]));
        batch.embeddings.push_back(outputs.back().value().row(0).transpose());
        batch.labels.push_back(labels[idx]);
      }
      batch.anchors = plan.anchors;
      auto result = losses::info_nce_with_grad(batch);
      std::vector<std::pair<ad::Var, ad::Matrix>> seeds;
      for (std::size_t k = 0; k < outputs.size(); ++k) seeds.emplace_back(outputs[k], result.grads[k].transpose());
      tape.backward(seeds);
      tape.accumulate_into(params);
      optimizer.step();
      sum += result.loss;
    }
    history.epoch_loss.push_back(sum / static_cast<double>(plans.size()));
  }
  return history;
}

namespace {

ad::Vector normalized(const ad::Vector& v, const char* what) {
  const double n = v.norm();
  if (!(n >= 1e-12)) throw DegenerateError(std::string("degenerate centroid: ") + what);
  return v / n;
}

}  // namespace

CentroidPair compute_centroids(std::span<const losses::LabeledEmbedding> samples) {
  ad::Vector sum_h, sum_a;
  CentroidPair c;
  for (const auto& s : samples) {
    auto& sum = s.label == Label::Ai ? sum_a : sum_h;
    if (sum.size() == 0) sum = ad::Vector::Zero(s.embedding.size());
    if (s.embedding.size() != sum.size()) throw ContractError("embedding dimensions differ");
    sum += s.embedding;
    ++(s.label == Label::Ai ? c.ai_count : c.human_count);
  }
  if (c.human_count == 0) throw ValidationError("cannot compute centroids: class human is missing");
  if (c.ai_count == 0) throw ValidationError("cannot compute centroids: class ai is missing");
  if (sum_h.size() != sum_a.size()) throw ContractError("embedding dimensions differ");
  c.human = normalized(sum_h / static_cast<double>(c.human_count), "human");
  c.ai = normalized(sum_a / static_cast<double>(c.ai_count), "ai");
  return c;
}

CentroidPair compute_centroids(const StyleModel& model, const Corpus& corpus) {
  std::vector<losses::LabeledEmbedding> samples;
  samples.reserve(corpus.size());
  for (const auto& r : corpus) samples.push_back({model.embed(r.text), r.label});
  auto c = compute_centroids(samples);
  c.source_checkpoint_hash = checksum_hex(model.checksum());
  return c;
}

CentroidDecision centroid_classify(const CentroidPair& centroids, const ad::Vector& embedding) {
  if (embedding.size() != centroids.ai.size()) throw ContractError("embedding and centroid dimensions differ");
  const double norm = embedding.norm();
  if (!(norm >= 1e-12)) throw DegenerateError("cannot classify a zero embedding");
  const double cos_ai = embedding.dot(centroids.ai) / (norm * centroids.ai.norm());
  const double cos_h = embedding.dot(centroids.human) / (norm * centroids.human.norm());
  const double margin = cos_ai - cos_h;
  return {margin > 1e-12 ? Label::Ai : Label::Human, margin};
}

CentroidDecision centroid_classify(const StyleModel& model, const CentroidPair& centroids, std::string_view text) {
  return centroid_classify(centroids, model.embed(text));
}

CentroidPair adapt_ai_centroid(const CentroidPair& centroids, std::span<const ad::Vector> adaptation, double alpha) {
  if (adaptation.empty()) throw ValidationError("adaptation set is empty");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  ad::Vector mean = ad::Vector::Zero(centroids.ai.size());
  for (const auto& z : adaptation) {
    if (z.size() != mean.size()) throw ContractError("adaptation embedding has the wrong dimension");
    mean += z;
  }
  mean /= static_cast<double>(adaptation.size());
  CentroidPair out = centroids;
  out.alpha = alpha;
  if (alpha == 0.0) return out;
  out.ai = normalized(alpha * mean + (1.0 - alpha) * centroids.ai, "adapted ai");
  out.ai_count = adaptation.size();
  return out;
}

CentroidPair adapt_ai_centroid(const StyleModel& model, const CentroidPair& centroids,
                               const AdaptationSet& adaptation) {
  std::vector<ad::Vector> zs;
  zs.reserve(adaptation.texts.size());
  for (const auto& t : adaptation.texts) zs.push_back(model.embed(t));
  return adapt_ai_centroid(centroids, zs, adaptation.alpha);
}

namespace {

ConfusionCounts evaluate(const CentroidPair& c, const std::vector<ad::Vector>& zs, const Corpus& eval) {
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < zs.size(); ++i) preds.push_back({centroid_classify(c, zs[i]).label, eval[i].label});
  return accumulate(preds);
}

}  // namespace

FewShotResult few_shot_eval_sets(const StyleModel& model, const CentroidPair& base, const Corpus& adaptation,
                                 const Corpus& eval, double alpha) {
  std::set<std::string> adapt_ids;
  for (const auto& r : adaptation) adapt_ids.insert(r.record_id);
  for (const auto& r : eval) {
    if (adapt_ids.count(r.record_id)) {
      throw ValidationError("record '" + r.record_id + "' appears in both adaptation and evaluation sets");
    }
  }
  FewShotResult result;
  result.k = adaptation.size();
  result.alpha = alpha;
  result.eval_size = eval.size();
  for (const auto& r : adaptation) result.adaptation_ids.push_back(r.record_id);

  std::vector<ad::Vector> zs;
  for (const auto& r : eval) zs.push_back(model.embed(r.text));
  result.zero_shot = evaluate(base, zs, eval);
  if (adaptation.empty()) {
    result.k_shot = result.zero_shot;
    return result;
  }
  AdaptationSet set;
  set.alpha = alpha;
  for (const auto& r : adaptation) set.texts.push_back(r.text);
  result.k_shot = evaluate(adapt_ai_centroid(model, base, set), zs, eval);
  return result;
}

FewShotResult few_shot_eval(const StyleModel& model, const Corpus& base_corpus, const Corpus& target_corpus,
                            std::size_t k, std::uint64_t seed, double alpha,
                            std::optional<std::string> target_generator) {
  if (!target_generator) {
    std::set<std::string> gens;
    for (const auto& r : target_corpus) {
      if (r.label == Label::Ai) gens.insert(r.generator);
    }
    if (gens.size() != 1) {
      throw ValidationError("target corpus must contain exactly one AI generator (found " +
                            std::to_string(gens.size()) + "); name one explicitly");
    }
    target_generator = *gens.begin();
  }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < target_corpus.size(); ++i) {
    if (target_corpus[i].label == Label::Ai && target_corpus[i].generator == *target_generator) pool.push_back(i);
  }
  if (pool.size() < k) {
    throw ValidationError("target corpus has " + std::to_string(pool.size()) + " AI samples from '" +
                          *target_generator + "'; k = " + std::to_string(k));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  const std::set<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));

  std::vector<TextRecord> adapt, eval;
  for (std::size_t i = 0; i < target_corpus.size(); ++i) {
    (chosen.count(i) ? adapt : eval).push_back(target_corpus[i]);
  }
  if (eval.empty()) throw ValidationError("no held-out target samples remain after drawing the adaptation set");

  const auto base = compute_centroids(model, base_corpus);
  auto result = few_shot_eval_sets(model, base, Corpus(target_corpus.name() + ":adapt", std::move(adapt)),
                                   Corpus(target_corpus.name() + ":eval", std::move(eval)), alpha);
  result.target_generator = *target_generator;
  return result;
}

std::string centroids_to_json(const CentroidPair& c) {
  nlohmann::ordered_json j;
  j["dim"] = c.ai.size();
  j["c_human"] = std::vector<double>(c.human.data(), c.human.data() + c.human.size());
  j["c_ai"] = std::vector<double>(c.ai.data(), c.ai.data() + c.ai.size());
  j["counts"] = {{"human", c.human_count}, {"ai", c.ai_count}};
  j["alpha"] = c.alpha;
  j["source_checkpoint_hash"] = c.source_checkpoint_hash;
  return j.dump(2) + "\n";
}

CentroidPair centroids_from_json(const std::string& json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    CentroidPair c;
    const auto dim = j.at("dim").get<std::size_t>();
    const auto h = j.at("c_human").get<std::vector<double>>();
    const auto a = j.at("c_ai").get<std::vector<double>>();
    if (h.size() != dim || a.size() != dim) throw ValidationError("centroid length does not match dim");
    c.human = Eigen::Map<const ad::Vector>(h.data(), static_cast<Eigen::Index>(dim));
    c.ai = Eigen::Map<const ad::Vector>(a.data(), static_cast<Eigen::Index>(dim));
    c.human_count = j.at("counts").at("human").get<std::size_t>();
    c.ai_count = j.at("counts").at("ai").get<std::size_t>();
    c.alpha = j.at("alpha").get<double>();
    c.source_checkpoint_hash = j.at("source_checkpoint_hash").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("centroid file: ") + e.what());
  }
}

}  // namespace detectlab
