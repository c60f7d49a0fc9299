#ifndef DETECTLAB_LOSSES_HPP
#define DETECTLAB_LOSSES_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "detectlab/autograd.hpp"
#include "detectlab/corpus.hpp"

namespace detectlab::losses {

inline constexpr double kProbEpsilon = 1e-12;
inline constexpr double kDefaultTemperature = 0.07;

// -[y log p + (1-y) log(1-p)], each log argument floored at kProbEpsilon.
// Throws ValidationError for p outside [0, 1].
double bce(int y, double p);
double bce(Label y, double p);
double bce_mean(std::span<const int> y, std::span<const double> p);
// d bce / d p.
double bce_grad(int y, double p);

struct Anchor {
  std::size_t index = 0;
  std::size_t positive = 0;
  // Indices entering the denominator; contains `positive`, excludes `index`.
  std::vector<std::size_t> candidates;
};

struct ContrastiveBatch {
  std::vector<ad::Vector> embeddings;
  std::vector<Label> labels;
  std::vector<Anchor> anchors;
  double temperature = kDefaultTemperature;
};

// Checks the batch invariants; throws ValidationError / ContractError.
void validate(const ContrastiveBatch& batch);

// Mean over anchors of -log softmax_k(sim(z_i, z_k) / tau)[positive], with
// sim the cosine similarity.
double info_nce(const ContrastiveBatch& batch);

struct InfoNceResult {
  double loss = 0.0;
  // d loss / d embeddings[k], one per batch member.
  std::vector<ad::Vector> grads;
};
InfoNceResult info_nce_with_grad(const ContrastiveBatch& batch);

// Membership and positives of one batch, before embeddings are attached.
struct BatchPlan {
  std::vector<std::size_t> members;  // indices into the sample list
  std::vector<Anchor> anchors;       // indices local to `members`
};

// Partitions samples into batches of roughly `batch_size` that each hold at
// least two members of every class. Each anchor's positive is drawn uniformly
// from its same-class batch mates; candidates are all other batch members.
std::vector<BatchPlan> plan_contrastive_batches(std::span<const Label> labels, std::size_t batch_size,
                                                std::uint64_t seed);

struct LabeledEmbedding {
  ad::Vector embedding;
  Label label;
};

std::vector<ContrastiveBatch> build_contrastive_batches(std::span<const LabeledEmbedding> samples,
                                                        std::size_t batch_size, std::uint64_t seed,
                                                        double temperature = kDefaultTemperature);

}  // namespace detectlab::losses

#endif  // DETECTLAB_LOSSES_HPP
