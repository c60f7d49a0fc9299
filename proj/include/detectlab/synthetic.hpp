#ifndef DETECTLAB_SYNTHETIC_HPP
#define DETECTLAB_SYNTHETIC_HPP

#include <cstdint>
#include <filesystem>

#include "detectlab/corpus.hpp"

namespace detectlab {

// Bundled toy corpora built from order-3 word processes (each word depends on
// the previous two) over pseudo-word vocabularies.
//   human, gen-a, gen-b   base domain, used for training and in-domain test
//   gen-c + shifted human OOD: new alphabet letters, digit tokens, longer texts
//   gen-d                 unseen generator for few-shot adaptation
struct SyntheticConfig {
  std::size_t train_per_source = 150;
  std::size_t test_per_source = 50;
  // gen-d records in unseen.jsonl; the same number of fresh human records joins them.
  std::size_t unseen_per_source = 100;
  std::size_t vocab_per_source = 60;
  // Fraction of each base source's vocabulary drawn from a pool shared by all sources.
  double overlap = 0.25;
  int min_words = 20;
  int max_words = 40;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticBundle {
  Corpus train;
  Corpus test_in;
  Corpus test_ood;
  Corpus unseen;
};

SyntheticBundle make_synthetic(const SyntheticConfig& cfg);

// train.jsonl, test_in.jsonl, test_ood.jsonl, unseen.jsonl
void write_synthetic(const SyntheticBundle& bundle, const std::filesystem::path& dir);

}  // namespace detectlab

#endif  // DETECTLAB_SYNTHETIC_HPP
