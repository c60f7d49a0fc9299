#ifndef DETECTLAB_EVALKIT_HPP
#define DETECTLAB_EVALKIT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "detectlab/corpus.hpp"

namespace detectlab {

// Positive class is AI.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b);

struct Prediction {
  Label verdict;
  Label label;
};

ConfusionCounts accumulate(std::span<const Prediction> predictions);

// Zero-denominator metrics are reported as 0 with the matching flag set.
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fpr = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  bool fpr_undefined = false;

  bool operator==(const Metrics&) const = default;
};

Metrics metrics(const ConfusionCounts& counts);

// One row of a detector x dataset table.
struct MetricsRow {
  std::string dataset;
  std::string method;
  ConfusionCounts counts;

  Metrics metrics() const { return detectlab::metrics(counts); }
  bool operator==(const MetricsRow&) const = default;
};

// Percentage with two decimals, e.g. 0.9691 -> "96.91".
std::string format_percent(double fraction);

// Header: Dataset,Method,Acc,Prec,Recall,F1,FPR
std::string metrics_csv(std::span<const MetricsRow> rows);
std::string metrics_json(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_metrics_json(const std::string& json_text);
// Aligned plain-text table.
std::string metrics_table(std::span<const MetricsRow> rows);

}  // namespace detectlab

#endif  // DETECTLAB_EVALKIT_HPP
