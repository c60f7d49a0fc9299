#include "detectlab/evalkit.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "detectlab/errors.hpp"

namespace detectlab {

using nlohmann::ordered_json;

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }

ConfusionCounts accumulate(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw ValidationError("accumulate on an empty prediction list");
  ConfusionCounts c;
  for (const auto& p : predictions) {
    if (p.verdict == Label::Ai) {
      (p.label == Label::Ai ? c.tp : c.fp)++;
    } else {
      (p.label == Label::Human ? c.tn : c.fn)++;
    }
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw ValidationError("metrics on all-zero confusion counts");
  auto ratio = [](std::uint64_t num, std::uint64_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m;
  bool unused = false;
  m.accuracy = ratio(c.tp + c.tn, c.total(), unused);
  m.precision = ratio(c.tp, c.tp + c.fp, m.precision_undefined);
  m.recall = ratio(c.tp, c.tp + c.fn, m.recall_undefined);
  m.fpr = ratio(c.fp, c.fp + c.tn, m.fpr_undefined);
  if (m.precision_undefined || m.recall_undefined || m.precision + m.recall == 0.0) {
    m.f1_undefined = true;
    m.f1 = 0.0;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::ostringstream out;
  out << "Dataset,Method,Acc,Prec,Recall,F1,FPR\n";
  for (const auto& r : rows) {
    const auto m = r.metrics();
    out << r.dataset << ',' << r.method << ',' << format_percent(m.accuracy) << ','
        << format_percent(m.precision) << ',' << format_percent(m.recall) << ',' << format_percent(m.f1) << ','
        << format_percent(m.fpr) << '\n';
  }
  return out.str();
}

std::string metrics_json(std::span<const MetricsRow> rows) {
  auto arr = ordered_json::array();
  for (const auto& r : rows) {
    const auto m = r.metrics();
    arr.push_back({{"dataset", r.dataset},
                   {"method", r.method},
                   {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
                   {"acc", format_percent(m.accuracy)},
                   {"prec", format_percent(m.precision)},
                   {"recall", format_percent(m.recall)},
                   {"f1", format_percent(m.f1)},
                   {"fpr", format_percent(m.fpr)},
                   {"undefined",
                    {{"prec", m.precision_undefined},
                     {"recall", m.recall_undefined},
                     {"f1", m.f1_undefined},
                     {"fpr", m.fpr_undefined}}}});
  }
  return arr.dump(2) + "\n";
}

std::vector<MetricsRow> parse_metrics_json(const std::string& json_text) {
  std::vector<MetricsRow> rows;
  try {
    for (const auto& item : ordered_json::parse(json_text)) {
      MetricsRow r;
      r.dataset = item.at("dataset").get<std::string>();
      r.method = item.at("method").get<std::string>();
      const auto& c = item.at("counts");
      r.counts = {c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(),
                  c.at("fn").get<std::uint64_t>()};
      rows.push_back(std::move(r));
    }
  } catch (const ordered_json::exception& e) {
    throw ParseError(0, std::string("metrics.json: ") + e.what());
  }
  return rows;
}

std::string metrics_table(std::span<const MetricsRow> rows) {
  std::size_t dw = 7, mw = 6;
  for (const auto& r : rows) {
    dw = std::max(dw, r.dataset.size());
    mw = std::max(mw, r.method.size());
  }
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(dw)) << "Dataset" << "  " << std::setw(static_cast<int>(mw))
      << "Method" << std::right;
  for (const char* h : {"Acc.", "Prec.", "Recall", "F1", "FPR"}) out << std::setw(9) << h;
  out << '\n';
  for (const auto& r : rows) {
    const auto m = r.metrics();
    out << std::left << std::setw(static_cast<int>(dw)) << r.dataset << "  " << std::setw(static_cast<int>(mw))
        << r.method << std::right;
    for (double v : {m.accuracy, m.precision, m.recall, m.f1, m.fpr}) out << std::setw(8) << format_percent(v) << '%';
    out << '\n';
  }
  return out.str();
}

}  // namespace detectlab
