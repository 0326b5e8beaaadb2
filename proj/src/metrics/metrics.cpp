#include "deepagent/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "deepagent/errors.hpp"

namespace deepagent::metrics {

namespace {

Ratio ratio(long num, long den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

void check_binary(std::span<const int> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0 && v[i] != 1)
      throw UsageError(std::string(what) + "[" + std::to_string(i) + "] = " + std::to_string(v[i]) + " is not 0 or 1");
}

nlohmann::json ratio_pair(const std::array<Ratio, 2>& r) { return {r[0].value, r[1].value}; }
nlohmann::json flag_pair(const std::array<Ratio, 2>& r) { return {r[0].undefined, r[1].undefined}; }

}  // namespace

ClassCounts ConfusionMatrix::counts(int c) const {
  if (c == 1) return {tp, fp, fn, tn};
  if (c == 0) return {tn, fn, fp, tp};
  throw UsageError("class index must be 0 or 1");
}

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size())
    throw UsageError("confusion: " + std::to_string(labels.size()) + " labels but " +
                     std::to_string(predictions.size()) + " predictions");
  check_binary(labels, "labels");
  check_binary(predictions, "predictions");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++(predictions[i] == 1 ? cm.tp : cm.fn);
    } else {
      ++(predictions[i] == 1 ? cm.fp : cm.tn);
    }
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  return cm.total() == 0 ? 0.0 : static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

Ratio precision(const ConfusionMatrix& cm, int c) {
  const auto k = cm.counts(c);
  return ratio(k.tp, k.tp + k.fp);
}

Ratio recall(const ConfusionMatrix& cm, int c) {
  const auto k = cm.counts(c);
  return ratio(k.tp, k.tp + k.fn);
}

Ratio f1(const ConfusionMatrix& cm, int c) {
  const auto k = cm.counts(c);
  return ratio(2 * k.tp, 2 * k.tp + k.fp + k.fn);
}

double macro_f1(const ConfusionMatrix& cm) { return 0.5 * (f1(cm, 0).value + f1(cm, 1).value); }

RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size())
    throw UsageError("roc_auc: " + std::to_string(labels.size()) + " labels but " + std::to_string(scores.size()) +
                     " scores");
  check_binary(labels, "labels");
  const long pos = std::count(labels.begin(), labels.end(), 1);
  const long neg = static_cast<long>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw UsageError("roc_auc needs both classes present");
  for (double s : scores)
    if (!std::isfinite(s)) throw UsageError("roc_auc: non-finite score");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  constexpr double inf = std::numeric_limits<double>::infinity();
  curve.points.push_back({0.0, 0.0, inf});
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    // All samples sharing this score enter together.
    for (; i < order.size() && scores[order[i]] == t; ++i) ++(labels[order[i]] == 1 ? tp : fp);
    curve.points.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, t});
  }
  curve.points.push_back({1.0, 1.0, -inf});
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return curve;
}

MetricReport evaluate(std::span<const int> labels, std::span<const int> predictions, std::span<const double> scores) {
  MetricReport r;
  r.confusion = confusion(labels, predictions);
  r.accuracy = accuracy(r.confusion);
  for (int c = 0; c < 2; ++c) {
    r.precision[c] = precision(r.confusion, c);
    r.recall[c] = recall(r.confusion, c);
    r.f1[c] = f1(r.confusion, c);
  }
  r.macro_precision = 0.5 * (r.precision[0].value + r.precision[1].value);
  r.macro_recall = 0.5 * (r.recall[0].value + r.recall[1].value);
  r.macro_f1 = macro_f1(r.confusion);
  r.auc = roc_auc(labels, scores).auc;
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  return {
      {"accuracy", r.accuracy},
      {"precision_per_class", ratio_pair(r.precision)},
      {"recall_per_class", ratio_pair(r.recall)},
      {"f1_per_class", ratio_pair(r.f1)},
      {"undefined",
       {{"precision", flag_pair(r.precision)}, {"recall", flag_pair(r.recall)}, {"f1", flag_pair(r.f1)}}},
      {"macro_precision", r.macro_precision},
      {"macro_recall", r.macro_recall},
      {"macro_f1", r.macro_f1},
      {"auc", r.auc},
      {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}}},
  };
}

}  // namespace deepagent::metrics
