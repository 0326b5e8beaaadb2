#pragma once

#include <array>
#include <span>
#include <vector>

#include "json.hpp"

namespace deepagent::metrics {

/// Counts for one class treated as the positive class.
struct ClassCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Binary confusion matrix; class 1 (fake) is the reference positive class.
struct ConfusionMatrix {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  long total() const noexcept { return tp + fp + fn + tn; }
  ClassCounts counts(int c) const;
};

/// A ratio whose denominator may be zero; such ratios report 0 with the flag set.
struct Ratio {
  double value = 0.0;
  bool undefined = false;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions);

double accuracy(const ConfusionMatrix& cm);
Ratio precision(const ConfusionMatrix& cm, int c);
Ratio recall(const ConfusionMatrix& cm, int c);
Ratio f1(const ConfusionMatrix& cm, int c);
double macro_f1(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Thresholds at +inf, each distinct score (descending), and -inf; score >= t
/// counts as a positive prediction. AUC by the trapezoid rule.
RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores);

struct MetricReport {
  double accuracy = 0.0;
  std::array<Ratio, 2> precision{}, recall{}, f1{};
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double auc = 0.0;
  ConfusionMatrix confusion;
};

MetricReport evaluate(std::span<const int> labels, std::span<const int> predictions, std::span<const double> scores);

/// {accuracy, precision_per_class, recall_per_class, f1_per_class, macro_f1, auc, confusion, ...}, as fractions.
nlohmann::json to_json(const MetricReport& r);

}  // namespace deepagent::metrics
