#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepagent/fusion/forest.hpp"
#include "deepagent/metrics/metrics.hpp"
#include "json.hpp"

namespace deepagent::fusion {

struct AgentScore {
  std::string id;
  double score = 0.0;  // probability of the fake class
};

struct LabeledId {
  std::string id;
  int label = 0;
};

struct MetaFeature {
  std::string id;
  Eigen::VectorXd z;
  int label = 0;
};

/// z = [p1, p2] (meta_dims 2) or [1 - p1, p1, 1 - p2, p2] (meta_dims 4), in
/// the order of `labels`. Every id must appear exactly once in all three lists.
std::vector<MetaFeature> build_meta_features(std::span<const AgentScore> agent1, std::span<const AgentScore> agent2,
                                             std::span<const LabeledId> labels, int meta_dims = 2);

Eigen::MatrixXd meta_matrix(std::span<const MetaFeature> features);

struct Fold {
  std::vector<int> train;
  std::vector<int> validation;
};

/// Per class: shuffle, then deal round robin into folds, the dealing offset
/// carrying over from one class to the next so fold sizes stay balanced.
std::vector<Fold> stratified_kfold(std::span<const int> labels, int k, Rng& rng);

/// Metrics of one validation fold, stored as fractions in [0, 1]. Precision
/// and recall take the fake class as positive; F1 is macro.
struct FoldResult {
  int fold = 0;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0, auc = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0;
  metrics::ConfusionMatrix confusion;
  metrics::RocCurve roc;
};

struct CrossValidationReport {
  std::vector<FoldResult> folds;
  FoldResult mean;  // fold index -1, metric columns averaged
};

struct CrossValidationConfig {
  int folds = 5;
  ForestConfig forest;
  std::uint64_t seed = 42;
};

/// Per fold: fit standardizer and forest on the training part, score the
/// validation part.
CrossValidationReport cross_validate(std::span<const MetaFeature> features, const CrossValidationConfig& config);

nlohmann::json to_json(const FoldResult& r);
nlohmann::json to_json(const CrossValidationReport& r);
CrossValidationReport report_from_json(const nlohmann::json& j);

}  // namespace deepagent::fusion
