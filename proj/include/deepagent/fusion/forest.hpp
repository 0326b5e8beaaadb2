#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "deepagent/fusion/standardizer.hpp"
#include "deepagent/rng.hpp"

namespace deepagent::fusion {

/// CART classifier on Gini impurity. Each node draws `mtry` candidate
/// features; thresholds are midpoints between sorted unique values. Samples
/// with x[feature] <= threshold go left. Leaves vote the majority class, ties
/// to class 1.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    int vote = 1;
  };

  /// Fits on the given rows of `data` (duplicates allowed, as in a bootstrap).
  static DecisionTree fit(const Eigen::MatrixXd& data, std::span<const int> labels, std::span<const int> rows,
                          int mtry, Rng& rng);

  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int depth() const;
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  int grow(const Eigen::MatrixXd& data, std::span<const int> labels, std::vector<int> rows, int mtry, Rng& rng);

  std::vector<Node> nodes_;
};

struct ForestConfig {
  int trees = 100;
  int mtry = 1;
  bool bootstrap = true;  // false trains every tree on the full set (test hook)
};

/// Bagged trees over standardized meta-features.
class RandomForest {
 public:
  RandomForest() = default;

  /// Fits the standardizer on `data`, then tree t on a bootstrap drawn from rng.derive(t).
  static RandomForest fit(const Eigen::MatrixXd& data, std::span<const int> labels, const ForestConfig& config,
                          std::uint64_t seed);

  /// Per-tree votes for a raw (unstandardized) input.
  std::vector<int> votes(const Eigen::VectorXd& z) const;
  /// Fraction of trees voting 1.
  double probability(const Eigen::VectorXd& z) const;
  /// 1 iff probability >= 0.5.
  int predict(const Eigen::VectorXd& z) const;

  static int label_for(double probability) { return probability >= 0.5 ? 1 : 0; }

  bool trained() const noexcept { return !trees_.empty(); }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  void add_tree(DecisionTree tree) { trees_.push_back(std::move(tree)); }

 private:
  Standardizer standardizer_;
  std::vector<DecisionTree> trees_;
};

}  // namespace deepagent::fusion
