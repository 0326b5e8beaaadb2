#include "deepagent/fusion/forest.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "deepagent/errors.hpp"

namespace deepagent::fusion {

namespace {

double gini(long ones, long total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(ones) / static_cast<double>(total);
  return 2.0 * p * (1.0 - p);
}

struct Split {
  bool found = false;
  double impurity = 0.0;  // weighted child impurity
  double threshold = 0.0;
};

Split best_split(const Eigen::MatrixXd& data, std::span<const int> labels, const std::vector<int>& rows, int feature) {
  std::vector<std::pair<double, int>> v;
  v.reserve(rows.size());
  for (int r : rows) v.emplace_back(data(r, feature), labels[static_cast<std::size_t>(r)]);
  std::sort(v.begin(), v.end());
  const long total = static_cast<long>(v.size());
  long total_ones = 0;
  for (const auto& p : v) total_ones += p.second;

  Split best;
  long left = 0, left_ones = 0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    ++left;
    left_ones += v[i].second;
    if (v[i].first == v[i + 1].first) continue;
    const long right = total - left;
    const double impurity = (static_cast<double>(left) * gini(left_ones, left) +
                             static_cast<double>(right) * gini(total_ones - left_ones, right)) /
                            static_cast<double>(total);
    if (!best.found || impurity < best.impurity) best = {true, impurity, 0.5 * (v[i].first + v[i + 1].first)};
  }
  return best;
}

}  // namespace

DecisionTree DecisionTree::fit(const Eigen::MatrixXd& data, std::span<const int> labels, std::span<const int> rows,
                               int mtry, Rng& rng) {
  if (rows.empty()) throw UsageError("cannot fit a tree on zero samples");
  if (mtry < 1 || mtry > data.cols()) throw ConfigError("mtry must lie in [1, " + std::to_string(data.cols()) + "]");
  DecisionTree tree;
  tree.grow(data, labels, std::vector<int>(rows.begin(), rows.end()), mtry, rng);
  return tree;
}

int DecisionTree::grow(const Eigen::MatrixXd& data, std::span<const int> labels, std::vector<int> rows, int mtry,
                       Rng& rng) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  long ones = 0;
  for (int r : rows) ones += labels[static_cast<std::size_t>(r)];
  const long n = static_cast<long>(rows.size());
  nodes_[id].vote = 2 * ones >= n ? 1 : 0;
  if (ones == 0 || ones == n || n < 2) return id;

  // Candidate features in random order; the first `mtry` are the draw, the
  // rest are only consulted when none of the drawn features can split.
  std::vector<int> features(static_cast<std::size_t>(data.cols()));
  std::iota(features.begin(), features.end(), 0);
  rng.shuffle(features);
  int feature = -1;
  Split chosen;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (static_cast<int>(i) >= mtry && chosen.found) break;
    const Split s = best_split(data, labels, rows, features[i]);
    if (s.found && (!chosen.found || s.impurity < chosen.impurity)) {
      chosen = s;
      feature = features[i];
    }
  }
  if (!chosen.found) return id;  // all candidate features constant on this node

  std::vector<int> left, right;
  for (int r : rows) (data(r, feature) <= chosen.threshold ? left : right).push_back(r);
  rows.clear();
  rows.shrink_to_fit();
  nodes_[id].feature = feature;
  nodes_[id].threshold = chosen.threshold;
  const int l = grow(data, labels, std::move(left), mtry, rng);
  nodes_[id].left = l;
  const int r = grow(data, labels, std::move(right), mtry, rng);
  nodes_[id].right = r;
  return id;
}

int DecisionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (nodes_.empty()) throw UsageError("decision tree is not trained");
  int i = 0;
  while (nodes_[i].feature >= 0) i = x[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  return nodes_[i].vote;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  // Children are always stored after their parent.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) d[nodes_[i].left] = d[nodes_[i].right] = d[i] + 1;
  }
  return deepest;
}

RandomForest RandomForest::fit(const Eigen::MatrixXd& data, std::span<const int> labels, const ForestConfig& config,
                               std::uint64_t seed) {
  if (config.trees < 1) throw ConfigError("forest needs at least one tree");
  if (static_cast<std::size_t>(data.rows()) != labels.size())
    throw UsageError("forest: " + std::to_string(data.rows()) + " rows but " + std::to_string(labels.size()) +
                     " labels");
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  if (ones == 0 || ones == static_cast<long>(labels.size()))
    throw UsageError("forest training needs both classes present");

  RandomForest forest;
  forest.standardizer_ = Standardizer::fit(data);
  const Eigen::MatrixXd z = forest.standardizer_.apply(data);
  const Rng root(seed);
  const int n = static_cast<int>(data.rows());
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (int t = 0; t < config.trees; ++t) {
    Rng rng = root.derive(static_cast<std::uint64_t>(t));
    if (config.bootstrap) {
      for (auto& r : rows) r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees_.push_back(DecisionTree::fit(z, labels, rows, config.mtry, rng));
  }
  return forest;
}

std::vector<int> RandomForest::votes(const Eigen::VectorXd& z) const {
  if (!trained()) throw UsageError("forest is not trained");
  const Eigen::VectorXd x = standardizer_.apply(z);
  std::vector<int> out;
  out.reserve(trees_.size());
  for (const auto& t : trees_) out.push_back(t.predict(x));
  return out;
}

double RandomForest::probability(const Eigen::VectorXd& z) const {
  const auto v = votes(z);
  return static_cast<double>(std::accumulate(v.begin(), v.end(), 0)) / static_cast<double>(v.size());
}

int RandomForest::predict(const Eigen::VectorXd& z) const { return label_for(probability(z)); }

}  // namespace deepagent::fusion
