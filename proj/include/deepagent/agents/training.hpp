#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "deepagent/errors.hpp"
#include "deepagent/nn/adam.hpp"
#include "deepagent/nn/layers.hpp"
#include "deepagent/nn/loss.hpp"
#include "deepagent/nn/sequential.hpp"
#include "deepagent/rng.hpp"
#include "json.hpp"

namespace deepagent::agents {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0, train_acc = 0.0;
  double val_loss = 0.0, val_acc = 0.0;  // zero when there is no validation set
  double lr = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // epoch whose weights were kept
  bool stopped_early = false;
  double final_lr = 0.0;
};

inline nlohmann::json to_json(const TrainingHistory& h) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : h.epochs)
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"train_acc", e.train_acc},
                    {"val_loss", e.val_loss},
                    {"val_acc", e.val_acc},
                    {"lr", e.lr}});
  return {{"epochs", rows}, {"best_epoch", h.best_epoch}, {"stopped_early", h.stopped_early}, {"final_lr", h.final_lr}};
}

/// Early stopping and learning-rate reduction driven by a monitored score
/// (validation accuracy). Both counters advance on every epoch without a
/// strict improvement.
class PlateauSchedule {
 public:
  struct Decision {
    bool improved = false;
    bool reduced = false;
    bool stop = false;
  };

  PlateauSchedule(double lr, int stop_patience, int lr_patience, double factor)
      : lr_(lr), stop_patience_(stop_patience), lr_patience_(lr_patience), factor_(factor) {}

  Decision update(double score) {
    Decision d;
    if (!seen_ || score > best_) {
      seen_ = true;
      best_ = score;
      stop_wait_ = lr_wait_ = 0;
      d.improved = true;
      return d;
    }
    if (lr_patience_ > 0 && ++lr_wait_ >= lr_patience_) {
      lr_ *= factor_;
      lr_wait_ = 0;
      d.reduced = true;
    }
    if (stop_patience_ > 0 && ++stop_wait_ >= stop_patience_) d.stop = true;
    return d;
  }

  double lr() const noexcept { return lr_; }
  double best() const noexcept { return best_; }

 private:
  double lr_;
  int stop_patience_, lr_patience_;
  double factor_;
  bool seen_ = false;
  double best_ = 0.0;
  int stop_wait_ = 0, lr_wait_ = 0;
};

/// Shuffled mini-batches; a trailing batch of one sample joins the previous
/// batch so batch-norm always sees at least two rows.
inline std::vector<std::vector<int>> make_batches(int n, int batch_size, Rng& rng) {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

inline void require_both_classes(std::span<const int> labels, const char* who) {
  bool seen[2] = {false, false};
  for (int y : labels) {
    if (y != 0 && y != 1) throw UsageError(std::string(who) + ": labels must be 0 or 1");
    seen[y] = true;
  }
  if (!seen[0] || !seen[1]) throw UsageError(std::string(who) + ": training labels contain a single class");
}

struct EpochStats {
  double loss = 0.0, accuracy = 0.0;
};

/// Builds the network input for a list of sample indices.
template <typename Scalar>
using BatchBuilder = std::function<nn::Tensor<Scalar>(std::span<const int>)>;

/// Maps an output batch and its indices to loss/gradient plus the number of
/// correct predictions.
template <typename Scalar>
using BatchObjective = std::function<std::pair<nn::LossResult<Scalar>, int>(const nn::Tensor<Scalar>&, std::span<const int>)>;

/// One pass of mini-batch Adam. The returned loss and accuracy are averaged
/// over samples as seen during training (dropout active).
template <typename Scalar>
EpochStats train_epoch(nn::Sequential<Scalar>& model, nn::AdamState<Scalar>& adam,
                       const std::vector<std::vector<int>>& batches, const BatchBuilder<Scalar>& build,
                       const BatchObjective<Scalar>& objective) {
  EpochStats stats;
  std::size_t seen = 0;
  for (const auto& batch : batches) {
    model.zero_grad();
    const auto out = model.forward(build(batch), nn::Mode::Train);
    auto [loss, correct] = objective(out, batch);
    if (!std::isfinite(static_cast<double>(loss.loss))) throw TrainingError("training loss became non-finite");
    model.backward(loss.grad);
    const auto params = model.parameters();
    nn::adam_step<Scalar>(params, adam);
    stats.loss += static_cast<double>(loss.loss) * static_cast<double>(batch.size());
    stats.accuracy += correct;
    seen += batch.size();
  }
  stats.loss /= static_cast<double>(seen);
  stats.accuracy /= static_cast<double>(seen);
  return stats;
}

/// Inference-mode loss/accuracy over all samples, in chunks.
template <typename Scalar>
EpochStats evaluate_set(nn::Sequential<Scalar>& model, int n, int chunk, const BatchBuilder<Scalar>& build,
                        const BatchObjective<Scalar>& objective) {
  EpochStats stats;
  for (int start = 0; start < n; start += chunk) {
    std::vector<int> idx(static_cast<std::size_t>(std::min(chunk, n - start)));
    std::iota(idx.begin(), idx.end(), start);
    const auto out = model.forward(build(idx), nn::Mode::Infer);
    const auto [loss, correct] = objective(out, idx);
    stats.loss += static_cast<double>(loss.loss) * static_cast<double>(idx.size());
    stats.accuracy += correct;
  }
  if (n > 0) {
    stats.loss /= n;
    stats.accuracy /= n;
  }
  return stats;
}

/// Replaces every batch-norm running mean/variance with the exact population
/// statistics of its inference-mode input over `n` samples, front to back.
template <typename Scalar>
void recalibrate_batchnorm(nn::Sequential<Scalar>& model, int n, int chunk, const BatchBuilder<Scalar>& build) {
  if (n < 1) return;
  for (std::size_t j = 0; j < model.size(); ++j) {
    if (model.layer(j).kind() != nn::LayerKind::BatchNorm) continue;
    auto& bn = static_cast<nn::BatchNorm<Scalar>&>(model.layer(j));
    Eigen::VectorXd sum, sum_sq;
    double rows = 0.0;
    for (int start = 0; start < n; start += chunk) {
      std::vector<int> idx(static_cast<std::size_t>(std::min(chunk, n - start)));
      std::iota(idx.begin(), idx.end(), start);
      const auto x = model.forward_prefix(build(idx), j, nn::Mode::Infer);
      const Eigen::MatrixXd m = x.matrix().template cast<double>();
      if (sum.size() == 0) {
        sum = Eigen::VectorXd::Zero(m.cols());
        sum_sq = Eigen::VectorXd::Zero(m.cols());
      }
      sum += m.colwise().sum().transpose();
      sum_sq += m.cwiseAbs2().colwise().sum().transpose();
      rows += static_cast<double>(m.rows());
    }
    const Eigen::VectorXd mean = sum / rows;
    const Eigen::VectorXd var = (sum_sq / rows - mean.cwiseAbs2()).cwiseMax(0.0);
    bn.running_mean().data() = mean.cast<Scalar>();
    bn.running_var().data() = var.cast<Scalar>();
  }
}

}  // namespace deepagent::agents
