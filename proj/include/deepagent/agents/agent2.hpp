#pragma once

#include <Eigen/Core>

#include <array>
#include <numeric>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepagent/agents/training.hpp"
#include "deepagent/nn/layers.hpp"
#include "deepagent/nn/sequential.hpp"
#include "deepagent/text/similarity.hpp"

namespace deepagent::agents {

struct Agent2Options {
  int input_width = text::kFeatureDim;
  std::array<int, 3> widths{128, 64, 32};
  double dropout = 0.2;
  bool standardize = true;  // z-score inputs with training-set statistics
};

struct Agent2Config {
  Agent2Options arch;
  nn::AdamConfig adam{};
  int epochs = 100;
  int batch_size = 16;
  int patience = 10;      // early stopping on validation accuracy
  int lr_patience = 5;    // epochs without improvement before the LR is scaled
  double lr_factor = 0.5;
  std::uint64_t seed = 42;
};

/// [Standardize], Dense(w0)+ReLU+Dropout, Dense(w1)+ReLU+Dropout, Dense(w2)+ReLU, Dense(1)+Sigmoid.
template <typename Scalar>
nn::Sequential<Scalar> build_agent2(std::uint64_t seed, const Agent2Options& opt = {}) {
  using namespace nn;
  for (int w : opt.widths)
    if (w < 1) throw ConfigError("agent2 widths must be >= 1");
  Rng rng(seed);
  Sequential<Scalar> net;
  const auto [w1, w2, w3] = opt.widths;
  if (opt.standardize) net.template add<Standardize<Scalar>>("input_std", opt.input_width);
  net.template add<Dense<Scalar>>("dense1", opt.input_width, w1).init_he(rng);
  net.template add<ReLU<Scalar>>("relu1");
  net.template add<Dropout<Scalar>>("dropout1", opt.dropout);
  net.template add<Dense<Scalar>>("dense2", w1, w2).init_he(rng);
  net.template add<ReLU<Scalar>>("relu2");
  net.template add<Dropout<Scalar>>("dropout2", opt.dropout);
  net.template add<Dense<Scalar>>("dense3", w2, w3).init_he(rng);
  net.template add<ReLU<Scalar>>("relu3");
  net.template add<Dense<Scalar>>("output", w3, 1).init_xavier(rng);
  net.template add<Sigmoid<Scalar>>("sigmoid");
  net.reseed(rng.next_u64());
  return net;
}

/// Rows of `features` become the batch.
template <typename Scalar>
nn::Tensor<Scalar> features_to_tensor(const Eigen::MatrixXd& features, std::span<const int> rows) {
  nn::Tensor<Scalar> t({static_cast<nn::Index>(rows.size()), features.cols()});
  for (std::size_t r = 0; r < rows.size(); ++r)
    t.matrix().row(static_cast<nn::Index>(r)) = features.row(rows[r]).template cast<Scalar>();
  return t;
}

template <typename Scalar>
nn::Index agent2_input_width(nn::Sequential<Scalar>& model) {
  auto& first = model.layer(0);
  if (first.kind() == nn::LayerKind::Standardize) return static_cast<nn::Standardize<Scalar>&>(first).mean().size();
  if (first.kind() == nn::LayerKind::Dense) return static_cast<nn::Dense<Scalar>&>(first).in_width();
  throw UsageError("agent2 model must start with a standardize or dense layer");
}

template <typename Scalar>
std::vector<double> predict_agent2_batch(nn::Sequential<Scalar>& model, const Eigen::MatrixXd& features) {
  std::vector<double> out;
  if (features.rows() == 0) return out;
  const auto width = agent2_input_width(model);
  if (features.cols() != width)
    throw UsageError("agent2 expects " + std::to_string(width) + "-wide features, got " +
                     std::to_string(features.cols()));
  std::vector<int> rows(static_cast<std::size_t>(features.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  const auto probs = model.forward(features_to_tensor<Scalar>(features, rows), nn::Mode::Infer);
  for (nn::Index i = 0; i < probs.size(); ++i) out.push_back(static_cast<double>(probs[i]));
  return out;
}

template <typename Scalar>
double predict_agent2(nn::Sequential<Scalar>& model, const Eigen::VectorXd& x) {
  return predict_agent2_batch(model, Eigen::MatrixXd(x.transpose())).front();
}

namespace detail {

template <typename Scalar>
BatchObjective<Scalar> bce_objective(std::span<const int> labels) {
  return [labels](const nn::Tensor<Scalar>& probs, std::span<const int> idx) {
    nn::Tensor<Scalar> target({static_cast<nn::Index>(idx.size()), 1});
    int correct = 0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const int y = labels[static_cast<std::size_t>(idx[r])];
      target[static_cast<nn::Index>(r)] = static_cast<Scalar>(y);
      correct += (probs[static_cast<nn::Index>(r)] >= Scalar(0.5) ? 1 : 0) == y;
    }
    return std::pair{nn::bce_batch(probs, target), correct};
  };
}

}  // namespace detail

/// Fits the input standardizer on `train`, then runs mini-batch Adam on
/// binary cross-entropy with early stopping and LR reduction on validation
/// accuracy (training accuracy when there is no validation set). The best-scoring weights are restored at exit. Recorded
/// losses and accuracies are inference-mode evaluations after each epoch.
template <typename Scalar>
TrainingHistory train_agent2(nn::Sequential<Scalar>& model, const Eigen::MatrixXd& train, std::span<const int> labels,
                             const Eigen::MatrixXd& val, std::span<const int> val_labels, const Agent2Config& config) {
  if (static_cast<std::size_t>(train.rows()) != labels.size() ||
      static_cast<std::size_t>(val.rows()) != val_labels.size())
    throw UsageError("agent2: feature and label counts differ");
  require_both_classes(labels, "agent2");
  if (config.epochs < 1) throw ConfigError("agent2 epochs must be >= 1");

  if (train.cols() != agent2_input_width(model))
    throw UsageError("agent2: training features are " + std::to_string(train.cols()) + " wide");
  if (model.layer(0).kind() == nn::LayerKind::Standardize)
    static_cast<nn::Standardize<Scalar>&>(model.layer(0)).fit(train);
  model.reseed(config.seed);
  nn::AdamState<Scalar> adam{config.adam, 0, {}, {}};
  PlateauSchedule schedule(config.adam.learning_rate, config.patience, config.lr_patience, config.lr_factor);
  const Rng root(config.seed);
  TrainingHistory history;
  auto best = model.snapshot();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = root.derive(static_cast<std::uint64_t>(epoch));
    const auto batches = make_batches(static_cast<int>(train.rows()), config.batch_size, shuffle_rng);
    BatchBuilder<Scalar> build = [&](std::span<const int> idx) { return features_to_tensor<Scalar>(train, idx); };
    train_epoch(model, adam, batches, build, detail::bce_objective<Scalar>(labels));
    const auto stats =
        evaluate_set(model, static_cast<int>(train.rows()), 256, build, detail::bce_objective<Scalar>(labels));

    EpochRecord row{epoch, stats.loss, stats.accuracy, 0.0, 0.0, adam.config.learning_rate};
    double monitored = stats.accuracy;
    if (val.rows() > 0) {
      BatchBuilder<Scalar> build_val = [&](std::span<const int> idx) { return features_to_tensor<Scalar>(val, idx); };
      const auto v = evaluate_set(model, static_cast<int>(val.rows()), 256, build_val,
                                  detail::bce_objective<Scalar>(val_labels));
      row.val_loss = v.loss;
      row.val_acc = v.accuracy;
      monitored = v.accuracy;
    }
    history.epochs.push_back(row);

    const auto decision = schedule.update(monitored);
    if (decision.improved) {
      best = model.snapshot();
      history.best_epoch = epoch;
    }
    adam.config.learning_rate = schedule.lr();
    if (decision.stop) {
      history.stopped_early = epoch < config.epochs;
      break;
    }
  }
  model.restore(best);
  history.final_lr = adam.config.learning_rate;
  return history;
}

}  // namespace deepagent::agents
