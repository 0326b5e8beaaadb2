#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepagent/agents/training.hpp"
#include "deepagent/nn/layers.hpp"
#include "deepagent/nn/sequential.hpp"
#include "deepagent/vision/frame.hpp"

namespace deepagent::agents {

/// Architecture knobs. The default is the full 224x224 network; smaller inputs
/// keep the same stack but drop any max-pool whose window no longer fits, and
/// width_divisor shrinks every layer width (used for gradient checks).
struct Agent1Options {
  int input_size = 224;
  int width_divisor = 1;
};

struct Agent1Config {
  Agent1Options arch;
  nn::AdamConfig adam{1e-4, 0.9, 0.999, 1e-7};
  int epochs = 50;
  int batch_size = 16;
  bool augment = true;
  vision::AugmentPolicy policy;
  std::uint64_t seed = 42;
  /// Recompute batch-norm running statistics over the (unaugmented) training
  /// frames after every epoch, before validation.
  bool recalibrate_bn = true;
};

inline constexpr int kAgent1Classes = 2;
inline constexpr int kFakeClass = 1;

template <typename Scalar>
nn::Sequential<Scalar> build_agent1(std::uint64_t seed, const Agent1Options& opt = {}) {
  using namespace nn;
  if (opt.input_size < 11) throw ConfigError("agent1 input must be at least 11x11");
  if (opt.width_divisor < 1) throw ConfigError("agent1 width divisor must be >= 1");
  auto width = [&](Index w) { return std::max<Index>(1, w / opt.width_divisor); };

  Rng rng(seed);
  Sequential<Scalar> net;
  Shape shape{1, opt.input_size, opt.input_size, 3};
  auto track = [&](Layer<Scalar>& layer) { shape = layer.output_shape(shape); };

  struct Block {
    Index filters, kernel, stride;
    Padding padding;
    bool pool;
  };
  const Block blocks[] = {{64, 11, 4, Padding::Valid, true},
                          {128, 5, 1, Padding::Same, true},
                          {256, 3, 1, Padding::Same, false},
                          {256, 3, 1, Padding::Same, false},
                          {128, 3, 1, Padding::Same, true}};
  Index channels = 3;
  for (int b = 0; b < 5; ++b) {
    const auto& spec = blocks[b];
    const std::string prefix = "block" + std::to_string(b + 1) + "_";
    auto& conv = net.template add<Conv2D<Scalar>>(prefix + "conv", channels, width(spec.filters), spec.kernel,
                                                  spec.stride, spec.padding);
    conv.init(rng);
    track(conv);
    channels = width(spec.filters);
    net.template add<ReLU<Scalar>>(prefix + "relu");
    net.template add<BatchNorm<Scalar>>(prefix + "bn", channels);
    if (spec.pool && shape[1] >= 3 && shape[2] >= 3) track(net.template add<MaxPool2D<Scalar>>(prefix + "pool", 3, 2));
  }
  net.template add<GlobalAvgPool<Scalar>>("gap");

  const Index fc1 = width(1024), fc2 = width(512);
  net.template add<Dense<Scalar>>("fc1", channels, fc1).init_he(rng);
  net.template add<ReLU<Scalar>>("fc1_relu");
  net.template add<Dropout<Scalar>>("fc1_dropout", 0.5);
  net.template add<BatchNorm<Scalar>>("fc1_bn", fc1);
  net.template add<Dense<Scalar>>("fc2", fc1, fc2).init_he(rng);
  net.template add<ReLU<Scalar>>("fc2_relu");
  net.template add<Dropout<Scalar>>("fc2_dropout", 0.5);
  net.template add<Dense<Scalar>>("head", fc2, kAgent1Classes).init_xavier(rng);
  net.template add<Softmax<Scalar>>("softmax");
  net.reseed(rng.next_u64());
  return net;
}

/// Per-sample shapes after every conv, pool, GAP and dense layer, preceded by
/// the input shape.
template <typename Scalar>
std::vector<nn::Shape> agent1_shape_audit(const nn::Sequential<Scalar>& model, int input_size) {
  using nn::LayerKind;
  const auto chain = model.shape_chain({1, input_size, input_size, 3});
  std::vector<nn::Shape> out{nn::Shape(chain[0].begin() + 1, chain[0].end())};
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto kind = model.layer(i).kind();
    if (kind == LayerKind::Conv2D || kind == LayerKind::MaxPool || kind == LayerKind::GlobalAvgPool ||
        kind == LayerKind::Dense)
      out.emplace_back(chain[i + 1].begin() + 1, chain[i + 1].end());
  }
  return out;
}

/// RGB (gray frames replicated), resized to size x size, scaled to [0, 1].
inline vision::Frame preprocess_frame(const vision::Frame& raw, int size) {
  vision::Frame rgb = raw;
  if (raw.channels == 1) {
    rgb = vision::Frame(raw.width, raw.height, 3);
    for (Eigen::Index p = 0; p < raw.pixels.size(); ++p)
      rgb.pixels[3 * p] = rgb.pixels[3 * p + 1] = rgb.pixels[3 * p + 2] = raw.pixels[p];
  } else if (raw.channels != 3) {
    throw UsageError("frames must have 1 or 3 channels");
  }
  return vision::normalize(vision::resize_bilinear(rgb, size, size));
}

template <typename Scalar>
void check_agent1_frame(const vision::Frame& f, int size) {
  if (f.width != size || f.height != size || f.channels != 3)
    throw UsageError("agent1 expects " + std::to_string(size) + "x" + std::to_string(size) + "x3 frames, got " +
                     std::to_string(f.width) + "x" + std::to_string(f.height) + "x" + std::to_string(f.channels));
}

/// Stacks preprocessed frames into an NHWC batch.
template <typename Scalar>
nn::Tensor<Scalar> frames_to_tensor(std::span<const vision::Frame* const> frames, int size) {
  nn::Tensor<Scalar> t({static_cast<nn::Index>(frames.size()), size, size, 3});
  const nn::Index stride = static_cast<nn::Index>(size) * size * 3;
  for (std::size_t b = 0; b < frames.size(); ++b) {
    check_agent1_frame<Scalar>(*frames[b], size);
    t.data().segment(static_cast<nn::Index>(b) * stride, stride) = frames[b]->pixels.matrix().template cast<Scalar>();
  }
  return t;
}

/// Fake-class softmax probability per frame, inference mode.
template <typename Scalar>
std::vector<double> predict_frames(nn::Sequential<Scalar>& model, std::span<const vision::Frame> frames, int size,
                                   int chunk = 32) {
  std::vector<double> out;
  out.reserve(frames.size());
  for (std::size_t start = 0; start < frames.size(); start += static_cast<std::size_t>(chunk)) {
    std::vector<const vision::Frame*> batch;
    for (std::size_t i = start; i < std::min(frames.size(), start + chunk); ++i) batch.push_back(&frames[i]);
    const auto probs = model.forward(frames_to_tensor<Scalar>(batch, size), nn::Mode::Infer);
    for (nn::Index r = 0; r < probs.dim(0); ++r) out.push_back(static_cast<double>(probs.matrix()(r, kFakeClass)));
  }
  return out;
}

template <typename Scalar>
double predict_frame(nn::Sequential<Scalar>& model, const vision::Frame& frame, int size) {
  return predict_frames(model, std::span<const vision::Frame>(&frame, 1), size).front();
}

/// Mean of the frame scores.
inline double aggregate_video(std::span<const double> frame_scores) {
  if (frame_scores.empty()) throw UsageError("cannot aggregate a video with no frame scores");
  double sum = 0.0;
  for (double p : frame_scores) sum += p;
  return sum / static_cast<double>(frame_scores.size());
}

namespace detail {

template <typename Scalar>
BatchObjective<Scalar> cce_objective(std::span<const int> labels) {
  return [labels](const nn::Tensor<Scalar>& probs, std::span<const int> idx) {
    nn::Tensor<Scalar> target({static_cast<nn::Index>(idx.size()), kAgent1Classes});
    int correct = 0;
    const auto p = probs.matrix();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const int y = labels[static_cast<std::size_t>(idx[r])];
      target.matrix()(static_cast<nn::Index>(r), y) = Scalar(1);
      const int guess = p(static_cast<nn::Index>(r), kFakeClass) >= p(static_cast<nn::Index>(r), 0) ? 1 : 0;
      correct += guess == y;
    }
    return std::pair{nn::cce_batch(probs, target), correct};
  };
}

}  // namespace detail

/// Mini-batch Adam on categorical cross-entropy for a fixed number of epochs.
/// Training frames are augmented per epoch when config.augment is set. The
/// recorded train/val loss and accuracy are inference-mode evaluations taken
/// at the end of each epoch.
template <typename Scalar>
TrainingHistory train_agent1(nn::Sequential<Scalar>& model, std::span<const vision::Frame> train,
                             std::span<const int> labels, std::span<const vision::Frame> val,
                             std::span<const int> val_labels, const Agent1Config& config) {
  if (train.size() != labels.size() || val.size() != val_labels.size())
    throw UsageError("agent1: frame and label counts differ");
  require_both_classes(labels, "agent1");
  if (config.epochs < 1) throw ConfigError("agent1 epochs must be >= 1");
  if (config.augment) config.policy.validate();
  const int size = config.arch.input_size;

  model.reseed(config.seed);
  nn::AdamState<Scalar> adam{config.adam, 0, {}, {}};
  const Rng root(config.seed);
  TrainingHistory history;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = root.derive(static_cast<std::uint64_t>(epoch));
    Rng augment_rng = root.derive(static_cast<std::uint64_t>(100000 + epoch));
    const auto batches = make_batches(static_cast<int>(train.size()), config.batch_size, shuffle_rng);
    BatchBuilder<Scalar> build = [&](std::span<const int> idx) {
      std::vector<vision::Frame> augmented;
      std::vector<const vision::Frame*> ptrs;
      augmented.reserve(idx.size());
      for (int i : idx) {
        const auto& f = train[static_cast<std::size_t>(i)];
        augmented.push_back(config.augment ? vision::augment(f, config.policy, augment_rng) : f);
      }
      for (const auto& f : augmented) ptrs.push_back(&f);
      return frames_to_tensor<Scalar>(ptrs, size);
    };
    train_epoch(model, adam, batches, build, detail::cce_objective<Scalar>(labels));

    BatchBuilder<Scalar> build_plain = [&](std::span<const int> idx) {
      std::vector<const vision::Frame*> ptrs;
      for (int i : idx) ptrs.push_back(&train[static_cast<std::size_t>(i)]);
      return frames_to_tensor<Scalar>(ptrs, size);
    };
    if (config.recalibrate_bn) recalibrate_batchnorm(model, static_cast<int>(train.size()), 32, build_plain);
    const auto stats = evaluate_set(model, static_cast<int>(train.size()), 32, build_plain,
                                    detail::cce_objective<Scalar>(labels));

    EpochRecord row{epoch, stats.loss, stats.accuracy, 0.0, 0.0, adam.config.learning_rate};
    if (!val.empty()) {
      BatchBuilder<Scalar> build_val = [&](std::span<const int> idx) {
        std::vector<const vision::Frame*> ptrs;
        for (int i : idx) ptrs.push_back(&val[static_cast<std::size_t>(i)]);
        return frames_to_tensor<Scalar>(ptrs, size);
      };
      const auto v = evaluate_set(model, static_cast<int>(val.size()), 32, build_val,
                                  detail::cce_objective<Scalar>(val_labels));
      row.val_loss = v.loss;
      row.val_acc = v.accuracy;
    }
    history.epochs.push_back(row);
  }
  history.best_epoch = config.epochs;
  history.final_lr = adam.config.learning_rate;
  return history;
}

}  // namespace deepagent::agents
