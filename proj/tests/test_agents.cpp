#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "deepagent/agents/agent1.hpp"
#include "deepagent/agents/agent2.hpp"
#include "deepagent/nn/gradient_check.hpp"

using namespace deepagent;
using namespace deepagent::agents;
using nn::Shape;

namespace {

// Smooth gradient frame; fake frames get blocky 4x4 offsets on top.
vision::Frame synthetic_frame(int size, bool fake, Rng& rng) {
  vision::Frame f(size, size, 3);
  const double gx = rng.uniform(-0.3, 0.3), gy = rng.uniform(-0.3, 0.3), base = rng.uniform(0.3, 0.7);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) f.at(x, y, c) = base + gx * x / size + gy * y / size + 0.05 * c;
  if (fake) {
    for (int by = 0; by < size; by += 4)
      for (int bx = 0; bx < size; bx += 4) {
        const double offset = rng.uniform(-0.35, 0.35);
        for (int y = by; y < std::min(size, by + 4); ++y)
          for (int x = bx; x < std::min(size, bx + 4); ++x)
            for (int c = 0; c < 3; ++c) f.at(x, y, c) += offset;
      }
  }
  f.pixels = f.pixels.max(0.0).min(1.0);
  return f;
}

template <typename Scalar>
nn::LossFunction<Scalar> cce_against(const nn::Tensor<Scalar>& target) {
  return [target](const nn::Tensor<Scalar>& out) {
    auto r = nn::cce_batch(out, target);
    return std::pair{r.loss, r.grad};
  };
}

template <typename Scalar>
nn::LossFunction<Scalar> bce_against(const nn::Tensor<Scalar>& target) {
  return [target](const nn::Tensor<Scalar>& out) {
    auto r = nn::bce_batch(out, target);
    return std::pair{r.loss, r.grad};
  };
}

// Non-zero biases keep ReLU pre-activations off the kink at exactly zero.
template <typename Scalar>
void jitter_biases(nn::Sequential<Scalar>& model, Rng& rng) {
  for (auto& p : model.parameters())
    if (p.name.find("bias") != std::string::npos || p.name.find("beta") != std::string::npos)
      for (nn::Index i = 0; i < p.value->size(); ++i) (*p.value)[i] = static_cast<Scalar>(rng.uniform(0.05, 0.2));
}

std::vector<Eigen::VectorXd> trainable(nn::Sequential<double>& model) {
  std::vector<Eigen::VectorXd> out;
  for (auto& p : model.parameters()) out.push_back(p.value->data());
  return out;
}

}  // namespace

TEST_CASE("agent1 architecture") {
  auto model = build_agent1<double>(42);
  const std::vector<Shape> expected{{224, 224, 3}, {54, 54, 64}, {26, 26, 64}, {26, 26, 128}, {12, 12, 128},
                                    {12, 12, 256}, {12, 12, 256}, {12, 12, 128}, {5, 5, 128},  {128},
                                    {1024},        {512},         {2}};
  CHECK(agent1_shape_audit(model, 224) == expected);

  const nn::Tensor<double> zeros({1, 224, 224, 3});
  const auto out = model.forward(zeros, nn::Mode::Infer);
  CHECK(out.shape() == Shape{1, 2});
  CHECK(out[0] + out[1] == doctest::Approx(1.0).epsilon(1e-12));

  auto twin = build_agent1<double>(42);
  CHECK(twin.snapshot() == model.snapshot());
  auto other = build_agent1<double>(43);
  CHECK_FALSE(other.snapshot() == model.snapshot());

  SUBCASE("desk scale keeps the stack and drops pools that no longer fit") {
    auto desk = build_agent1<double>(42, {64, 1});
    const std::vector<Shape> chain{{64, 64, 3}, {14, 14, 64}, {6, 6, 64}, {6, 6, 128}, {2, 2, 128}, {2, 2, 256},
                                   {2, 2, 256}, {2, 2, 128},  {128},      {1024},      {512},       {2}};
    CHECK(agent1_shape_audit(desk, 64) == chain);
  }
  CHECK_THROWS_AS(build_agent1<double>(1, {8, 1}), ConfigError);
}

TEST_CASE("agent1 inference") {
  auto model = build_agent1<double>(7, {32, 4});
  Rng rng(3);
  const auto frame = synthetic_frame(32, true, rng);
  const double p = predict_frame(model, frame, 32);
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
  CHECK(predict_frame(model, frame, 32) == p);
  model.reseed(999);
  CHECK(predict_frame(model, frame, 32) == p);

  std::vector<const vision::Frame*> one{&frame};
  const auto probs = model.forward(frames_to_tensor<double>(one, 32), nn::Mode::Infer);
  CHECK(std::abs(probs[0] + probs[1] - 1.0) < 1e-9);

  const vision::Frame wrong(31, 32, 3);
  CHECK_THROWS_AS(predict_frame(model, wrong, 32), UsageError);

  SUBCASE("preprocess_frame") {
    vision::Frame gray(10, 6, 1, 255.0);
    const auto pre = preprocess_frame(gray, 16);
    CHECK(pre.width == 16);
    CHECK(pre.height == 16);
    CHECK(pre.channels == 3);
    CHECK((pre.pixels == 1.0).all());
  }
}

TEST_CASE("aggregate_video") {
  const std::vector<double> scores{0.2, 0.4, 0.6};
  CHECK(aggregate_video(scores) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(aggregate_video(std::vector<double>{0.9}) == 0.9);
  CHECK(aggregate_video(std::vector<double>{1.0, 1.0, 1.0}) == 1.0);
  CHECK_THROWS_AS(aggregate_video(std::vector<double>{}), UsageError);

  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(1 + rng.below(20));
    for (auto& v : s) v = rng.uniform();
    const double mean = aggregate_video(s);
    CHECK(mean >= *std::min_element(s.begin(), s.end()) - 1e-15);
    CHECK(mean <= *std::max_element(s.begin(), s.end()) + 1e-15);
    std::vector<double> shuffled = s;
    rng.shuffle(shuffled);
    CHECK(aggregate_video(shuffled) == doctest::Approx(mean).epsilon(1e-14));
  }
}

TEST_CASE("agent2 architecture") {
  auto model = build_agent2<double>(42);
  // Weights plus biases of 14->128->64->32->1.
  const int widths[] = {14, 128, 64, 32, 1};
  nn::Index expected = 0;
  for (int i = 0; i + 1 < 5; ++i) expected += widths[i] * widths[i + 1] + widths[i + 1];
  CHECK(expected == 12289);
  CHECK(model.parameter_count() == expected);
  const double p = predict_agent2(model, Eigen::VectorXd(Eigen::VectorXd::Zero(14)));
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  CHECK(build_agent2<double>(42).snapshot() == model.snapshot());

  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(14);
    for (int k = 0; k < 14; ++k) x[k] = rng.uniform(-20, 20);
    const double q = predict_agent2(model, x);
    CHECK(q > 0.0);
    CHECK(q < 1.0);
    CHECK(predict_agent2(model, x) == q);
  }
  CHECK_THROWS_AS(predict_agent2(model, Eigen::VectorXd(Eigen::VectorXd::Zero(13))), UsageError);
}

TEST_CASE("agent2 worked example") {
  auto model = build_agent2<double>(1, {4, {4, 4, 4}, 0.2});
  // Hand-set weights: W_l[i][j] = 0.1 * (i - j) + 0.05 * l, b_l[j] = 0.01 * j - 0.02.
  int layer_index = 0;
  std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> weights;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (model.layer(i).kind() != nn::LayerKind::Dense) continue;
    ++layer_index;
    auto& dense = static_cast<nn::Dense<double>&>(model.layer(i));
    Eigen::MatrixXd w(dense.in_width(), dense.out_width());
    Eigen::VectorXd b(dense.out_width());
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = 0.1 * static_cast<double>(r - c) + 0.05 * layer_index;
    for (Eigen::Index c = 0; c < b.size(); ++c) b[c] = 0.01 * static_cast<double>(c) - 0.02;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) dense.weights().matrix()(r, c) = w(r, c);
    dense.bias().data() = b;
    weights.emplace_back(w, b);
  }
  REQUIRE(weights.size() == 4);
  REQUIRE(model.layer(0).kind() == nn::LayerKind::Standardize);
  auto& std_layer = static_cast<nn::Standardize<double>&>(model.layer(0));
  const double mu[4] = {0.1, -0.2, 0.3, 0.0}, inv[4] = {2.0, 0.5, 1.0, 4.0};
  for (int i = 0; i < 4; ++i) {
    std_layer.mean()[i] = mu[i];
    std_layer.inv_scale()[i] = inv[i];
  }

  double x[4] = {0.5, -1.0, 2.0, 0.25};
  for (int i = 0; i < 4; ++i) x[i] = (x[i] - mu[i]) * inv[i];
  // h1 = relu(W1^T x + b1), h2 = relu(W2^T h1 + b2), h3 = relu(W3^T h2 + b3), y = sigmoid(w4^T h3 + b4).
  std::vector<double> h(x, x + 4);
  for (int l = 0; l < 3; ++l) {
    std::vector<double> next(4);
    for (int j = 0; j < 4; ++j) {
      double z = weights[l].second[j];
      for (int i = 0; i < 4; ++i) z += weights[l].first(i, j) * h[i];
      next[j] = z > 0 ? z : 0;
    }
    h = next;
  }
  double logit = weights[3].second[0];
  for (int i = 0; i < 4; ++i) logit += weights[3].first(i, 0) * h[i];
  const double manual = 1.0 / (1.0 + std::exp(-logit));

  Eigen::VectorXd input(4);
  input << 0.5, -1.0, 2.0, 0.25;
  CHECK(std::abs(predict_agent2(model, input) - manual) < 1e-9);
}

TEST_CASE("agent gradient checks") {
  const auto start = std::chrono::steady_clock::now();
  SUBCASE("agent2, 4-wide") {
    auto model = build_agent2<double>(5, {6, {4, 4, 4}, 0.2});
    Rng rng(6);
    jitter_biases(model, rng);
    nn::Tensor<double> x({5, 6}), y({5, 1});
    for (nn::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
    for (nn::Index i = 0; i < 5; ++i) y[i] = static_cast<double>(i % 2);
    const auto report = nn::gradient_check(model, bce_against(y), x, 1e-4, nn::Mode::Train, true);
    CHECK(report.max_relative_error < 1e-4);
    CHECK(report.input_relative_error < 1e-4);
  }
  SUBCASE("agent2, full width") {
    auto model = build_agent2<double>(5);
    Rng rng(7);
    jitter_biases(model, rng);
    nn::Tensor<double> x({4, 14}), y({4, 1});
    for (nn::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
    for (nn::Index i = 0; i < 4; ++i) y[i] = static_cast<double>(i % 2);
    const auto report = nn::gradient_check(model, bce_against(y), x);
    INFO("worst: " << report.worst_parameter);
    CHECK(report.max_relative_error < 1e-4);
  }
  SUBCASE("agent1, narrow") {
    auto model = build_agent1<double>(9, {35, 16});
    Rng rng(10);
    nn::Tensor<double> x({4, 35, 35, 3}), y({4, 2});
    for (nn::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform();
    for (nn::Index i = 0; i < 4; ++i) y.matrix()(i, i % 2) = 1.0;
    const auto report = nn::gradient_check(model, cce_against(y), x);
    INFO("worst: " << report.worst_parameter);
    CHECK(report.max_relative_error < 1e-4);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);
}

TEST_CASE("plateau schedule") {
  SUBCASE("strict improvement never stops") {
    PlateauSchedule s(1e-3, 10, 5, 0.5);
    for (int e = 1; e <= 100; ++e) {
      const auto d = s.update(e * 0.001);
      CHECK(d.improved);
      CHECK_FALSE(d.stop);
    }
    CHECK(s.lr() == 1e-3);
  }
  SUBCASE("flat score halves twice then stops") {
    PlateauSchedule s(1e-3, 10, 5, 0.5);
    int stopped_at = 0, reductions = 0;
    for (int e = 1; e <= 100 && !stopped_at; ++e) {
      const auto d = s.update(0.5);
      reductions += d.reduced;
      if (d.stop) stopped_at = e;
    }
    CHECK(stopped_at == 11);
    CHECK(reductions == 2);
    CHECK(s.lr() == doctest::Approx(0.25e-3).epsilon(1e-15));
  }
}

TEST_CASE("agent1 training") {
  const int size = 32;
  Rng rng(21);
  std::vector<vision::Frame> frames, val;
  std::vector<int> labels, val_labels;
  for (int i = 0; i < 60; ++i) {
    labels.push_back(i % 2);
    frames.push_back(synthetic_frame(size, i % 2 == 1, rng));
  }
  for (int i = 0; i < 10; ++i) {
    val_labels.push_back(i % 2);
    val.push_back(synthetic_frame(size, i % 2 == 1, rng));
  }
  Agent1Config config;
  config.arch = {size, 1};
  config.epochs = 12;
  config.augment = false;

  SUBCASE("separable frames are learned") {
    auto model = build_agent1<double>(42, config.arch);
    const auto history = train_agent1<double>(model, frames, labels, val, val_labels, config);
    CHECK(history.epochs.size() == 12);
    CHECK(history.epochs.back().train_acc >= 0.95);
    const auto scores = predict_frames(model, std::span<const vision::Frame>(frames), size);
    int correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= 0.5) == (labels[i] == 1);
    CHECK(correct >= 57);
    for (std::size_t e = 1; e < history.epochs.size(); ++e)
      CHECK(history.epochs[e].train_loss <= history.epochs[e - 1].train_loss * 1.05);
  }

  SUBCASE("zero learning rate leaves weights unchanged") {
    auto model = build_agent1<double>(42, config.arch);
    const auto before = trainable(model);
    Agent1Config frozen = config;
    frozen.epochs = 1;
    frozen.adam.learning_rate = 0.0;
    train_agent1<double>(model, frames, labels, {}, {}, frozen);
    CHECK(trainable(model) == before);
  }

  SUBCASE("same seed and data give identical weights") {
    Agent1Config short_run = config;
    short_run.epochs = 2;
    short_run.augment = true;
    auto a = build_agent1<double>(42, config.arch);
    auto b = build_agent1<double>(42, config.arch);
    train_agent1<double>(a, frames, labels, val, val_labels, short_run);
    train_agent1<double>(b, frames, labels, val, val_labels, short_run);
    CHECK(a.snapshot() == b.snapshot());
  }

  auto model = build_agent1<double>(42, config.arch);
  CHECK_THROWS_AS(train_agent1<double>(model, frames, std::vector<int>(60, 1), {}, {}, config), UsageError);
}

TEST_CASE("agent2 training") {
  Rng rng(31);
  auto make = [&](int n, Eigen::MatrixXd& x, std::vector<int>& y) {
    x.resize(n, 14);
    y.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = i % 2;
      for (int k = 0; k < 13; ++k) x(i, k) = rng.uniform(-5, 5);
      x(i, 13) = y[static_cast<std::size_t>(i)] == 1 ? rng.uniform(0.0, 0.15) : rng.uniform(0.85, 1.0);
    }
  };
  Eigen::MatrixXd train, val;
  std::vector<int> labels, val_labels;
  make(160, train, labels);
  make(40, val, val_labels);

  Agent2Config config;
  auto model = build_agent2<double>(42);
  const auto history = train_agent2<double>(model, train, labels, val, val_labels, config);
  REQUIRE(!history.epochs.empty());
  double best_val = 0.0;
  for (const auto& e : history.epochs) best_val = std::max(best_val, e.val_acc);
  CHECK(best_val >= 0.95);
  CHECK(history.epochs[static_cast<std::size_t>(history.best_epoch - 1)].val_acc == best_val);
  for (std::size_t e = 1; e < history.epochs.size(); ++e)
    CHECK(history.epochs[e].train_loss <= history.epochs[e - 1].train_loss * 1.05);

  // Restored weights reproduce the best validation accuracy.
  const auto p = predict_agent2_batch(model, val);
  int correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += (p[i] >= 0.5) == (val_labels[i] == 1);
  CHECK(static_cast<double>(correct) / 40.0 == best_val);
  if (history.stopped_early) CHECK(history.epochs.size() == static_cast<std::size_t>(history.best_epoch + 10));

  // The input layer carries the training-set column statistics.
  auto& std_layer = static_cast<nn::Standardize<double>&>(model.layer(0));
  for (Eigen::Index k = 0; k < 14; ++k) {
    const double mean = train.col(k).mean();
    const double sd = std::sqrt((train.col(k).array() - mean).square().mean());
    CHECK(std_layer.mean()[k] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(std_layer.inv_scale()[k] == doctest::Approx(1.0 / sd).epsilon(1e-12));
  }

  const auto json = to_json(history);
  CHECK(json["epochs"][0].contains("val_acc"));
  CHECK(json["epochs"][0]["lr"].get<double>() == 1e-3);

  auto again = build_agent2<double>(42);
  train_agent2<double>(again, train, labels, val, val_labels, config);
  CHECK(again.snapshot() == model.snapshot());

  CHECK_THROWS_AS(train_agent2<double>(again, train, std::vector<int>(160, 0), val, val_labels, config), UsageError);
}
