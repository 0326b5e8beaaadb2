#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepagent/errors.hpp"
#include "deepagent/nn/tensor.hpp"
#include "deepagent/rng.hpp"

namespace deepagent::nn {

enum class Mode { Train, Infer };

enum class Padding { Valid, Same };

/// Stable numeric codes; these are written into checkpoints.
enum class LayerKind : std::uint32_t {
  Conv2D = 1,
  BatchNorm = 2,
  MaxPool = 3,
  GlobalAvgPool = 4,
  Dense = 5,
  ReLU = 6,
  Dropout = 7,
  Softmax = 8,
  Sigmoid = 9,
  Standardize = 10,
};

const char* layer_kind_name(LayerKind kind);

template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar>* value;
  Tensor<Scalar>* grad;
};

template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode mode) = 0;
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) = 0;

  /// Trainable tensors paired with their gradient buffers.
  virtual std::vector<Parameter<Scalar>> parameters() { return {}; }
  /// Everything that must persist in a checkpoint, trainable or not.
  virtual std::vector<Tensor<Scalar>*> state() { return {}; }
  virtual void zero_grad() {}
  virtual void reseed(std::uint64_t) {}
  /// Discrete choices of the last forward pass (ReLU signs, pool winners).
  /// The network is smooth in its inputs and weights while these stay fixed.
  virtual void append_pattern(std::vector<Index>&) const {}

  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

 protected:
  template <typename T>
  const T& require_cache(const std::optional<T>& cache) const {
    if (!cache) throw UsageError(name_ + ": backward called without a forward cache");
    return *cache;
  }

  std::string name_;
};

namespace detail {

inline Index conv_out_dim(Index in, Index k, Index stride, Padding padding) {
  if (padding == Padding::Same) return (in + stride - 1) / stride;
  return (in - k) / stride + 1;
}

inline Index same_pad_before(Index in, Index k, Index stride) {
  const Index out = (in + stride - 1) / stride;
  const Index total = std::max<Index>((out - 1) * stride + k - in, 0);
  return total / 2;  // the odd pixel goes bottom/right
}

}  // namespace detail

template <typename Scalar>
void he_uniform(Tensor<Scalar>& t, Index fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
}

template <typename Scalar>
void xavier_uniform(Tensor<Scalar>& t, Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
}

// ---------------------------------------------------------------------------
// Convolution over NHWC input with a k x k x D_in x D_out kernel.
// O[i,j,d] = sum_{m,n,c} I[i*s+m, j*s+n, c] * K[m,n,c,d] + b[d]
// Implemented as im2col followed by one GEMM per sample.

template <typename Scalar>
class Conv2D final : public Layer<Scalar> {
 public:
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;

  Conv2D(Index in_channels, Index out_channels, Index kernel_size, Index stride = 1, Padding padding = Padding::Valid)
      : in_channels_(in_channels), out_channels_(out_channels), k_(kernel_size), stride_(stride), padding_(padding) {
    if (kernel_size < 1) throw ConfigError("conv kernel size must be >= 1");
    if (stride < 1) throw ConfigError("conv stride must be >= 1");
    kernel_ = Tensor<Scalar>({k_, k_, in_channels_, out_channels_});
    bias_ = Tensor<Scalar>({out_channels_});
    grad_kernel_ = Tensor<Scalar>(kernel_.shape());
    grad_bias_ = Tensor<Scalar>(bias_.shape());
  }

  LayerKind kind() const override { return LayerKind::Conv2D; }

  Index kernel_size() const noexcept { return k_; }
  Index stride() const noexcept { return stride_; }
  Padding padding() const noexcept { return padding_; }
  Tensor<Scalar>& kernel() noexcept { return kernel_; }
  Tensor<Scalar>& bias() noexcept { return bias_; }
  const Tensor<Scalar>& grad_kernel() const noexcept { return grad_kernel_; }
  const Tensor<Scalar>& grad_bias() const noexcept { return grad_bias_; }

  void init(Rng& rng) {
    he_uniform(kernel_, k_ * k_ * in_channels_, rng);
    bias_.set_zero();
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4)
      throw ConfigError(this->name_ + ": conv expects NHWC input, got " + shape_string(in));
    if (in[3] != in_channels_)
      throw ConfigError(this->name_ + ": input depth " + std::to_string(in[3]) + " does not match kernel depth " +
                        std::to_string(in_channels_));
    if (padding_ == Padding::Valid && (in[1] < k_ || in[2] < k_))
      throw ConfigError(this->name_ + ": input " + std::to_string(in[1]) + "x" + std::to_string(in[2]) +
                        " smaller than kernel " + std::to_string(k_) + "x" + std::to_string(k_));
    return {in[0], detail::conv_out_dim(in[1], k_, stride_, padding_),
            detail::conv_out_dim(in[2], k_, stride_, padding_), out_channels_};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode) override {
    const Shape out_shape = output_shape(input.shape());
    Tensor<Scalar> out(out_shape);
    const Index batch = out_shape[0];
    const Index out_pixels = out_shape[1] * out_shape[2];
    const auto kmat = kernel_matrix();
    RowMatrix patches;
    for (Index b = 0; b < batch; ++b) {
      im2col(input, b, out_shape, patches);
      Eigen::Map<RowMatrix> ob(out.ptr() + b * out_pixels * out_channels_, out_pixels, out_channels_);
      ob.noalias() = patches * kmat;
      ob.rowwise() += bias_.data().transpose();
    }
    cache_ = input;
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Tensor<Scalar>& input = this->require_cache(cache_);
    const Shape out_shape = output_shape(input.shape());
    if (grad_out.shape() != out_shape)
      throw UsageError(this->name_ + ": gradient shape " + shape_string(grad_out.shape()) +
                       " does not match forward output " + shape_string(out_shape));
    Tensor<Scalar> grad_in(input.shape());
    const Index batch = out_shape[0];
    const Index out_pixels = out_shape[1] * out_shape[2];
    const auto kmat = kernel_matrix();
    Eigen::Map<RowMatrix> gk(grad_kernel_.ptr(), k_ * k_ * in_channels_, out_channels_);
    RowMatrix patches;
    RowMatrix grad_patches;
    for (Index b = 0; b < batch; ++b) {
      Eigen::Map<const RowMatrix> gb(grad_out.ptr() + b * out_pixels * out_channels_, out_pixels, out_channels_);
      im2col(input, b, out_shape, patches);
      gk.noalias() += patches.transpose() * gb;
      grad_bias_.data() += gb.colwise().sum().transpose();
      grad_patches.noalias() = gb * kmat.transpose();
      col2im(grad_patches, b, out_shape, grad_in);
    }
    return grad_in;
  }

  std::vector<Parameter<Scalar>> parameters() override {
    return {{this->name_ + ".kernel", &kernel_, &grad_kernel_}, {this->name_ + ".bias", &bias_, &grad_bias_}};
  }
  std::vector<Tensor<Scalar>*> state() override { return {&kernel_, &bias_}; }
  void zero_grad() override {
    grad_kernel_.set_zero();
    grad_bias_.set_zero();
  }

 private:
  Eigen::Map<const RowMatrix> kernel_matrix() const {
    return Eigen::Map<const RowMatrix>(kernel_.ptr(), k_ * k_ * in_channels_, out_channels_);
  }

  std::pair<Index, Index> pad_before(const Shape& in) const {
    if (padding_ == Padding::Valid) return {0, 0};
    return {detail::same_pad_before(in[1], k_, stride_), detail::same_pad_before(in[2], k_, stride_)};
  }

  void im2col(const Tensor<Scalar>& input, Index b, const Shape& out_shape, RowMatrix& patches) const {
    const Shape& in = input.shape();
    const Index height = in[1], width = in[2], depth = in[3];
    const Index oh = out_shape[1], ow = out_shape[2];
    const auto [pad_top, pad_left] = pad_before(in);
    patches.setZero(oh * ow, k_ * k_ * depth);
    const Scalar* src = input.ptr() + b * height * width * depth;
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j) {
        Scalar* row = patches.data() + (i * ow + j) * patches.cols();
        for (Index m = 0; m < k_; ++m) {
          const Index y = i * stride_ + m - pad_top;
          if (y < 0 || y >= height) continue;
          for (Index n = 0; n < k_; ++n) {
            const Index x = j * stride_ + n - pad_left;
            if (x < 0 || x >= width) continue;
            std::copy_n(src + (y * width + x) * depth, depth, row + (m * k_ + n) * depth);
          }
        }
      }
    }
  }

  void col2im(const RowMatrix& grad_patches, Index b, const Shape& out_shape, Tensor<Scalar>& grad_in) const {
    const Shape& in = grad_in.shape();
    const Index height = in[1], width = in[2], depth = in[3];
    const Index oh = out_shape[1], ow = out_shape[2];
    const auto [pad_top, pad_left] = pad_before(in);
    Scalar* dst = grad_in.ptr() + b * height * width * depth;
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j) {
        const Scalar* row = grad_patches.data() + (i * ow + j) * grad_patches.cols();
        for (Index m = 0; m < k_; ++m) {
          const Index y = i * stride_ + m - pad_top;
          if (y < 0 || y >= height) continue;
          for (Index n = 0; n < k_; ++n) {
            const Index x = j * stride_ + n - pad_left;
            if (x < 0 || x >= width) continue;
            Scalar* d = dst + (y * width + x) * depth;
            const Scalar* s = row + (m * k_ + n) * depth;
            for (Index c = 0; c < depth; ++c) d[c] += s[c];
          }
        }
      }
    }
  }

  Index in_channels_, out_channels_, k_, stride_;
  Padding padding_;
  Tensor<Scalar> kernel_, bias_, grad_kernel_, grad_bias_;
  std::optional<Tensor<Scalar>> cache_;
};

// ---------------------------------------------------------------------------
// P[i,j,d] = max over the p x p window anchored at (i*s, j*s).

template <typename Scalar>
class MaxPool2D final : public Layer<Scalar> {
 public:
  MaxPool2D(Index window, Index stride) : window_(window), stride_(stride) {
    if (window < 1 || stride < 1) throw ConfigError("pool window and stride must be >= 1");
  }

  LayerKind kind() const override { return LayerKind::MaxPool; }
  Index window() const noexcept { return window_; }
  Index stride() const noexcept { return stride_; }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4) throw ConfigError(this->name_ + ": pool expects NHWC input, got " + shape_string(in));
    if (window_ > in[1] || window_ > in[2])
      throw ConfigError(this->name_ + ": pool window " + std::to_string(window_) + " larger than input " +
                        std::to_string(in[1]) + "x" + std::to_string(in[2]));
    return {in[0], (in[1] - window_) / stride_ + 1, (in[2] - window_) / stride_ + 1, in[3]};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode) override {
    const Shape out_shape = output_shape(input.shape());
    Tensor<Scalar> out(out_shape);
    std::vector<Index> argmax(static_cast<std::size_t>(out.size()));
    const Index height = input.dim(1), width = input.dim(2), depth = input.dim(3);
    const Index oh = out_shape[1], ow = out_shape[2];
    Index o = 0;
    for (Index b = 0; b < out_shape[0]; ++b) {
      for (Index i = 0; i < oh; ++i) {
        for (Index j = 0; j < ow; ++j) {
          for (Index d = 0; d < depth; ++d, ++o) {
            Index best = -1;
            Scalar best_value = -std::numeric_limits<Scalar>::infinity();
            for (Index m = 0; m < window_; ++m) {
              for (Index n = 0; n < window_; ++n) {
                const Index idx = ((b * height + i * stride_ + m) * width + j * stride_ + n) * depth + d;
                if (best < 0 || input[idx] > best_value) {
                  best = idx;
                  best_value = input[idx];
                }
              }
            }
            out[o] = best_value;
            argmax[static_cast<std::size_t>(o)] = best;
          }
        }
      }
    }
    input_shape_ = input.shape();
    argmax_ = std::move(argmax);
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const auto& argmax = this->require_cache(argmax_);
    if (grad_out.size() != static_cast<Index>(argmax.size()))
      throw UsageError(this->name_ + ": gradient shape does not match forward output");
    Tensor<Scalar> grad_in(input_shape_);
    for (std::size_t o = 0; o < argmax.size(); ++o) grad_in[argmax[o]] += grad_out[static_cast<Index>(o)];
    return grad_in;
  }

  void append_pattern(std::vector<Index>& out) const override {
    if (argmax_) out.insert(out.end(), argmax_->begin(), argmax_->end());
  }

 private:
  Index window_, stride_;
  Shape input_shape_;
  std::optional<std::vector<Index>> argmax_;
};

// ---------------------------------------------------------------------------
// Per-channel normalization over every axis except the last.

template <typename Scalar>
class BatchNorm final : public Layer<Scalar> {
 public:
  using RowMatrix = typename Tensor<Scalar>::RowMatrix;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  explicit BatchNorm(Index channels, double momentum = 0.99, double epsilon = 1e-3)
      : channels_(channels), momentum_(momentum), epsilon_(epsilon) {
    if (!(momentum > 0.0 && momentum < 1.0)) throw ConfigError("batch-norm momentum must lie in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("batch-norm epsilon must be positive");
    gamma_ = Tensor<Scalar>({channels}, Scalar(1));
    beta_ = Tensor<Scalar>({channels});
    running_mean_ = Tensor<Scalar>({channels});
    running_var_ = Tensor<Scalar>({channels}, Scalar(1));
    grad_gamma_ = Tensor<Scalar>({channels});
    grad_beta_ = Tensor<Scalar>({channels});
  }

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  double momentum() const noexcept { return momentum_; }
  double epsilon() const noexcept { return epsilon_; }
  Tensor<Scalar>& gamma() noexcept { return gamma_; }
  Tensor<Scalar>& beta() noexcept { return beta_; }
  Tensor<Scalar>& running_mean() noexcept { return running_mean_; }
  Tensor<Scalar>& running_var() noexcept { return running_var_; }

  Shape output_shape(const Shape& in) const override {
    if (in.empty() || in.back() != channels_)
      throw ConfigError(this->name_ + ": expected " + std::to_string(channels_) + " channels, got " +
                        shape_string(in));
    return in;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode mode) override {
    output_shape(input.shape());
    Tensor<Scalar> out(input.shape());
    const auto x = input.matrix();
    auto y = out.matrix();
    Cache cache;
    cache.mode = mode;
    if (mode == Mode::Train) {
      if (input.dim(0) < 2) throw UsageError(this->name_ + ": batch normalization needs a batch of at least 2 in training");
      const Scalar rows = static_cast<Scalar>(x.rows());
      const RowVector mean = x.colwise().sum() / rows;
      RowMatrix centered = x.rowwise() - mean;
      const RowVector var = centered.array().square().colwise().sum() / rows;
      cache.inv_std = (var.array() + Scalar(epsilon_)).rsqrt();
      cache.normalized = centered.array().rowwise() * cache.inv_std.array();
      const Scalar mom = static_cast<Scalar>(momentum_);
      running_mean_.data() = mom * running_mean_.data() + (Scalar(1) - mom) * mean.transpose();
      running_var_.data() = mom * running_var_.data() + (Scalar(1) - mom) * var.transpose();
    } else {
      cache.inv_std = (running_var_.data().array() + Scalar(epsilon_)).rsqrt().transpose();
      cache.normalized = (x.rowwise() - running_mean_.data().transpose()).array().rowwise() * cache.inv_std.array();
    }
    y = (cache.normalized.array().rowwise() * gamma_.data().transpose().array()).rowwise() +
        beta_.data().transpose().array();
    cache.shape = input.shape();
    cache_ = std::move(cache);
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Cache& c = this->require_cache(cache_);
    if (grad_out.shape() != c.shape) throw UsageError(this->name_ + ": gradient shape does not match forward output");
    const auto g = grad_out.matrix();
    grad_gamma_.data() += (g.array() * c.normalized.array()).colwise().sum().transpose().matrix();
    grad_beta_.data() += g.colwise().sum().transpose();
    const RowMatrix gxhat = g.array().rowwise() * gamma_.data().transpose().array();
    Tensor<Scalar> grad_in(c.shape);
    auto dx = grad_in.matrix();
    if (c.mode == Mode::Train) {
      const Scalar rows = static_cast<Scalar>(g.rows());
      const RowVector sum_g = gxhat.colwise().sum();
      const RowVector sum_gx = (gxhat.array() * c.normalized.array()).colwise().sum();
      dx = ((gxhat * rows).rowwise() - sum_g - (c.normalized.array().rowwise() * sum_gx.array()).matrix());
      dx = (dx.array().rowwise() * (c.inv_std.array() / rows)).matrix();
    } else {
      dx = (gxhat.array().rowwise() * c.inv_std.array()).matrix();
    }
    return grad_in;
  }

  std::vector<Parameter<Scalar>> parameters() override {
    return {{this->name_ + ".gamma", &gamma_, &grad_gamma_}, {this->name_ + ".beta", &beta_, &grad_beta_}};
  }
  std::vector<Tensor<Scalar>*> state() override { return {&gamma_, &beta_, &running_mean_, &running_var_}; }
  void zero_grad() override {
    grad_gamma_.set_zero();
    grad_beta_.set_zero();
  }

 private:
  struct Cache {
    Mode mode = Mode::Train;
    Shape shape;
    RowMatrix normalized;
    RowVector inv_std;
  };

  Index channels_;
  double momentum_, epsilon_;
  Tensor<Scalar> gamma_, beta_, running_mean_, running_var_, grad_gamma_, grad_beta_;
  std::optional<Cache> cache_;
};

// ---------------------------------------------------------------------------
// g[d] = mean over H x W of channel d.

template <typename Scalar>
class GlobalAvgPool final : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::GlobalAvgPool; }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4) throw ConfigError(this->name_ + ": GAP expects NHWC input, got " + shape_string(in));
    return {in[0], in[3]};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode) override {
    const Shape out_shape = output_shape(input.shape());
    const Index pixels = input.dim(1) * input.dim(2);
    Tensor<Scalar> out(out_shape);
    for (Index b = 0; b < out_shape[0]; ++b) {
      Eigen::Map<const typename Tensor<Scalar>::RowMatrix> xb(input.ptr() + b * pixels * out_shape[1], pixels,
                                                              out_shape[1]);
      out.matrix().row(b) = xb.colwise().sum() / static_cast<Scalar>(pixels);
    }
    input_shape_ = input.shape();
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Shape& in = this->require_cache(input_shape_);
    const Index pixels = in[1] * in[2];
    Tensor<Scalar> grad_in(in);
    for (Index b = 0; b < in[0]; ++b) {
      Eigen::Map<typename Tensor<Scalar>::RowMatrix> gb(grad_in.ptr() + b * pixels * in[3], pixels, in[3]);
      gb.rowwise() = grad_out.matrix().row(b) / static_cast<Scalar>(pixels);
    }
    return grad_in;
  }

 private:
  std::optional<Shape> input_shape_;
};

// ---------------------------------------------------------------------------
// y = x W + b over (batch, in) rows; W is in x out.

template <typename Scalar>
class Dense final : public Layer<Scalar> {
 public:
  Dense(Index in, Index out) : in_(in), out_(out) {
    if (in < 1 || out < 1) throw ConfigError("dense widths must be >= 1");
    weights_ = Tensor<Scalar>({in, out});
    bias_ = Tensor<Scalar>({out});
    grad_weights_ = Tensor<Scalar>(weights_.shape());
    grad_bias_ = Tensor<Scalar>(bias_.shape());
  }

  LayerKind kind() const override { return LayerKind::Dense; }
  Index in_width() const noexcept { return in_; }
  Index out_width() const noexcept { return out_; }
  Tensor<Scalar>& weights() noexcept { return weights_; }
  Tensor<Scalar>& bias() noexcept { return bias_; }

  void init_he(Rng& rng) {
    he_uniform(weights_, in_, rng);
    bias_.set_zero();
  }
  void init_xavier(Rng& rng) {
    xavier_uniform(weights_, in_, out_, rng);
    bias_.set_zero();
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 2 || in[1] != in_)
      throw ConfigError(this->name_ + ": expected (batch, " + std::to_string(in_) + ") input, got " +
                        shape_string(in));
    return {in[0], out_};
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode) override {
    Tensor<Scalar> out(output_shape(input.shape()));
    out.matrix().noalias() = input.matrix() * weights_.matrix();
    out.matrix().rowwise() += bias_.data().transpose();
    cache_ = input;
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Tensor<Scalar>& input = this->require_cache(cache_);
    if (grad_out.shape() != output_shape(input.shape()))
      throw UsageError(this->name_ + ": gradient shape does not match forward output");
    grad_weights_.matrix().noalias() += input.matrix().transpose() * grad_out.matrix();
    grad_bias_.data() += grad_out.matrix().colwise().sum().transpose();
    Tensor<Scalar> grad_in(input.shape());
    grad_in.matrix().noalias() = grad_out.matrix() * weights_.matrix().transpose();
    return grad_in;
  }

  std::vector<Parameter<Scalar>> parameters() override {
    return {{this->name_ + ".weights", &weights_, &grad_weights_}, {this->name_ + ".bias", &bias_, &grad_bias_}};
  }
  std::vector<Tensor<Scalar>*> state() override { return {&weights_, &bias_}; }
  void zero_grad() override {
    grad_weights_.set_zero();
    grad_bias_.set_zero();
  }

 private:
  Index in_, out_;
  Tensor<Scalar> weights_, bias_, grad_weights_, grad_bias_;
  std::optional<Tensor<Scalar>> cache_;
};

template <typename Scalar>
class ReLU final : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode) override {
    Tensor<Scalar> out = input;
    out.data() = input.data().cwiseMax(Scalar(0));
    cache_ = input;
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Tensor<Scalar>& input = this->require_cache(cache_);
    Tensor<Scalar> grad_in = grad_out;
    grad_in.data() = (input.data().array() > Scalar(0)).select(grad_out.data(), Scalar(0));
    return grad_in;
  }

  void append_pattern(std::vector<Index>& out) const override {
    if (!cache_) return;
    for (Index i = 0; i < cache_->size(); ++i) out.push_back((*cache_)[i] > Scalar(0));
  }

 private:
  std::optional<Tensor<Scalar>> cache_;
};

template <typename Scalar>
class Sigmoid final : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::Sigmoid; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode) override {
    Tensor<Scalar> out = input;
    out.data() = input.data().unaryExpr([](Scalar v) { return sigmoid(v); });
    cache_ = out;
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Tensor<Scalar>& y = this->require_cache(cache_);
    Tensor<Scalar> grad_in = grad_out;
    grad_in.data() = grad_out.data().array() * y.data().array() * (Scalar(1) - y.data().array());
    return grad_in;
  }

  static Scalar sigmoid(Scalar v) {
    // Split by sign so exp never overflows.
    if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  }

 private:
  std::optional<Tensor<Scalar>> cache_;
};

/// Softmax over the last axis, shifted by the row maximum before exponentiation.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  Tensor<Scalar> out = logits;
  auto m = out.matrix();
  for (Index r = 0; r < m.rows(); ++r) {
    const Scalar shift = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - shift).exp();
    m.row(r) /= m.row(r).sum();
  }
  return out;
}

template <typename Scalar>
class Softmax final : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::Softmax; }
  Shape output_shape(const Shape& in) const override {
    if (in.empty() || in.back() < 2) throw ConfigError(this->name_ + ": softmax needs at least 2 classes");
    return in;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode) override {
    output_shape(input.shape());
    cache_ = softmax(input);
    return *cache_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    const Tensor<Scalar>& y = this->require_cache(cache_);
    Tensor<Scalar> grad_in(y.shape());
    const auto ym = y.matrix();
    const auto gm = grad_out.matrix();
    auto dm = grad_in.matrix();
    for (Index r = 0; r < ym.rows(); ++r) {
      const Scalar dot = ym.row(r).dot(gm.row(r));
      dm.row(r) = ym.row(r).array() * (gm.row(r).array() - dot);
    }
    return grad_in;
  }

 private:
  std::optional<Tensor<Scalar>> cache_;
};

/// Inverted dropout: train mode zeroes units with probability p and scales the
/// survivors by 1/(1-p); infer mode is the identity.
template <typename Scalar>
class Dropout final : public Layer<Scalar> {
 public:
  explicit Dropout(double rate, std::uint64_t seed = 42) : rate_(rate), rng_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  }

  LayerKind kind() const override { return LayerKind::Dropout; }
  double rate() const noexcept { return rate_; }
  Shape output_shape(const Shape& in) const override { return in; }
  void reseed(std::uint64_t seed) override { rng_ = Rng(seed); }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode mode) override {
    if (mode == Mode::Infer || rate_ == 0.0) {
      mask_.reset();
      return input;
    }
    typename Tensor<Scalar>::Vector mask(input.size());
    const Scalar scale = Scalar(1) / static_cast<Scalar>(1.0 - rate_);
    for (Index i = 0; i < mask.size(); ++i) mask[i] = rng_.bernoulli(rate_) ? Scalar(0) : scale;
    Tensor<Scalar> out = input;
    out.data().array() *= mask.array();
    mask_ = std::move(mask);
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    if (!mask_) return grad_out;
    Tensor<Scalar> grad_in = grad_out;
    grad_in.data().array() *= mask_->array();
    return grad_in;
  }

 private:
  double rate_;
  Rng rng_;
  std::optional<typename Tensor<Scalar>::Vector> mask_;
};

/// Fixed per-feature affine map (x - mean) * inv_scale on the last dimension.
/// Not trainable; the statistics are set once from training data and persist
/// in checkpoints. A fresh layer is the identity.
template <typename Scalar>
class Standardize final : public Layer<Scalar> {
 public:
  explicit Standardize(Index width) : width_(width) {
    if (width < 1) throw ConfigError("standardize width must be >= 1");
    mean_ = Tensor<Scalar>({width});
    inv_scale_ = Tensor<Scalar>({width}, Scalar(1));
  }

  LayerKind kind() const override { return LayerKind::Standardize; }
  Tensor<Scalar>& mean() noexcept { return mean_; }
  Tensor<Scalar>& inv_scale() noexcept { return inv_scale_; }

  /// Population statistics of `rows` (samples x width); zero spread maps to 1.
  void fit(const Eigen::MatrixXd& rows) {
    if (rows.cols() != width_ || rows.rows() < 1)
      throw UsageError(this->name_ + ": cannot fit on a " + std::to_string(rows.rows()) + "x" +
                       std::to_string(rows.cols()) + " matrix");
    const Eigen::RowVectorXd mu = rows.colwise().mean();
    const Eigen::RowVectorXd sd = (rows.rowwise() - mu).array().square().colwise().mean().sqrt().matrix();
    for (Index k = 0; k < width_; ++k) {
      mean_[k] = static_cast<Scalar>(mu[k]);
      inv_scale_[k] = static_cast<Scalar>(sd[k] > 0.0 ? 1.0 / sd[k] : 1.0);
    }
  }

  Shape output_shape(const Shape& in) const override {
    if (in.empty() || in.back() != width_)
      throw ConfigError(this->name_ + ": expected last dimension " + std::to_string(width_) + ", got " +
                        shape_string(in));
    return in;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode) override {
    Tensor<Scalar> out(output_shape(input.shape()));
    out.matrix() = (input.matrix().rowwise() - mean_.data().transpose()).array().rowwise() *
                   inv_scale_.data().transpose().array();
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) override {
    Tensor<Scalar> grad_in = grad_out;
    grad_in.matrix().array().rowwise() *= inv_scale_.data().transpose().array();
    return grad_in;
  }

  std::vector<Tensor<Scalar>*> state() override { return {&mean_, &inv_scale_}; }

 private:
  Index width_;
  Tensor<Scalar> mean_;
  Tensor<Scalar> inv_scale_;
};

inline const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::GlobalAvgPool: return "gap";
    case LayerKind::Dense: return "dense";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Standardize: return "standardize";
  }
  return "unknown";
}

}  // namespace deepagent::nn
