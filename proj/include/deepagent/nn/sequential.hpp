#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "deepagent/nn/layers.hpp"

namespace deepagent::nn {

/// Ordered layer stack. Move-only; weights are snapshotted through state().
template <typename Scalar>
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(std::string name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    layer->set_name(std::move(name));
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<Scalar>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<Scalar>& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor<Scalar> forward(const Tensor<Scalar>& input, Mode mode) {
    Tensor<Scalar> x = input;
    for (auto& layer : layers_) x = layer->forward(x, mode);
    return x;
  }

  /// Runs only layers [0, end).
  Tensor<Scalar> forward_prefix(const Tensor<Scalar>& input, std::size_t end, Mode mode) {
    Tensor<Scalar> x = input;
    for (std::size_t i = 0; i < std::min(end, layers_.size()); ++i) x = layers_[i]->forward(x, mode);
    return x;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) {
    Tensor<Scalar> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  /// Output shape after every layer, starting with the input itself.
  std::vector<Shape> shape_chain(const Shape& input) const {
    std::vector<Shape> chain{input};
    for (const auto& layer : layers_) chain.push_back(layer->output_shape(chain.back()));
    return chain;
  }

  std::vector<Parameter<Scalar>> parameters() {
    std::vector<Parameter<Scalar>> all;
    for (auto& layer : layers_)
      for (auto& p : layer->parameters()) all.push_back(p);
    return all;
  }

  Index parameter_count() {
    Index n = 0;
    for (auto& p : parameters()) n += p.value->size();
    return n;
  }

  std::vector<Tensor<Scalar>*> state() {
    std::vector<Tensor<Scalar>*> all;
    for (auto& layer : layers_)
      for (auto* t : layer->state()) all.push_back(t);
    return all;
  }

  std::vector<Tensor<Scalar>> snapshot() {
    std::vector<Tensor<Scalar>> copy;
    for (auto* t : state()) copy.push_back(*t);
    return copy;
  }

  void restore(const std::vector<Tensor<Scalar>>& saved) {
    auto tensors = state();
    if (tensors.size() != saved.size()) throw UsageError("snapshot does not match model layout");
    for (std::size_t i = 0; i < tensors.size(); ++i) *tensors[i] = saved[i];
  }

  void zero_grad() {
    for (auto& layer : layers_) layer->zero_grad();
  }

  /// Resets every dropout stream; each layer gets its own derived seed.
  void reseed(std::uint64_t seed) {
    const Rng base(seed);
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->reseed(base.derive(i).next_u64());
  }

  /// Activation pattern of the last forward pass, concatenated over layers.
  std::vector<Index> activation_pattern() const {
    std::vector<Index> out;
    for (const auto& layer : layers_) layer->append_pattern(out);
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

}  // namespace deepagent::nn
