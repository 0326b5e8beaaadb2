#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "deepagent/errors.hpp"
#include "deepagent/nn/layers.hpp"

namespace deepagent::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

/// Raw (not yet bias-corrected) moment accumulators, one pair per parameter tensor.
template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::int64_t t = 0;
  std::vector<typename Tensor<Scalar>::Vector> m, v;
};

/// theta <- theta - eta * m_hat / (sqrt(v_hat) + eps), with m_hat, v_hat bias corrected.
template <typename Scalar>
void adam_step(std::span<const Parameter<Scalar>> params, AdamState<Scalar>& state) {
  for (const auto& p : params)
    if (!p.grad->all_finite()) throw TrainingError("non-finite gradient in parameter " + p.name);
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Tensor<Scalar>::Vector::Zero(p.value->size()));
      state.v.push_back(Tensor<Scalar>::Vector::Zero(p.value->size()));
    }
  }
  if (state.m.size() != params.size()) throw UsageError("optimizer state does not match parameter list");

  ++state.t;
  const auto& c = state.config;
  const Scalar b1 = static_cast<Scalar>(c.beta1), b2 = static_cast<Scalar>(c.beta2);
  const Scalar correction1 = static_cast<Scalar>(1.0 - std::pow(c.beta1, static_cast<double>(state.t)));
  const Scalar correction2 = static_cast<Scalar>(1.0 - std::pow(c.beta2, static_cast<double>(state.t)));
  const Scalar eta = static_cast<Scalar>(c.learning_rate), eps = static_cast<Scalar>(c.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].grad->data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    params[i].value->data().array() -=
        eta * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  }
}

}  // namespace deepagent::nn
