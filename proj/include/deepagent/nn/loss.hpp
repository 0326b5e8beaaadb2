#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "deepagent/errors.hpp"
#include "deepagent/nn/tensor.hpp"

namespace deepagent::nn {

inline constexpr double kLogClamp = 1e-12;

template <typename Scalar>
struct LossResult {
  Scalar loss;
  Tensor<Scalar> grad;  // d(mean loss)/d(prediction)
};

template <typename Derived>
void require_one_hot(const Eigen::MatrixBase<Derived>& y) {
  int ones = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 1) {
      ++ones;
    } else if (y(i) != 0) {
      throw UsageError("cross-entropy target is not one-hot");
    }
  }
  if (ones != 1) throw UsageError("cross-entropy target is not one-hot");
}

/// L = -sum_i y_i log(y_hat_i), with y_hat clamped to [1e-12, 1].
template <typename A, typename B>
typename A::Scalar cce_loss(const Eigen::MatrixBase<A>& y_true, const Eigen::MatrixBase<B>& y_pred) {
  using Scalar = typename A::Scalar;
  require_one_hot(y_true);
  if (y_true.size() != y_pred.size()) throw UsageError("cross-entropy target and prediction widths differ");
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < y_true.size(); ++i)
    if (y_true(i) != 0) loss -= y_true(i) * std::log(std::clamp<Scalar>(y_pred(i), Scalar(kLogClamp), Scalar(1)));
  return loss;
}

/// Mean CCE over a (batch, classes) probability tensor and its gradient.
template <typename Scalar>
LossResult<Scalar> cce_batch(const Tensor<Scalar>& probs, const Tensor<Scalar>& one_hot) {
  if (probs.shape() != one_hot.shape()) throw UsageError("cross-entropy target shape does not match prediction");
  const auto p = probs.matrix();
  const auto y = one_hot.matrix();
  const Scalar rows = static_cast<Scalar>(p.rows());
  LossResult<Scalar> out{Scalar(0), Tensor<Scalar>(probs.shape())};
  auto g = out.grad.matrix();
  for (Index r = 0; r < p.rows(); ++r) {
    out.loss += cce_loss(y.row(r), p.row(r)) / rows;
    for (Index c = 0; c < p.cols(); ++c) {
      const Scalar v = p(r, c);
      if (y(r, c) != 0 && v >= Scalar(kLogClamp)) g(r, c) = -y(r, c) / (v * rows);
    }
  }
  return out;
}

/// L = -y log(y_hat) - (1-y) log(1-y_hat), y_hat clamped to [1e-12, 1-1e-12].
template <typename Scalar>
Scalar bce_loss(Scalar y, Scalar y_hat) {
  if (y != Scalar(0) && y != Scalar(1)) throw UsageError("binary cross-entropy label must be 0 or 1");
  const Scalar p = std::clamp<Scalar>(y_hat, Scalar(kLogClamp), Scalar(1) - Scalar(kLogClamp));
  return y == Scalar(1) ? -std::log(p) : -std::log(Scalar(1) - p);
}

/// Mean BCE over a (batch, 1) probability tensor and its gradient.
template <typename Scalar>
LossResult<Scalar> bce_batch(const Tensor<Scalar>& probs, const Tensor<Scalar>& labels) {
  if (probs.size() != labels.size()) throw UsageError("binary cross-entropy label count does not match batch");
  const Scalar n = static_cast<Scalar>(probs.size());
  const Scalar lo = Scalar(kLogClamp), hi = Scalar(1) - Scalar(kLogClamp);
  LossResult<Scalar> out{Scalar(0), Tensor<Scalar>(probs.shape())};
  for (Index i = 0; i < probs.size(); ++i) {
    const Scalar y = labels[i], p = probs[i];
    out.loss += bce_loss(y, p) / n;
    if (p >= lo && p <= hi) out.grad[i] = (y == Scalar(1) ? -Scalar(1) / p : Scalar(1) / (Scalar(1) - p)) / n;
  }
  return out;
}

}  // namespace deepagent::nn
