#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepagent/nn/sequential.hpp"

namespace deepagent::nn {

/// Maps a network output to (loss, dLoss/dOutput).
template <typename Scalar>
using LossFunction = std::function<std::pair<Scalar, Tensor<Scalar>>(const Tensor<Scalar>&)>;

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double input_relative_error = 0.0;  // only filled when the input is checked
  long compared = 0;
  long skipped = 0;  // elements whose stencil crosses an activation switch at every step size
};

/// Gradients smaller than kGradientFloor are compared absolutely; below that
/// scale central differences are dominated by rounding in the loss.
inline constexpr double kGradientFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradientFloor});
}

/// Compares backprop gradients against five-point central differences for
/// every parameter element (and optionally every input element). Dropout streams
/// are reseeded before each forward pass so masks are identical.
///
/// A difference quotient only measures the derivative when the loss is smooth
/// over the whole stencil. If any stencil point changes the activation pattern
/// (a ReLU sign or a pool winner), the element is retried with h / 10 and
/// h / 100 and skipped if the pattern still changes.
template <typename Scalar>
GradientCheckReport gradient_check(Sequential<Scalar>& model, const LossFunction<Scalar>& loss,
                                   const Tensor<Scalar>& input, double h = 1e-4, Mode mode = Mode::Train,
                                   bool check_input = false, std::uint64_t seed = 7) {
  model.reseed(seed);
  model.zero_grad();
  const auto [value, grad_out] = loss(model.forward(input, mode));
  const Tensor<Scalar> grad_input = model.backward(grad_out);
  const std::vector<Index> pattern = model.activation_pattern();

  // Loss at the current weights, or nullopt when the activation pattern moved.
  auto evaluate = [&](const Tensor<Scalar>& x) -> std::optional<double> {
    model.reseed(seed);
    const double v = static_cast<double>(loss(model.forward(x, mode)).first);
    if (model.activation_pattern() != pattern) return std::nullopt;
    return v;
  };
  // (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / 12h, restoring the value afterwards.
  auto derivative = [h](Scalar& value, const auto& f) -> std::optional<double> {
    const Scalar saved = value;
    const double steps[4] = {2.0, 1.0, -1.0, -2.0};
    for (const double step : {h, h / 10.0, h / 100.0}) {
      double at[4];
      bool smooth = true;
      for (int k = 0; k < 4 && smooth; ++k) {
        value = static_cast<Scalar>(static_cast<double>(saved) + steps[k] * step);
        const auto v = f();
        smooth = v.has_value();
        if (smooth) at[k] = *v;
      }
      value = saved;
      if (smooth) return (-at[0] + 8.0 * at[1] - 8.0 * at[2] + at[3]) / (12.0 * step);
    }
    return std::nullopt;
  };

  GradientCheckReport report;
  for (auto& p : model.parameters()) {
    for (Index i = 0; i < p.value->size(); ++i) {
      const auto numeric = derivative((*p.value)[i], [&] { return evaluate(input); });
      if (!numeric) {
        ++report.skipped;
        continue;
      }
      ++report.compared;
      const double err = relative_error(static_cast<double>((*p.grad)[i]), *numeric);
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  if (check_input) {
    Tensor<Scalar> x = input;
    for (Index i = 0; i < x.size(); ++i) {
      const auto numeric = derivative(x[i], [&] { return evaluate(x); });
      if (!numeric) {
        ++report.skipped;
        continue;
      }
      ++report.compared;
      report.input_relative_error =
          std::max(report.input_relative_error, relative_error(static_cast<double>(grad_input[i]), *numeric));
    }
  }
  return report;
}

}  // namespace deepagent::nn
