#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "deepagent/errors.hpp"

namespace deepagent::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  return os.str();
}

/// Dense N-dimensional array stored row-major in an Eigen vector. Image
/// activations use NHWC order; dense activations are (batch, width).
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(checked_size(shape_))) {}

  Tensor(Shape shape, Scalar fill) : shape_(std::move(shape)), data_(Vector::Constant(checked_size(shape_), fill)) {}

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size())
      throw ConfigError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                        shape_string(shape_));
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values) : Tensor(std::move(shape), from_list(values)) {}

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.size() == 0; }

  Vector& data() noexcept { return data_; }
  const Vector& data() const noexcept { return data_; }
  Scalar* ptr() noexcept { return data_.data(); }
  const Scalar* ptr() const noexcept { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// View as a row-major matrix whose column count is the last dimension.
  MatrixMap matrix() { return MatrixMap(data_.data(), size() / last(), last()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), size() / last(), last()); }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  void set_zero() { data_.setZero(); }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Index last() const { return shape_.empty() ? 1 : std::max<Index>(shape_.back(), 1); }

  static Index checked_size(const Shape& shape) {
    for (Index d : shape)
      if (d <= 0) throw ConfigError("tensor dimensions must be positive, got " + shape_string(shape));
    return shape_size(shape);
  }

  static Vector from_list(std::initializer_list<Scalar> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar x : values) v[i++] = x;
    return v;
  }

  Shape shape_;
  Vector data_;
};

}  // namespace deepagent::nn
