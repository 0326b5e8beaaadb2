#pragma once

#include <Eigen/Core>

namespace deepagent::fusion {

/// Column-wise z-scoring with population standard deviation; zero-variance
/// columns keep σ = 1.
class Standardizer {
 public:
  Standardizer() = default;

  /// Rows are samples.
  static Standardizer fit(const Eigen::MatrixXd& data);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& data) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& z) const;

  bool fitted() const noexcept { return mean_.size() > 0; }
  const Eigen::RowVectorXd& mean() const noexcept { return mean_; }
  const Eigen::RowVectorXd& sigma() const noexcept { return sigma_; }

 private:
  Eigen::RowVectorXd mean_, sigma_;
};

}  // namespace deepagent::fusion
