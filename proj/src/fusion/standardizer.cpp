#include "deepagent/fusion/standardizer.hpp"

#include <string>

#include "deepagent/errors.hpp"

namespace deepagent::fusion {

Standardizer Standardizer::fit(const Eigen::MatrixXd& data) {
  if (data.rows() == 0) throw UsageError("cannot fit a standardizer on an empty set");
  Standardizer s;
  s.mean_ = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - s.mean_;
  s.sigma_ = (centered.colwise().squaredNorm() / static_cast<double>(data.rows())).cwiseSqrt();
  for (Eigen::Index k = 0; k < s.sigma_.size(); ++k)
    if (s.sigma_[k] == 0.0) s.sigma_[k] = 1.0;
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& data) const {
  if (!fitted()) throw UsageError("standardizer used before fit");
  if (data.cols() != mean_.size())
    throw UsageError("standardizer fit on " + std::to_string(mean_.size()) + " columns, got " +
                     std::to_string(data.cols()));
  return (data.rowwise() - mean_).array().rowwise() / sigma_.array();
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& z) const {
  return apply(Eigen::MatrixXd(z.transpose())).row(0).transpose();
}

}  // namespace deepagent::fusion
