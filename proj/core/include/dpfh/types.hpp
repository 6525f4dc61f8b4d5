#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpfh {

/// Design matrix is rank deficient or a weighted normal matrix is not invertible.
struct SingularDesignError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An iterative solver exceeded its iteration cap.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One area: direct estimate, covariates, known sampling variance.
struct AreaObservation {
  double y = 0.0;          ///< direct estimate
  Eigen::VectorXd x;       ///< covariate vector, length p
  double d = 0.0;          ///< sampling variance, strictly positive
};

/// Regression coefficients and random-effect variance.
struct ModelParams {
  Eigen::VectorXd beta;
  double a = 0.0;

  ModelParams() = default;
  ModelParams(Eigen::VectorXd beta_in, double a_in);
};

/// Robustness tuning parameter, valid on [0, 1).
/// Zero selects the classical (non-robust) limit.
class Alpha {
 public:
  explicit Alpha(double value);
  double value() const { return value_; }
  bool is_zero() const { return value_ == 0.0; }

 private:
  double value_ = 0.0;
};

/// Immutable collection of areas sharing one covariate dimension.
///
/// Construction validates: at least p + 2 areas, positive sampling
/// variances, uniform covariate length, full column rank design.
class Dataset {
 public:
  explicit Dataset(std::vector<AreaObservation> areas);

  int size() const { return static_cast<int>(areas_.size()); }
  int dim() const { return static_cast<int>(x_.cols()); }
  const AreaObservation& operator[](int i) const { return areas_[static_cast<size_t>(i)]; }
  const std::vector<AreaObservation>& areas() const { return areas_; }

  const Eigen::MatrixXd& design() const { return x_; }        ///< m x p
  const Eigen::VectorXd& direct() const { return y_; }        ///< y_i
  const Eigen::VectorXd& sampling_var() const { return d_; }  ///< D_i

  /// max_i x_i' (X'X)^{-1} x_i, the leverage bound used as a design diagnostic.
  double max_leverage() const;

 private:
  std::vector<AreaObservation> areas_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd d_;
};

}  // namespace dpfh
