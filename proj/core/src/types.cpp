#include "dpfh/types.hpp"

#include <cmath>

namespace dpfh {

ModelParams::ModelParams(Eigen::VectorXd beta_in, double a_in)
    : beta(std::move(beta_in)), a(a_in) {
  if (a < 0.0 || !std::isfinite(a)) {
    throw std::domain_error("ModelParams: random-effect variance must be finite and >= 0");
  }
  if (!beta.allFinite()) {
    throw std::domain_error("ModelParams: non-finite regression coefficient");
  }
}

Alpha::Alpha(double value) : value_(value) {
  if (!(value >= 0.0 && value < 1.0)) {
    throw std::domain_error("Alpha: value must lie in [0, 1)");
  }
}

Dataset::Dataset(std::vector<AreaObservation> areas) : areas_(std::move(areas)) {
  const int m = static_cast<int>(areas_.size());
  if (m == 0) {
    throw std::invalid_argument("Dataset: empty");
  }
  const int p = static_cast<int>(areas_[0].x.size());
  if (p == 0) {
    throw std::invalid_argument("Dataset: zero covariate dimension");
  }
  if (m < p + 2) {
    throw std::invalid_argument("Dataset: need at least p + 2 areas");
  }
  x_.resize(m, p);
  y_.resize(m);
  d_.resize(m);
  for (int i = 0; i < m; ++i) {
    const auto& obs = areas_[static_cast<size_t>(i)];
    if (static_cast<int>(obs.x.size()) != p) {
      throw std::invalid_argument("Dataset: inconsistent covariate length at area " +
                                  std::to_string(i));
    }
    if (!(obs.d > 0.0) || !std::isfinite(obs.d)) {
      throw std::invalid_argument("Dataset: sampling variance must be > 0 at area " +
                                  std::to_string(i));
    }
    if (!std::isfinite(obs.y) || !obs.x.allFinite()) {
      throw std::invalid_argument("Dataset: non-finite value at area " + std::to_string(i));
    }
    x_.row(i) = obs.x;
    y_(i) = obs.y;
    d_(i) = obs.d;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x_);
  if (qr.rank() < p) {
    throw SingularDesignError("Dataset: design matrix is rank deficient");
  }
}

double Dataset::max_leverage() const {
  Eigen::MatrixXd xtx = x_.transpose() * x_;
  Eigen::LLT<Eigen::MatrixXd> llt(xtx);
  double lev = 0.0;
  for (int i = 0; i < size(); ++i) {
    Eigen::VectorXd xi = x_.row(i).transpose();
    lev = std::max(lev, xi.dot(llt.solve(xi)));
  }
  return lev;
}

}  // namespace dpfh
