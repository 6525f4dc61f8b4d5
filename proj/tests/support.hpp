#pragma once

// Shared helpers for the test suites: composite-Simpson quadrature used as an
// independent oracle for Gaussian-moment identities, and small dataset
// builders.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dpfh/types.hpp"

namespace testsupport {

/// Composite Simpson on [lo, hi] with n panels (n even).
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) {
    acc += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

/// Integral of f against the N(0, var) density over +-12 standard deviations.
inline double gauss_expect(const std::function<double(double)>& f, double var,
                           int n = 20000) {
  const double sd = std::sqrt(var);
  auto integrand = [&](double u) {
    return f(u) * std::exp(-u * u / (2.0 * var)) / (sd * std::sqrt(2.0 * M_PI));
  };
  return simpson(integrand, -12.0 * sd, 12.0 * sd, n);
}

/// Random dataset with intercept + slope design, y ~ marginal model at
/// (beta, a) plus optional shifts added afterwards by the caller.
inline dpfh::Dataset make_dataset(int m, const Eigen::VectorXd& beta, double a,
                                  const std::vector<double>& d_values,
                                  std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<dpfh::AreaObservation> areas;
  areas.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd x(beta.size());
    x[0] = 1.0;
    for (int j = 1; j < beta.size(); ++j) x[j] = unif(gen);
    const double d = d_values[static_cast<size_t>(i) % d_values.size()];
    const double y = beta.dot(x) + std::sqrt(a) * normal(gen) + std::sqrt(d) * normal(gen);
    areas.push_back(dpfh::AreaObservation{y, x, d});
  }
  return dpfh::Dataset(std::move(areas));
}

}  // namespace testsupport
