#include "dpfh/model.hpp"

#include <cmath>

namespace dpfh {

double v_factor(double a, double d) {
  const double b = a + d;
  if (!(b > 0.0)) {
    throw std::domain_error("v_factor: a + d must be > 0");
  }
  return 1.0 / std::sqrt(2.0 * M_PI * b);
}

double double_factorial_odd(int j) {
  double out = 1.0;
  for (int t = 2 * j - 1; t > 1; t -= 2) {
    out *= t;
  }
  return out;
}

double s_weight(const AreaObservation& obs, const ModelParams& params, const Alpha& alpha) {
  const double b = params.a + obs.d;
  const double resid = obs.y - params.beta.dot(obs.x);
  const double log_v = -0.5 * std::log(2.0 * M_PI * b);
  return std::exp(alpha.value() * (log_v - resid * resid / (2.0 * b)));
}

double robust_likelihood(const Dataset& data, const ModelParams& params, const Alpha& alpha) {
  if (alpha.is_zero()) {
    throw std::domain_error("robust_likelihood: alpha = 0; use log_marginal_likelihood");
  }
  const double al = alpha.value();
  const double penalty_scale = std::pow(1.0 + al, 1.5);
  double total = 0.0;
  for (const auto& obs : data.areas()) {
    const double s = s_weight(obs, params, alpha);
    const double v_pow = std::pow(v_factor(params.a, obs.d), al);
    total += s / al - v_pow / penalty_scale;
  }
  return total;
}

double log_marginal_likelihood(const Dataset& data, const ModelParams& params) {
  const int m = data.size();
  double total = -0.5 * m * std::log(2.0 * M_PI);
  for (const auto& obs : data.areas()) {
    const double b = params.a + obs.d;
    if (!(b > 0.0)) {
      throw std::domain_error("log_marginal_likelihood: A + D_i must be > 0");
    }
    const double resid = obs.y - params.beta.dot(obs.x);
    total += -0.5 * std::log(b) - 0.5 * resid * resid / b;
  }
  return total;
}

double moment_u2j_sk(int j, int k, double a, double d, const Alpha& alpha) {
  const double b = a + d;
  if (!(b > 0.0)) {
    throw std::domain_error("moment_u2j_sk: a + d must be > 0");
  }
  if (j < 0 || k < 0) {
    throw std::domain_error("moment_u2j_sk: j, k must be >= 0");
  }
  const double ka = k * alpha.value();
  const double v = v_factor(a, d);
  return std::pow(v, ka) * std::pow(ka + 1.0, -j - 0.5) * double_factorial_odd(j) *
         std::pow(b, j);
}

}  // namespace dpfh
