#include "dpfh/mse.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dpfh/model.hpp"
#include "dpfh/predictors.hpp"
#include "dpfh/rng.hpp"

namespace dpfh {

double g1_term(double a, double d) {
  const double b = a + d;
  if (!(b > 0.0)) {
    throw std::domain_error("g1_term: a + d must be > 0");
  }
  return a * d / b;
}

double g2_term(double a, double d, const Alpha& alpha) {
  const double b = a + d;
  if (!(b > 0.0)) {
    throw std::domain_error("g2_term: a + d must be > 0");
  }
  const double al = alpha.value();
  const double va = std::pow(v_factor(a, d), al);
  const double bracket = va * va * std::pow(1.0 + 2.0 * al, -1.5) -
                         2.0 * va * std::pow(1.0 + al, -1.5) + 1.0;
  return d * d / b * bracket;
}

double c_jk(int j, int k, double a, double d, const Alpha& alpha) {
  return moment_u2j_sk(j, k, a, d, alpha) - moment_u2j_sk(j, k + 1, a, d, alpha);
}

namespace {

struct QuadForms {
  double sandwich = 0.0;  ///< x' J_beta^{-1} K_beta J_beta^{-1} x
  double jinv = 0.0;      ///< x' J_beta^{-1} x
};

QuadForms quad_forms(const Eigen::VectorXd& x, const AsymptoticBlocks& blocks) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(blocks.j_beta);
  if (!lu.isInvertible()) {
    throw SingularDesignError("mse: J_beta block is singular");
  }
  const Eigen::VectorXd jx = lu.solve(x);
  return {jx.dot(blocks.k_beta * jx), x.dot(jx)};
}

MseComponents components_impl(const AreaObservation& obs, const ModelParams& params,
                              const Alpha& alpha, const AsymptoticBlocks& blocks,
                              const QuadForms& q, double b_a) {
  const double a = params.a;
  const double d = obs.d;
  const double b = a + d;
  const double al = alpha.value();
  const double va = std::pow(v_factor(a, d), al);
  const double v2a = va * va;
  const double d2 = d * d;

  MseComponents out;
  out.g1 = g1_term(a, d);
  out.g2 = g2_term(a, d, alpha);
  out.g3 = d2 * v2a * (3.0 * al * al + 2.0 * al + 1.0) *
           std::pow(1.0 + 2.0 * al, -2.5) / (b * b) * q.sandwich;
  const double ratio_a = blocks.k_a / (blocks.j_a * blocks.j_a);
  out.g4 = d2 * v2a *
           (((al + 2.0) * al + 4.5) * al * al + 2.0 * al + 1.0) *
           std::pow(1.0 + 2.0 * al, -3.5) / (b * b * b) * ratio_a;

  const double c11 = c_jk(1, 1, a, d, alpha);
  const double c21 = c_jk(2, 1, a, d, alpha);
  const double c31 = c_jk(3, 1, a, d, alpha);
  const double c12 = c_jk(1, 2, a, d, alpha);
  const double c22 = c_jk(2, 2, a, d, alpha);
  const double c32 = c_jk(3, 2, a, d, alpha);
  const double c_al = al * va * std::pow(1.0 + al, -1.5) / b;
  const double b4 = b * b * b * b;

  const double t1 = al * d2 / (2.0 * b4) * (3.0 * b * c11 - al * c21) * q.sandwich;
  const double t2 = -d2 * ratio_a / (8.0 * b4 * b * b) *
                    (al * al * c31 - 2.0 * al * (al + 4.0) * b * c21 +
                     (al + 2.0) * (al + 4.0) * b * b * c11);
  const double t3 = d2 / b4 * (b * c12 - al * c22) * q.jinv;
  const double t4 = -d2 / (2.0 * b4 * blocks.j_a) *
                    ((al * c32 - (2.0 + al) * b * c22) / (b * b) -
                     (al * c22 - (2.0 + al) * b * c12) / b +
                     c_al * (al * c21 - (2.0 + al) * b * c11));
  const double t5 = d2 * b_a / (2.0 * b4) * ((2.0 + al) * b * c11 - al * c21);
  out.g5 = t1 + t2 + t3 + t4 + t5;
  return out;
}

}  // namespace

MseComponents mse_components(const Dataset& data, int i, const ModelParams& params,
                             const Alpha& alpha, const AsymptoticBlocks& blocks,
                             double b_a) {
  const auto& obs = data[i];
  return components_impl(obs, params, alpha, blocks, quad_forms(obs.x, blocks), b_a);
}

std::vector<double> mse_naive(const Dataset& data, const ModelParams& params,
                              const Alpha& alpha) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(data.size()));
  for (const auto& obs : data.areas()) {
    out.push_back(g1_term(params.a, obs.d) + g2_term(params.a, obs.d, alpha));
  }
  return out;
}

std::vector<double> mse_plugin(const Dataset& data, const ModelParams& params,
                               const Alpha& alpha) {
  const int m = data.size();
  const AsymptoticBlocks blocks = asymptotic_blocks(data, params, alpha);
  std::vector<double> out;
  out.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const MseComponents c = mse_components(data, i, params, alpha, blocks, 0.0);
    out.push_back(c.g1 + c.g2 + (c.g3 + c.g4 + 2.0 * c.g5) / m);
  }
  return out;
}

namespace {

/// Shared parametric-bootstrap pass: resample y* at the fitted parameters,
/// refit, and accumulate the first-order terms at A*, the variance bias, and
/// (optionally) the cross-term products.
struct BootAccum {
  std::vector<double> mean_first;  ///< mean over replicates of g1 + g2 at A*
  double b_a = 0.0;
  std::vector<double> cross_mean;  ///< mean of m (th* - tw)(tw - tc)
  std::vector<double> cross_se;
  int used = 0;
  int failed = 0;
};

BootAccum bootstrap_pass(const Dataset& data, const FitResult& fitted, const Alpha& alpha,
                         int b, std::uint64_t seed, bool want_cross,
                         const char* caller) {
  if (b <= 0) {
    throw std::invalid_argument(std::string(caller) + ": b must be > 0");
  }
  const int m = data.size();
  const ModelParams& hat = fitted.params;
  const double sd_v = std::sqrt(hat.a);
  std::normal_distribution<double> normal;

  std::vector<double> sum_first(static_cast<size_t>(m), 0.0);
  std::vector<double> sum_cross(static_cast<size_t>(m), 0.0);
  std::vector<double> sum_cross2(static_cast<size_t>(m), 0.0);
  double acc_a = 0.0;
  int used = 0;
  int failed = 0;
  for (int r = 0; r < b; ++r) {
    std::mt19937_64 gen = make_stream(seed, static_cast<std::uint64_t>(r), 0x6d7365ULL);
    std::vector<AreaObservation> areas;
    areas.reserve(static_cast<size_t>(m));
    for (const auto& obs : data.areas()) {
      const double mean = hat.beta.dot(obs.x);
      const double y = mean + sd_v * normal(gen) + std::sqrt(obs.d) * normal(gen);
      areas.push_back(AreaObservation{y, obs.x, obs.d});
    }
    Dataset boot(std::move(areas));
    try {
      FitConfig cfg;
      cfg.init = hat;
      const FitResult refit = fit(boot, alpha, cfg);
      if (!refit.converged) {
        ++failed;
        continue;
      }
      const double a_star = refit.params.a;
      for (int i = 0; i < m; ++i) {
        sum_first[static_cast<size_t>(i)] +=
            g1_term(a_star, data[i].d) + g2_term(a_star, data[i].d, alpha);
      }
      if (want_cross) {
        for (int i = 0; i < m; ++i) {
          const AreaObservation& star = boot[i];
          const double weighted_star = robust_bayes_estimate(star, refit.params, alpha);
          const double weighted_hat = robust_bayes_estimate(star, hat, alpha);
          const double classic_hat = bayes_estimate(star, hat);
          const double prod =
              m * (weighted_star - weighted_hat) * (weighted_hat - classic_hat);
          sum_cross[static_cast<size_t>(i)] += prod;
          sum_cross2[static_cast<size_t>(i)] += prod * prod;
        }
      }
      acc_a += a_star - hat.a;
      ++used;
    } catch (const std::exception&) {
      ++failed;
    }
  }
  if (failed * 10 > b) {
    throw ConvergenceError(std::string(caller) + ": more than 10% of replicates failed");
  }
  if (used == 0) {
    throw ConvergenceError(std::string(caller) + ": no converged replicates");
  }

  BootAccum out;
  out.used = used;
  out.failed = failed;
  out.b_a = m * acc_a / used;
  out.mean_first.resize(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    out.mean_first[static_cast<size_t>(i)] = sum_first[static_cast<size_t>(i)] / used;
  }
  if (want_cross) {
    out.cross_mean.resize(static_cast<size_t>(m));
    out.cross_se.resize(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      const double mean = sum_cross[static_cast<size_t>(i)] / used;
      const double var =
          std::max(0.0, sum_cross2[static_cast<size_t>(i)] / used - mean * mean);
      out.cross_mean[static_cast<size_t>(i)] = mean;
      out.cross_se[static_cast<size_t>(i)] = std::sqrt(var / used);
    }
  }
  return out;
}

}  // namespace

G5Bootstrap g5_bootstrap(const Dataset& data, const FitResult& fitted, const Alpha& alpha,
                         int b, std::uint64_t seed) {
  const BootAccum acc = bootstrap_pass(data, fitted, alpha, b, seed, true, "g5_bootstrap");
  return G5Bootstrap{acc.cross_mean, acc.cross_se, acc.used, acc.failed};
}

BootstrapMse mse_bootstrap(const Dataset& data, const FitResult& fitted,
                           const Alpha& alpha, int b, std::uint64_t seed,
                           bool direct_g5) {
  const int m = data.size();
  const BootAccum acc =
      bootstrap_pass(data, fitted, alpha, b, seed, direct_g5, "mse_bootstrap");

  BootstrapMse out;
  out.used = acc.used;
  out.failed = acc.failed;
  out.b_a = acc.b_a;
  out.mse.resize(static_cast<size_t>(m));
  out.clamped.assign(static_cast<size_t>(m), false);
  const ModelParams& hat = fitted.params;
  const AsymptoticBlocks blocks = asymptotic_blocks(data, hat, alpha);
  for (int i = 0; i < m; ++i) {
    const MseComponents c = mse_components(data, i, hat, alpha, blocks, acc.b_a);
    const double first = c.g1 + c.g2;
    const double g5 = direct_g5 ? acc.cross_mean[static_cast<size_t>(i)] : c.g5;
    double est = 2.0 * first - acc.mean_first[static_cast<size_t>(i)] +
                 (c.g3 + c.g4 + 2.0 * g5) / m;
    const double floor = 1e-3 * first;
    if (est < floor) {
      est = floor;
      out.clamped[static_cast<size_t>(i)] = true;
    }
    out.mse[static_cast<size_t>(i)] = est;
  }
  return out;
}

double excess_mse_ratio(const Dataset& data, double a, const Alpha& alpha) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& obs : data.areas()) {
    num += g2_term(a, obs.d, alpha);
    den += g1_term(a, obs.d);
  }
  if (!(den > 0.0)) {
    throw std::domain_error("excess_mse_ratio: sum of g1 terms is not positive");
  }
  return num / den;
}

AlphaSelection select_alpha(const Dataset& data, double c_percent,
                            const FitConfig& config) {
  if (!(c_percent > 0.0)) {
    throw std::invalid_argument("select_alpha: c_percent must be > 0");
  }
  const double target = c_percent / 100.0;
  const double a_ml = fit_ml(data, config).params.a;
  constexpr double kCap = 1.0 - 1e-6;

  AlphaSelection out;
  out.a_ml = a_ml;
  const double at_cap = excess_mse_ratio(data, a_ml, Alpha(kCap));
  if (at_cap <= target) {
    out.alpha = kCap;
    out.excess = at_cap;
    out.capped = true;
    return out;
  }
  double lo = 0.0;
  double hi = kCap;
  int it = 0;
  // The ratio is continuous and increasing in alpha with value 0 at 0.
  while (hi - lo > 1e-12 && it < 200) {
    const double mid = 0.5 * (lo + hi);
    if (excess_mse_ratio(data, a_ml, Alpha(mid)) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++it;
  }
  out.alpha = 0.5 * (lo + hi);
  out.excess = excess_mse_ratio(data, a_ml, Alpha(out.alpha));
  out.iterations = it;
  return out;
}

}  // namespace dpfh
