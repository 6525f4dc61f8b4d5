#include "dpfh/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dpfh/model.hpp"
#include "dpfh/predictors.hpp"
#include "dpfh/rng.hpp"

namespace dpfh {

namespace {

/// One fixed-point pass shared by ML (unit weights) and the weighted fit.
/// Both updates use the weights and variance from the previous iterate:
///   beta <- (sum s x x'/B)^{-1} sum s x y / B
///   A    <- [sum ((y - x'beta)^2 s - D r)/B^2] / [sum r/B^2]
/// with r = s - alpha V^alpha/(1+alpha)^{3/2} (r = s = 1 at alpha = 0).
FitResult fixed_point(const Dataset& data, const Alpha& alpha, const FitConfig& config) {
  const int m = data.size();
  const int p = data.dim();
  const double al = alpha.value();
  const double max_d = [&] {
    double md = 0.0;
    for (const auto& obs : data.areas()) md = std::max(md, obs.d);
    return md;
  }();
  const double a_ceiling = 1e6 * max_d;

  ModelParams cur = [&] {
    if (config.init) {
      return *config.init;
    }
    // OLS coefficients plus a clamped moment estimate of the variance.
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
    for (const auto& obs : data.areas()) {
      xtx.noalias() += obs.x * obs.x.transpose();
      xty.noalias() += obs.y * obs.x;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
    if (!lu.isInvertible()) {
      throw SingularDesignError("fit: design matrix is singular");
    }
    Eigen::VectorXd beta0 = lu.solve(xty);
    double acc = 0.0;
    for (const auto& obs : data.areas()) {
      const double r = obs.y - beta0.dot(obs.x);
      acc += r * r - obs.d;
    }
    return ModelParams{beta0, std::max(config.a_floor, acc / m)};
  }();

  FitResult out;
  std::vector<double> s(static_cast<size_t>(m), 1.0);
  int it = 0;
  bool converged = false;
  for (; it < config.max_iter; ++it) {
    const double penalty = al * std::pow(1.0 + al, -1.5);
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < m; ++i) {
      const auto& obs = data[i];
      const double b = cur.a + obs.d;
      const double si = alpha.is_zero() ? 1.0 : s_weight(obs, cur, alpha);
      s[static_cast<size_t>(i)] = si;
      const double ri =
          alpha.is_zero() ? 1.0 : si - penalty * std::pow(v_factor(cur.a, obs.d), al);
      const double w = si / b;
      normal.noalias() += w * obs.x * obs.x.transpose();
      rhs.noalias() += w * obs.y * obs.x;
      const double resid = obs.y - cur.beta.dot(obs.x);
      num += (resid * resid * si - obs.d * ri) / (b * b);
      den += ri / (b * b);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    if (!lu.isInvertible()) {
      throw SingularDesignError("fit: weighted normal matrix is singular");
    }
    const Eigen::VectorXd beta_next = lu.solve(rhs);
    const double a_raw = den != 0.0 ? num / den : a_ceiling + 1.0;
    const double a_next = std::max(config.a_floor, a_raw);

    const double step = std::max((beta_next - cur.beta).cwiseAbs().maxCoeff(),
                                 std::abs(a_next - cur.a));
    cur = ModelParams{beta_next, a_next};
    if (a_next > a_ceiling) {
      // Diverging variance iterate: report the last state unconverged.
      ++it;
      break;
    }
    if (step < config.tol) {
      converged = true;
      ++it;
      break;
    }
  }

  out.params = cur;
  out.converged = converged;
  out.iterations = it;
  out.at_floor = cur.a <= config.a_floor;
  out.objective = alpha.is_zero() ? log_marginal_likelihood(data, cur)
                                  : robust_likelihood(data, cur, alpha);
  for (int i = 0; i < m; ++i) {
    s[static_cast<size_t>(i)] = alpha.is_zero() ? 1.0 : s_weight(data[i], cur, alpha);
  }
  out.weights = std::move(s);

  const AsymptoticBlocks blk = asymptotic_blocks(data, cur, alpha);
  Eigen::FullPivLU<Eigen::MatrixXd> jlu(blk.j_beta);
  if (jlu.isInvertible() && blk.j_a > 0.0) {
    const Eigen::MatrixXd jinv = jlu.inverse();
    out.cov_beta = (jinv * blk.k_beta * jinv) / m;
    out.var_a = blk.k_a / (m * blk.j_a * blk.j_a);
  } else {
    out.cov_beta = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
    out.var_a = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace

FitResult fit_ml(const Dataset& data, const FitConfig& config) {
  return fixed_point(data, Alpha(0.0), config);
}

FitResult fit_dpd(const Dataset& data, const Alpha& alpha, const FitConfig& config) {
  if (alpha.is_zero()) {
    throw std::domain_error("fit_dpd: alpha must be > 0; use fit_ml");
  }
  if (config.init) {
    return fixed_point(data, alpha, config);
  }
  FitConfig warm = config;
  warm.init = fit_ml(data, config).params;
  return fixed_point(data, alpha, warm);
}

FitResult fit(const Dataset& data, const Alpha& alpha, const FitConfig& config) {
  return alpha.is_zero() ? fit_ml(data, config) : fit_dpd(data, alpha, config);
}

std::pair<Eigen::VectorXd, double> estimating_equations(const Dataset& data,
                                                        const ModelParams& params,
                                                        const Alpha& alpha) {
  const double al = alpha.value();
  const double penalty = al * std::pow(1.0 + al, -1.5);
  Eigen::VectorXd ee_beta = Eigen::VectorXd::Zero(data.dim());
  double ee_a = 0.0;
  for (const auto& obs : data.areas()) {
    const double b = params.a + obs.d;
    const double u = obs.y - params.beta.dot(obs.x);
    const double s = alpha.is_zero() ? 1.0 : s_weight(obs, params, alpha);
    ee_beta.noalias() += (s * u / b) * obs.x;
    ee_a += u * u * s / (b * b) - s / b +
            penalty * std::pow(v_factor(params.a, obs.d), al) / b;
  }
  return {ee_beta, ee_a};
}

AsymptoticBlocks asymptotic_blocks(const Dataset& data, const ModelParams& params,
                                   const Alpha& alpha) {
  const int m = data.size();
  const int p = data.dim();
  const double al = alpha.value();
  const double jb_scale = std::pow(1.0 + al, -1.5);
  const double kb_scale = std::pow(1.0 + 2.0 * al, -1.5);
  const double ja_scale = (al * al + 2.0) * std::pow(1.0 + al, -2.5) / 2.0;
  const double ka_scale =
      2.0 * (2.0 * al * al + 1.0) * std::pow(1.0 + 2.0 * al, -2.5) -
      al * al * std::pow(1.0 + al, -3.0);

  AsymptoticBlocks blk;
  blk.j_beta = Eigen::MatrixXd::Zero(p, p);
  blk.k_beta = Eigen::MatrixXd::Zero(p, p);
  for (const auto& obs : data.areas()) {
    const double b = params.a + obs.d;
    const double va = std::pow(v_factor(params.a, obs.d), al);
    const Eigen::MatrixXd xx = obs.x * obs.x.transpose();
    blk.j_beta.noalias() += (jb_scale * va / b) * xx;
    blk.k_beta.noalias() += (kb_scale * va * va / b) * xx;
    blk.j_a += ja_scale * va / (b * b);
    blk.k_a += ka_scale * va * va / (b * b);
  }
  blk.j_beta /= m;
  blk.k_beta /= m;
  blk.j_a /= m;
  blk.k_a /= m;
  return blk;
}

BootstrapBias bias_ba_bootstrap(const Dataset& data, const FitResult& fitted,
                                const Alpha& alpha, int b, std::uint64_t seed) {
  if (b <= 0) {
    throw std::invalid_argument("bias_ba_bootstrap: b must be > 0");
  }
  const int m = data.size();
  const double a_hat = fitted.params.a;
  const double sd_v = std::sqrt(a_hat);
  std::normal_distribution<double> normal;

  double acc = 0.0;
  int used = 0;
  int failed = 0;
  for (int r = 0; r < b; ++r) {
    std::mt19937_64 gen = make_stream(seed, static_cast<std::uint64_t>(r), 0x62735f62ULL);
    std::vector<AreaObservation> areas;
    areas.reserve(static_cast<size_t>(m));
    for (const auto& obs : data.areas()) {
      const double mean = fitted.params.beta.dot(obs.x);
      const double y = mean + sd_v * normal(gen) + std::sqrt(obs.d) * normal(gen);
      areas.push_back(AreaObservation{y, obs.x, obs.d});
    }
    Dataset boot(std::move(areas));
    try {
      FitConfig cfg;
      cfg.init = fitted.params;
      const FitResult refit = fit(boot, alpha, cfg);
      if (!refit.converged) {
        ++failed;
        continue;
      }
      acc += refit.params.a - a_hat;
      ++used;
    } catch (const std::exception&) {
      ++failed;
    }
  }
  if (failed * 10 > b) {
    throw ConvergenceError("bias_ba_bootstrap: more than 10% of replicates failed");
  }
  BootstrapBias out;
  out.used = used;
  out.failed = failed;
  out.b_a = used > 0 ? m * acc / used : 0.0;
  return out;
}

}  // namespace dpfh
