#pragma once

#include <cstdint>

#include "dpfh/fitting.hpp"
#include "dpfh/types.hpp"

namespace dpfh {

/// Leading shrinkage risk A D / (A + D); free of alpha.
double g1_term(double a, double d);

/// Risk inflation of the weighted shrinkage rule over the classical one:
/// (D^2/B) { V^{2a}/(2a+1)^{3/2} - 2 V^a/(a+1)^{3/2} + 1 }, zero at alpha = 0.
double g2_term(double a, double d, const Alpha& alpha);

/// Moment difference C_jk = E[u^{2j} s^k] - E[u^{2j} s^{k+1}] under the
/// marginal N(0, B) law of the residual; closed form via moment_u2j_sk.
double c_jk(int j, int k, double a, double d, const Alpha& alpha);

/// Per-area second-order risk decomposition. Each entry is O(1); the plug-in
/// estimator adds (g3 + g4 + 2 g5)/m to g1 + g2.
struct MseComponents {
  double g1 = 0.0;
  double g2 = 0.0;
  double g3 = 0.0;  ///< coefficient-estimation contribution
  double g4 = 0.0;  ///< variance-estimation contribution
  double g5 = 0.0;  ///< cross term, includes the b_A bias piece
};

/// All five components for area i at fixed parameters. `b_a` enters only the
/// cross term; pass 0 for the plug-in convention.
MseComponents mse_components(const Dataset& data, int i, const ModelParams& params,
                             const Alpha& alpha, const AsymptoticBlocks& blocks,
                             double b_a);

/// First-order estimate g1 + g2 per area.
std::vector<double> mse_naive(const Dataset& data, const ModelParams& params,
                              const Alpha& alpha);

/// Second-order plug-in estimate g1 + g2 + (g3 + g4 + 2 g5)/m per area,
/// with the bias term b_A set to zero.
std::vector<double> mse_plugin(const Dataset& data, const ModelParams& params,
                               const Alpha& alpha);

struct BootstrapMse {
  std::vector<double> mse;      ///< per-area bias-corrected estimate
  std::vector<bool> clamped;    ///< entries floored at 1e-3 x (g1 + g2)
  double b_a = 0.0;             ///< bootstrap bias estimate of the variance
  int used = 0;
  int failed = 0;
};

/// Bootstrap evaluation of the cross term: per area, mean and standard error
/// of m (theta_hat(y*, phi*) - theta_tilde_w(y*, phi_hat))
///      (theta_tilde_w(y*, phi_hat) - theta_tilde(y*, phi_hat)),
/// where theta_tilde_w is the weighted shrinkage rule and theta_tilde the
/// classical one. Converges to the closed-form cross component as b grows.
struct G5Bootstrap {
  std::vector<double> g5;
  std::vector<double> se;
  int used = 0;
  int failed = 0;
};

G5Bootstrap g5_bootstrap(const Dataset& data, const FitResult& fitted, const Alpha& alpha,
                         int b, std::uint64_t seed);

/// Bias-corrected estimate: per area,
///   2 {g1+g2}(A_hat) - mean_b {g1+g2}(A*_b) + {g3 + g4 + 2 g5}(A_hat)/m,
/// where A*_b are refits on parametric resamples y* = x'beta_hat + v* + e*.
/// The same resamples supply b_A for the cross term. Estimates below
/// 1e-3 x (g1+g2) are floored there and flagged. Non-converged refits are
/// dropped; more than 10% failures raises ConvergenceError. With direct_g5
/// the closed-form cross term is replaced by its bootstrap evaluation from
/// the same resamples.
BootstrapMse mse_bootstrap(const Dataset& data, const FitResult& fitted,
                           const Alpha& alpha, int b, std::uint64_t seed,
                           bool direct_g5 = false);

/// Efficiency-loss ratio sum g2 / sum g1 across areas, evaluated at a fixed
/// variance (conventionally the ML estimate). Zero at alpha = 0 and
/// increasing in alpha.
double excess_mse_ratio(const Dataset& data, double a, const Alpha& alpha);

struct AlphaSelection {
  double alpha = 0.0;
  double excess = 0.0;   ///< achieved ratio sum g2 / sum g1
  double a_ml = 0.0;     ///< ML variance the ratio was evaluated at
  int iterations = 0;
  bool capped = false;   ///< target unattainable below the alpha upper limit
};

/// Choose alpha so the efficiency loss equals c_percent/100, by bisection on
/// the monotone map alpha -> excess_mse_ratio at the ML variance estimate.
/// If even the largest admissible alpha stays below the target, that cap is
/// returned with `capped` set.
AlphaSelection select_alpha(const Dataset& data, double c_percent,
                            const FitConfig& config = {});

}  // namespace dpfh
