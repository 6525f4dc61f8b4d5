#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "dpfh/types.hpp"

namespace dpfh {

/// Controls for the fixed-point parameter iterations.
struct FitConfig {
  double tol = 1e-8;           ///< max-norm change threshold over (beta, A)
  int max_iter = 500;
  double a_floor = 1e-8;       ///< lower clamp for the variance update
  std::optional<ModelParams> init;  ///< default: classical ML start
};

struct FitResult {
  ModelParams params;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;          ///< objective value at the returned params
  Eigen::MatrixXd cov_beta;        ///< m^{-1} J_beta^{-1} K_beta J_beta^{-1}
  double var_a = 0.0;              ///< K_A / (m J_A^2)
  std::vector<double> weights;     ///< final per-area s_i (all 1 for ML)
  bool at_floor = false;           ///< variance clamped at a_floor on exit
};

/// Sandwich building blocks evaluated at fixed parameters.
struct AsymptoticBlocks {
  Eigen::MatrixXd j_beta;
  Eigen::MatrixXd k_beta;
  double j_a = 0.0;
  double k_a = 0.0;
};

/// Maximum likelihood fit, realized as the weight-free specialization of the
/// same fixed-point loop used by fit_dpd (alternating GLS and variance update).
FitResult fit_ml(const Dataset& data, const FitConfig& config = {});

/// Density-power-divergence fit by fixed-point iteration on the weighted GLS
/// and variance updates, started from the ML estimate unless overridden.
/// Requires alpha > 0; alpha = 0 callers use fit_ml.
FitResult fit_dpd(const Dataset& data, const Alpha& alpha, const FitConfig& config = {});

/// Dispatch on alpha: fit_ml at 0, fit_dpd otherwise.
FitResult fit(const Dataset& data, const Alpha& alpha, const FitConfig& config = {});

/// Estimating-function values at (params, alpha), in the conventional
/// display scaling: the beta component equals the gradient of
/// robust_likelihood, the A component equals twice its A-derivative.
std::pair<Eigen::VectorXd, double> estimating_equations(const Dataset& data,
                                                        const ModelParams& params,
                                                        const Alpha& alpha);

AsymptoticBlocks asymptotic_blocks(const Dataset& data, const ModelParams& params,
                                   const Alpha& alpha);

struct BootstrapBias {
  double b_a = 0.0;   ///< m * mean(A*_hat - A_hat) over converged replicates
  int used = 0;
  int failed = 0;
};

/// First-order bias of the variance estimate via parametric bootstrap:
/// regenerate y* at the fitted parameters and refit. Replicates that fail to
/// converge are excluded and counted; more than 10% failures is an error.
BootstrapBias bias_ba_bootstrap(const Dataset& data, const FitResult& fitted,
                                const Alpha& alpha, int b, std::uint64_t seed);

}  // namespace dpfh
