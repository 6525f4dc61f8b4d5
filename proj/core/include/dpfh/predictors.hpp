#pragma once

#include <optional>

#include "dpfh/types.hpp"

namespace dpfh {

/// Point estimate plus the effective shrinkage multiplier applied to the
/// residual y - center. `fallback` marks areas where a degenerate case
/// forced a fallback rule (currently only the saturated-psi case of the
/// equation-solving estimator).
struct Prediction {
  double theta_hat = 0.0;
  double shrink_weight = 0.0;
  bool fallback = false;
};

/// Which point predictor to evaluate.
struct PredictorKind {
  enum class Tag { EB, DPEB, GEB, SREB };
  Tag tag = Tag::EB;
  double alpha = 0.0;     ///< DPEB only
  double huber_k = 1.345; ///< GEB / SREB only
};

/// Classical shrinkage estimator y - (D/(A+D))(y - x'beta).
double bayes_estimate(const AreaObservation& obs, const ModelParams& params);

/// Weighted shrinkage estimator y - (D/(A+D))(y - x'beta) s(y; phi).
/// Coincides with bayes_estimate at alpha = 0 and returns to the direct
/// estimate as |y - x'beta| grows (tail robustness).
double robust_bayes_estimate(const AreaObservation& obs, const ModelParams& params,
                             const Alpha& alpha);

/// Huber influence function u min(1, k/|u|).
double huber_psi(double u, double k);

/// GLS coefficient solve at a fixed variance: beta(A) and the inverse of
/// the weighted normal matrix sum x x'/(A + D).
struct GlsSolve {
  Eigen::VectorXd beta;
  Eigen::MatrixXd normal_inverse;
};

GlsSolve gls_fit(const Dataset& data, double a);

/// Huber-damped shrinkage toward the GLS mean, with leverage-adjusted
/// residual variance v_i(A) = A + D_i - x_i' (sum x x'/(A+D))^{-1} x_i.
double geb_estimate(const Dataset& data, int i, double a, double k);
double geb_estimate(const Dataset& data, int i, double a, double k, const GlsSolve& gls);

/// Root of (1/sqrt(D)) psi_k((y - t)/sqrt(D)) - (1/sqrt(A)) psi_k((t - x'beta)/sqrt(A)) = 0
/// by bisection over [min(y, x'beta) - delta, max(y, x'beta) + delta] with
/// delta = k max(sqrt(A), sqrt(D)). The left side is nonincreasing in t, so a
/// sign change brackets the root. When both psi terms saturate with equal sign
/// no bracket exists; the classical Bayes estimate clamped into the bracket is
/// returned and flagged via `fallback` when a Prediction is requested.
double sreb_estimate(const AreaObservation& obs, const ModelParams& params, double k);

/// As above but reporting the fallback flag.
Prediction sreb_predict(const AreaObservation& obs, const ModelParams& params, double k);

/// Evaluate one predictor across all areas. GEB factorizes the GLS solve once.
/// `params.a` supplies the variance for every kind; GEB recomputes beta by GLS.
std::vector<Prediction> predict_all(const Dataset& data, const ModelParams& params,
                                    const PredictorKind& kind);

}  // namespace dpfh
