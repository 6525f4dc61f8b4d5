#pragma once

#include "dpfh/types.hpp"

namespace dpfh {

/// Marginal-density normalizing constant 1/sqrt(2 pi (a + d)).
double v_factor(double a, double d);

/// (2j-1)!! with (-1)!! = 1, so j = 0 works uniformly.
double double_factorial_odd(int j);

/// Per-area robustness weight V^alpha * exp(-alpha (y - x'beta)^2 / (2(A + D))).
///
/// Computed in log space and exponentiated once; tail underflow to 0 is
/// the intended behavior and never raises. Lies in (0, V^alpha], equal to
/// the upper bound iff the residual is zero, and equals 1 at alpha = 0.
double s_weight(const AreaObservation& obs, const ModelParams& params, const Alpha& alpha);

/// Density-power objective sum_i { s_i/alpha - V_i^alpha/(1+alpha)^{3/2} }.
///
/// Rejects alpha = 0 (classical callers use log_marginal_likelihood);
/// subtracting m(1/alpha - 1) recovers the classical log-likelihood in
/// the alpha -> 0 limit.
double robust_likelihood(const Dataset& data, const ModelParams& params, const Alpha& alpha);

/// Classical marginal log-likelihood of y_i ~ N(x_i'beta, A + D_i).
double log_marginal_likelihood(const Dataset& data, const ModelParams& params);

/// Closed-form moment E[(y - x'beta)^{2j} s^k] under the marginal model:
/// V^{k alpha} (k alpha + 1)^{-j-1/2} (2j-1)!! (A + D)^j.
/// The odd-power counterpart vanishes identically.
double moment_u2j_sk(int j, int k, double a, double d, const Alpha& alpha);

}  // namespace dpfh
