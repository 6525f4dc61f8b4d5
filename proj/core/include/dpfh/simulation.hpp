#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>

#include "dpfh/predictors.hpp"
#include "dpfh/types.hpp"

namespace dpfh {

/// Random-effect law for the data generator. I is clean Gaussian; the rest
/// contaminate a N(0,1) core with a heavy or skewed component.
enum class ScenarioTag { I, II, III, IV, V };

ScenarioTag scenario_tag_from_string(const std::string& s);
std::string to_string(ScenarioTag tag);

/// Data-generating configuration: m areas in five equal groups with the
/// group-wise sampling variances d_pattern, mean beta0 + beta1 x with
/// x ~ U(0,1) drawn once from covariate_seed, and random-effect scale a.
struct Scenario {
  ScenarioTag tag = ScenarioTag::I;
  int m = 30;
  double beta0 = 0.0;
  double beta1 = 2.0;
  double a = 0.5;
  std::array<double, 5> d_pattern{0.2, 0.4, 0.6, 0.8, 1.0};
  std::uint64_t covariate_seed = 1;

  void validate() const;  ///< throws invalid_argument unless m > 0, m % 5 == 0, a > 0, d > 0
};

/// Covariate draw shared by every replicate of a scenario.
std::vector<double> scenario_covariates(const Scenario& s);

/// One draw of the standardized random effect for the given tag.
double draw_random_effect(ScenarioTag tag, std::mt19937_64& gen);

/// Generate replicate `replicate` of the scenario under `seed`. Covariates
/// come from covariate_seed only; all noise comes from the per-replicate
/// stream, so replicates are independent and order-insensitive.
std::pair<Dataset, std::vector<double>> generate_scenario(const Scenario& s, int replicate,
                                                          std::uint64_t seed);

/// One point-predictor arm of a prediction study. When c_percent > 0 the
/// tuning constant alpha is re-selected on every replicate from that
/// replicate's data; otherwise fixed_alpha is used (DPEB only).
struct EstimatorSpec {
  std::string name;
  PredictorKind::Tag tag = PredictorKind::Tag::EB;
  double c_percent = 0.0;
  double fixed_alpha = 0.0;
  double huber_k = 1.345;
};

/// The comparison set reported in the study tables.
std::vector<EstimatorSpec> standard_estimators();

struct SimRow {
  std::string scenario;
  int group = 0;  ///< 1-based, ordered by d_pattern
  std::string estimator;
  std::string metric;
  double value = 0.0;
};

struct SimReport {
  std::vector<SimRow> rows;
  int replicates = 0;
  int failed = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> notes;

  std::string to_csv() const;    ///< header scenario,group,estimator,metric,value; full precision
  std::string to_table() const;  ///< aligned text, 3-decimal rounding
};

struct StudyConfig {
  int threads = 0;         ///< 0 = hardware concurrency
  int bootstrap_b = 200;   ///< resamples per bias-corrected MSE evaluation
  double c_percent = 5.0;  ///< alpha-selection target for the MSE study
  std::string cache_dir;   ///< empty = no true-MSE caching
};

/// Group-averaged prediction MSE of each estimator over r replicates.
/// Replicates where any arm's fit fails are dropped and counted; more than
/// 5% failures raises ConvergenceError.
SimReport run_prediction_study(const Scenario& s, const std::vector<EstimatorSpec>& estimators,
                               int r, std::uint64_t seed, const StudyConfig& config = {});

/// Relative bias (percent) and coefficient of variation of the naive,
/// plug-in, and bias-corrected MSE estimators against a Monte-Carlo truth
/// computed from truth_r independent replicates. The predictor under test is
/// the weighted shrinkage rule with per-replicate alpha selection at
/// config.c_percent.
SimReport run_mse_estimator_study(const Scenario& s, int outer_s, int truth_r,
                                  std::uint64_t seed, const StudyConfig& config = {});

}  // namespace dpfh
