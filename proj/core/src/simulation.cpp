#include "dpfh/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "dpfh/fitting.hpp"
#include "dpfh/mse.hpp"
#include "dpfh/rng.hpp"

namespace dpfh {

namespace {

constexpr std::uint64_t kSubGenerate = 0x67656eULL;   // data-generation substream
constexpr std::uint64_t kTagTruth = 0x74727574ULL;    // truth-phase seed salt
constexpr std::uint64_t kTagOuter = 0x6f757465ULL;    // outer-phase seed salt
constexpr std::uint64_t kTagBoot = 0x62747370ULL;     // per-replicate bootstrap salt

/// Run fn(rep) for rep in [0, r) on `threads` workers. Each call touches only
/// its own slot, so scheduling cannot affect results.
void parallel_replicates(int r, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, r);
  if (threads <= 1) {
    for (int i = 0; i < r; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mu;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= r) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Bisection for the alpha whose efficiency-loss ratio at a fixed variance
/// hits target = c/100; capped below 1.
double select_alpha_at(const Dataset& data, double a_ml, double c_percent) {
  const double target = c_percent / 100.0;
  constexpr double kCap = 1.0 - 1e-6;
  if (excess_mse_ratio(data, a_ml, Alpha(kCap)) <= target) {
    return kCap;
  }
  double lo = 0.0;
  double hi = kCap;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (excess_mse_ratio(data, a_ml, Alpha(mid)) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> group_average(const std::vector<double>& per_area) {
  const int m = static_cast<int>(per_area.size());
  const int per_group = m / 5;
  std::vector<double> out(5, 0.0);
  for (int i = 0; i < m; ++i) {
    out[static_cast<size_t>(i / per_group)] += per_area[static_cast<size_t>(i)];
  }
  for (double& v : out) v /= per_group;
  return out;
}

std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) { return mix64(h ^ v); }

std::uint64_t hash_double(std::uint64_t h, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof(bits));
  return hash_mix(h, bits);
}

std::uint64_t scenario_hash(const Scenario& s) {
  std::uint64_t h = 0x5cea11abULL;
  h = hash_mix(h, static_cast<std::uint64_t>(s.tag));
  h = hash_mix(h, static_cast<std::uint64_t>(s.m));
  h = hash_double(h, s.beta0);
  h = hash_double(h, s.beta1);
  h = hash_double(h, s.a);
  for (double d : s.d_pattern) h = hash_double(h, d);
  h = hash_mix(h, s.covariate_seed);
  return h;
}

}  // namespace

ScenarioTag scenario_tag_from_string(const std::string& s) {
  if (s == "I" || s == "1") return ScenarioTag::I;
  if (s == "II" || s == "2") return ScenarioTag::II;
  if (s == "III" || s == "3") return ScenarioTag::III;
  if (s == "IV" || s == "4") return ScenarioTag::IV;
  if (s == "V" || s == "5") return ScenarioTag::V;
  throw std::invalid_argument("unknown scenario tag: " + s);
}

std::string to_string(ScenarioTag tag) {
  switch (tag) {
    case ScenarioTag::I: return "I";
    case ScenarioTag::II: return "II";
    case ScenarioTag::III: return "III";
    case ScenarioTag::IV: return "IV";
    case ScenarioTag::V: return "V";
  }
  throw std::invalid_argument("invalid scenario tag");
}

void Scenario::validate() const {
  if (m <= 0 || m % 5 != 0) {
    throw std::invalid_argument("Scenario: m must be a positive multiple of 5");
  }
  if (!(a > 0.0)) {
    throw std::invalid_argument("Scenario: a must be > 0");
  }
  for (double d : d_pattern) {
    if (!(d > 0.0)) {
      throw std::invalid_argument("Scenario: d_pattern entries must be > 0");
    }
  }
}

std::vector<double> scenario_covariates(const Scenario& s) {
  s.validate();
  std::mt19937_64 gen = make_stream(s.covariate_seed, 0, 0x636f76ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> x(static_cast<size_t>(s.m));
  for (double& xi : x) xi = unif(gen);
  return x;
}

double draw_random_effect(ScenarioTag tag, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  if (tag == ScenarioTag::I) {
    return normal(gen);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double frac = tag == ScenarioTag::III ? 0.30 : 0.15;
  const bool contaminated = unif(gen) < frac;
  if (!contaminated) {
    return normal(gen);
  }
  switch (tag) {
    case ScenarioTag::II:
    case ScenarioTag::III:
      return 10.0 * normal(gen);
    case ScenarioTag::IV: {
      std::student_t_distribution<double> t5(5.0);
      return t5(gen) * std::sqrt(49.0 / (5.0 / 3.0));
    }
    case ScenarioTag::V: {
      std::chi_squared_distribution<double> chi5(5.0);
      return (chi5(gen) - 5.0) * std::sqrt(49.0 / 10.0);
    }
    default:
      throw std::invalid_argument("invalid scenario tag");
  }
}

std::pair<Dataset, std::vector<double>> generate_scenario(const Scenario& s, int replicate,
                                                          std::uint64_t seed) {
  s.validate();
  const std::vector<double> x = scenario_covariates(s);
  const int per_group = s.m / 5;
  std::mt19937_64 gen = make_stream(seed, static_cast<std::uint64_t>(replicate), kSubGenerate);
  std::normal_distribution<double> normal;

  std::vector<AreaObservation> areas;
  std::vector<double> thetas;
  areas.reserve(static_cast<size_t>(s.m));
  thetas.reserve(static_cast<size_t>(s.m));
  const double sd_v = std::sqrt(s.a);
  for (int i = 0; i < s.m; ++i) {
    const double d = s.d_pattern[static_cast<size_t>(i / per_group)];
    const double u = draw_random_effect(s.tag, gen);
    const double theta = s.beta0 + s.beta1 * x[static_cast<size_t>(i)] + sd_v * u;
    const double y = theta + std::sqrt(d) * normal(gen);
    Eigen::VectorXd xi(2);
    xi << 1.0, x[static_cast<size_t>(i)];
    areas.push_back(AreaObservation{y, xi, d});
    thetas.push_back(theta);
  }
  return {Dataset(std::move(areas)), std::move(thetas)};
}

std::vector<EstimatorSpec> standard_estimators() {
  using Tag = PredictorKind::Tag;
  return {
      {"DPEB1", Tag::DPEB, 1.0, 0.0, 1.345},
      {"DPEB2", Tag::DPEB, 5.0, 0.0, 1.345},
      {"EB", Tag::EB, 0.0, 0.0, 1.345},
      {"REB2", Tag::SREB, 0.0, 0.0, 1.345},
      {"GEB", Tag::GEB, 0.0, 0.0, 1.345},
  };
}

std::string SimReport::to_csv() const {
  std::ostringstream out;
  out << "scenario,group,estimator,metric,value\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.value);
    out << row.scenario << ',' << row.group << ',' << row.estimator << ',' << row.metric
        << ',' << buf << '\n';
  }
  return out.str();
}

std::string SimReport::to_table() const {
  // One block per metric: estimators down, groups across, 3 decimals.
  std::vector<std::string> metrics;
  std::vector<std::string> estimators;
  for (const auto& row : rows) {
    if (std::find(metrics.begin(), metrics.end(), row.metric) == metrics.end()) {
      metrics.push_back(row.metric);
    }
    if (std::find(estimators.begin(), estimators.end(), row.estimator) == estimators.end()) {
      estimators.push_back(row.estimator);
    }
  }
  std::ostringstream out;
  char buf[64];
  for (const auto& metric : metrics) {
    out << metric;
    if (!rows.empty()) out << "  (scenario " << rows.front().scenario << ")";
    out << "\n";
    std::snprintf(buf, sizeof(buf), "%-10s", "");
    out << buf;
    for (int g = 1; g <= 5; ++g) {
      std::snprintf(buf, sizeof(buf), "%10s%d", "group ", g);
      out << buf;
    }
    out << "\n";
    for (const auto& est : estimators) {
      bool any = false;
      std::ostringstream line;
      std::snprintf(buf, sizeof(buf), "%-10s", est.c_str());
      line << buf;
      for (int g = 1; g <= 5; ++g) {
        double value = std::numeric_limits<double>::quiet_NaN();
        for (const auto& row : rows) {
          if (row.metric == metric && row.estimator == est && row.group == g) {
            value = row.value;
            any = true;
          }
        }
        std::snprintf(buf, sizeof(buf), "%11.3f", value);
        line << buf;
      }
      if (any) out << line.str() << "\n";
    }
    out << "\n";
  }
  for (const auto& note : notes) {
    out << "note: " << note << "\n";
  }
  return out.str();
}

SimReport run_prediction_study(const Scenario& s, const std::vector<EstimatorSpec>& estimators,
                               int r, std::uint64_t seed, const StudyConfig& config) {
  if (r < 1) {
    throw std::invalid_argument("run_prediction_study: r must be >= 1");
  }
  s.validate();
  const int m = s.m;
  const int ne = static_cast<int>(estimators.size());

  struct Slot {
    bool ok = false;
    std::vector<double> sq;  // ne * m squared errors
  };
  std::vector<Slot> slots(static_cast<size_t>(r));

  parallel_replicates(r, config.threads, [&](int rep) {
    Slot& slot = slots[static_cast<size_t>(rep)];
    try {
      auto [data, theta] = generate_scenario(s, rep, seed);
      const FitResult ml = fit_ml(data);
      if (!ml.converged) return;

      slot.sq.assign(static_cast<size_t>(ne * m), 0.0);
      for (int e = 0; e < ne; ++e) {
        const EstimatorSpec& spec = estimators[static_cast<size_t>(e)];
        ModelParams params = ml.params;
        PredictorKind kind{spec.tag, 0.0, spec.huber_k};
        if (spec.tag == PredictorKind::Tag::DPEB) {
          const double alpha =
              spec.c_percent > 0.0 ? select_alpha_at(data, ml.params.a, spec.c_percent)
                                   : spec.fixed_alpha;
          kind.alpha = alpha;
          if (alpha > 0.0) {
            FitConfig cfg;
            cfg.init = ml.params;
            const FitResult dpd = fit_dpd(data, Alpha(alpha), cfg);
            if (!dpd.converged) return;
            params = dpd.params;
          }
        }
        const std::vector<Prediction> pred = predict_all(data, params, kind);
        for (int i = 0; i < m; ++i) {
          const double err = pred[static_cast<size_t>(i)].theta_hat -
                             theta[static_cast<size_t>(i)];
          slot.sq[static_cast<size_t>(e * m + i)] = err * err;
        }
      }
      slot.ok = true;
    } catch (const ConvergenceError&) {
    } catch (const SingularDesignError&) {
    }
  });

  int used = 0;
  std::vector<double> sums(static_cast<size_t>(ne * m), 0.0);
  for (const Slot& slot : slots) {
    if (!slot.ok) continue;
    ++used;
    for (size_t i = 0; i < sums.size(); ++i) sums[i] += slot.sq[i];
  }
  const int failed = r - used;
  if (failed * 20 > r) {
    throw ConvergenceError("run_prediction_study: more than 5% of replicates failed");
  }

  SimReport report;
  report.replicates = used;
  report.failed = failed;
  report.seed = seed;
  report.notes.push_back("REB1: not implemented");
  const std::string tag = to_string(s.tag);
  for (int e = 0; e < ne; ++e) {
    std::vector<double> per_area(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      per_area[static_cast<size_t>(i)] = sums[static_cast<size_t>(e * m + i)] / used;
    }
    const std::vector<double> groups = group_average(per_area);
    for (int g = 0; g < 5; ++g) {
      report.rows.push_back(
          {tag, g + 1, estimators[static_cast<size_t>(e)].name, "mse", groups[static_cast<size_t>(g)]});
    }
  }
  return report;
}

namespace {

/// Per-replicate DPEB analysis used by both phases of the MSE study:
/// alpha selected at the replicate's ML variance, then a weighted fit.
struct Analysis {
  double alpha = 0.0;
  FitResult fit;
};

Analysis analyze(const Dataset& data, double c_percent) {
  const FitResult ml = fit_ml(data);
  if (!ml.converged) {
    throw ConvergenceError("analysis: ML fit did not converge");
  }
  Analysis out;
  out.alpha = select_alpha_at(data, ml.params.a, c_percent);
  FitConfig cfg;
  cfg.init = ml.params;
  out.fit = fit_dpd(data, Alpha(out.alpha), cfg);
  if (!out.fit.converged) {
    throw ConvergenceError("analysis: weighted fit did not converge");
  }
  return out;
}

std::vector<double> true_mse_pass(const Scenario& s, int truth_r, std::uint64_t seed,
                                  const StudyConfig& config, int* failed_out) {
  const int m = s.m;
  const std::uint64_t truth_seed = mix64(seed ^ kTagTruth);

  std::filesystem::path cache_file;
  if (!config.cache_dir.empty()) {
    std::uint64_t h = scenario_hash(s);
    h = hash_mix(h, static_cast<std::uint64_t>(truth_r));
    h = hash_mix(h, seed);
    h = hash_double(h, config.c_percent);
    char name[64];
    std::snprintf(name, sizeof(name), "truth_%016llx.csv",
                  static_cast<unsigned long long>(h));
    cache_file = std::filesystem::path(config.cache_dir) / name;
    if (std::filesystem::exists(cache_file)) {
      std::ifstream in(cache_file);
      std::vector<double> cached;
      double v;
      while (in >> v) cached.push_back(v);
      if (static_cast<int>(cached.size()) == m) {
        *failed_out = 0;
        return cached;
      }
    }
  }

  struct Slot {
    bool ok = false;
    std::vector<double> sq;
  };
  std::vector<Slot> slots(static_cast<size_t>(truth_r));
  parallel_replicates(truth_r, config.threads, [&](int rep) {
    Slot& slot = slots[static_cast<size_t>(rep)];
    try {
      auto [data, theta] = generate_scenario(s, rep, truth_seed);
      const Analysis an = analyze(data, config.c_percent);
      const std::vector<Prediction> pred = predict_all(
          data, an.fit.params, PredictorKind{PredictorKind::Tag::DPEB, an.alpha, 1.345});
      slot.sq.resize(static_cast<size_t>(m));
      for (int i = 0; i < m; ++i) {
        const double err =
            pred[static_cast<size_t>(i)].theta_hat - theta[static_cast<size_t>(i)];
        slot.sq[static_cast<size_t>(i)] = err * err;
      }
      slot.ok = true;
    } catch (const ConvergenceError&) {
    } catch (const SingularDesignError&) {
    }
  });

  int used = 0;
  std::vector<double> sums(static_cast<size_t>(m), 0.0);
  for (const Slot& slot : slots) {
    if (!slot.ok) continue;
    ++used;
    for (int i = 0; i < m; ++i) sums[static_cast<size_t>(i)] += slot.sq[static_cast<size_t>(i)];
  }
  *failed_out = truth_r - used;
  if (*failed_out * 20 > truth_r) {
    throw ConvergenceError("run_mse_estimator_study: more than 5% of truth replicates failed");
  }
  for (double& v : sums) v /= used;

  if (!cache_file.empty()) {
    std::filesystem::create_directories(cache_file.parent_path());
    std::ofstream out(cache_file);
    char buf[64];
    for (double v : sums) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", v);
      out << buf;
    }
  }
  return sums;
}

}  // namespace

SimReport run_mse_estimator_study(const Scenario& s, int outer_s, int truth_r,
                                  std::uint64_t seed, const StudyConfig& config) {
  s.validate();
  if (outer_s < 1 || truth_r < 1) {
    throw std::invalid_argument("run_mse_estimator_study: replicate counts must be >= 1");
  }
  if (s.tag != ScenarioTag::I && s.tag != ScenarioTag::II && s.tag != ScenarioTag::III) {
    throw std::invalid_argument("run_mse_estimator_study: scenario must be I, II, or III");
  }
  const int m = s.m;
  int truth_failed = 0;
  const std::vector<double> truth = true_mse_pass(s, truth_r, seed, config, &truth_failed);

  const std::uint64_t outer_seed = mix64(seed ^ kTagOuter);
  constexpr int kVariants = 3;  // naive, plugin, bootstrap
  struct Slot {
    bool ok = false;
    std::vector<double> est;  // kVariants * m
  };
  std::vector<Slot> slots(static_cast<size_t>(outer_s));
  parallel_replicates(outer_s, config.threads, [&](int rep) {
    Slot& slot = slots[static_cast<size_t>(rep)];
    try {
      auto [data, theta] = generate_scenario(s, rep, outer_seed);
      const Analysis an = analyze(data, config.c_percent);
      const Alpha alpha(an.alpha);
      const std::vector<double> naive = mse_naive(data, an.fit.params, alpha);
      const std::vector<double> plugin = mse_plugin(data, an.fit.params, alpha);
      const std::uint64_t boot_seed =
          mix64(outer_seed ^ (kTagBoot + static_cast<std::uint64_t>(rep)));
      const BootstrapMse boot =
          mse_bootstrap(data, an.fit, alpha, config.bootstrap_b, boot_seed);
      slot.est.resize(static_cast<size_t>(kVariants * m));
      for (int i = 0; i < m; ++i) {
        slot.est[static_cast<size_t>(i)] = naive[static_cast<size_t>(i)];
        slot.est[static_cast<size_t>(m + i)] = plugin[static_cast<size_t>(i)];
        slot.est[static_cast<size_t>(2 * m + i)] = boot.mse[static_cast<size_t>(i)];
      }
      slot.ok = true;
    } catch (const ConvergenceError&) {
    } catch (const SingularDesignError&) {
    }
  });

  int used = 0;
  std::vector<double> sum_dev(static_cast<size_t>(kVariants * m), 0.0);
  std::vector<double> sum_sq(static_cast<size_t>(kVariants * m), 0.0);
  for (const Slot& slot : slots) {
    if (!slot.ok) continue;
    ++used;
    for (int v = 0; v < kVariants; ++v) {
      for (int i = 0; i < m; ++i) {
        const size_t idx = static_cast<size_t>(v * m + i);
        const double ratio =
            (slot.est[idx] - truth[static_cast<size_t>(i)]) / truth[static_cast<size_t>(i)];
        sum_dev[idx] += ratio;
        sum_sq[idx] += ratio * ratio;
      }
    }
  }
  const int failed = outer_s - used;
  if (failed * 20 > outer_s) {
    throw ConvergenceError("run_mse_estimator_study: more than 5% of outer replicates failed");
  }

  SimReport report;
  report.replicates = used;
  report.failed = failed + truth_failed;
  report.seed = seed;
  const std::string tag = to_string(s.tag);
  const char* names[kVariants] = {"nMSE", "pMSE", "bMSE"};
  for (int v = 0; v < kVariants; ++v) {
    std::vector<double> rb(static_cast<size_t>(m));
    std::vector<double> cv(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      const size_t idx = static_cast<size_t>(v * m + i);
      rb[static_cast<size_t>(i)] = 100.0 * sum_dev[idx] / used;
      cv[static_cast<size_t>(i)] = std::sqrt(sum_sq[idx] / used);
    }
    const std::vector<double> rb_g = group_average(rb);
    const std::vector<double> cv_g = group_average(cv);
    for (int g = 0; g < 5; ++g) {
      report.rows.push_back({tag, g + 1, names[v], "rb_pct", rb_g[static_cast<size_t>(g)]});
    }
    for (int g = 0; g < 5; ++g) {
      report.rows.push_back({tag, g + 1, names[v], "cv", cv_g[static_cast<size_t>(g)]});
    }
  }
  return report;
}

}  // namespace dpfh
