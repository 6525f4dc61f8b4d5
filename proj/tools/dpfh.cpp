// Command-line front end: fit, predict, mse, select-alpha, simulate.
//
// Exit codes: 0 success, 2 parse/validation error, 3 numerical failure,
// 4 success with warnings.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "dpfh/fitting.hpp"
#include "dpfh/io.hpp"
#include "dpfh/model.hpp"
#include "dpfh/mse.hpp"
#include "dpfh/predictors.hpp"
#include "dpfh/simulation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitWarnings = 4;

struct Warnings {
  std::vector<std::string> messages;
  void add(std::string msg) { messages.push_back(std::move(msg)); }
};

void write_text(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) {
    throw dpfh::ParseError(path + ": cannot open for writing");
  }
  out << content;
}

/// Resolve the tuning parameter: explicit alpha wins, otherwise select from
/// the data at the requested efficiency-loss percentage.
double resolve_alpha(const dpfh::Dataset& data, double alpha, double c_percent,
                     Warnings& warnings) {
  if (alpha >= 0.0) {
    return alpha;
  }
  const dpfh::AlphaSelection sel = dpfh::select_alpha(data, c_percent);
  if (sel.capped) {
    warnings.add("alpha selection: target efficiency loss unattainable; using cap");
  }
  return sel.alpha;
}

int cmd_fit(const std::string& input, const std::string& method, double alpha,
            double c_percent, const std::string& output) {
  const dpfh::InputTable table = dpfh::read_input_table_file(input);
  Warnings warnings;
  dpfh::Alpha al(0.0);
  if (method == "dpd") {
    al = dpfh::Alpha(resolve_alpha(table.data, alpha, c_percent, warnings));
  }
  const dpfh::FitResult fit = dpfh::fit(table.data, al);
  if (!fit.converged) {
    throw dpfh::ConvergenceError("fit did not converge");
  }

  std::ostringstream out;
  out << "method: " << method << "\n";
  out << "alpha: " << dpfh::format_full(al.value()) << "\n";
  out << "converged: " << (fit.converged ? "yes" : "no")
      << "  iterations: " << fit.iterations << "\n";
  out << "objective: " << dpfh::format_full(fit.objective) << "\n";
  for (int j = 0; j < fit.params.beta.size(); ++j) {
    out << "beta" << (j + 1) << ": " << dpfh::format_full(fit.params.beta[j])
        << "  (se " << dpfh::format_full(std::sqrt(fit.cov_beta(j, j))) << ")\n";
  }
  out << "a: " << dpfh::format_full(fit.params.a) << "  (se "
      << dpfh::format_full(std::sqrt(fit.var_a)) << ")\n";
  if (fit.at_floor) {
    out << "warning: variance estimate at lower floor\n";
    warnings.add("variance estimate at lower floor");
  }

  // Smallest weights first: the top of this list is the outlier diagnostic.
  std::vector<int> order(table.area_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return fit.weights[static_cast<size_t>(a)] < fit.weights[static_cast<size_t>(b)];
  });
  out << "weights (ascending):\n";
  for (int i : order) {
    out << "  " << table.area_ids[static_cast<size_t>(i)] << ": "
        << dpfh::format_full(fit.weights[static_cast<size_t>(i)]) << "\n";
  }
  write_text(output, out.str());
  for (const auto& msg : warnings.messages) {
    std::cerr << "warning: " << msg << "\n";
  }
  return warnings.messages.empty() ? kExitOk : kExitWarnings;
}

int cmd_predict(const std::string& input, const std::string& method, double alpha,
                double c_percent, double huber_k, const std::string& output) {
  const dpfh::InputTable table = dpfh::read_input_table_file(input);
  Warnings warnings;

  using Tag = dpfh::PredictorKind::Tag;
  dpfh::PredictorKind kind;
  kind.huber_k = huber_k;
  dpfh::Alpha fit_alpha(0.0);
  if (method == "eb") {
    kind.tag = Tag::EB;
  } else if (method == "dpeb") {
    kind.tag = Tag::DPEB;
    kind.alpha = resolve_alpha(table.data, alpha, c_percent, warnings);
    fit_alpha = dpfh::Alpha(kind.alpha);
  } else if (method == "geb") {
    kind.tag = Tag::GEB;
  } else if (method == "sreb") {
    kind.tag = Tag::SREB;
  } else {
    throw CLI::ValidationError("method must be one of eb, dpeb, geb, sreb");
  }

  const dpfh::FitResult fit = dpfh::fit(table.data, fit_alpha);
  if (!fit.converged) {
    throw dpfh::ConvergenceError("fit did not converge");
  }
  const std::vector<dpfh::Prediction> preds =
      dpfh::predict_all(table.data, fit.params, kind);

  std::ostringstream out;
  out << "area_id,direct,estimate,shrink_weight,standardized_residual\n";
  int fallbacks = 0;
  for (int i = 0; i < table.data.size(); ++i) {
    const auto& obs = table.data[i];
    const double resid =
        (obs.y - fit.params.beta.dot(obs.x)) / std::sqrt(fit.params.a + obs.d);
    const auto& pr = preds[static_cast<size_t>(i)];
    fallbacks += pr.fallback ? 1 : 0;
    out << table.area_ids[static_cast<size_t>(i)] << ',' << dpfh::format_full(obs.y)
        << ',' << dpfh::format_full(pr.theta_hat) << ','
        << dpfh::format_full(pr.shrink_weight) << ',' << dpfh::format_full(resid) << '\n';
  }
  if (fallbacks > 0) {
    warnings.add(std::to_string(fallbacks) + " area(s) used the fallback rule");
  }
  write_text(output, out.str());
  for (const auto& msg : warnings.messages) {
    std::cerr << "warning: " << msg << "\n";
  }
  return warnings.messages.empty() ? kExitOk : kExitWarnings;
}

int cmd_mse(const std::string& input, const std::string& variant, double alpha,
            double c_percent, int bootstrap_b, std::uint64_t seed,
            const std::string& output) {
  const dpfh::InputTable table = dpfh::read_input_table_file(input);
  Warnings warnings;
  const dpfh::Alpha al(resolve_alpha(table.data, alpha, c_percent, warnings));
  const dpfh::FitResult fit = dpfh::fit(table.data, al);
  if (!fit.converged) {
    throw dpfh::ConvergenceError("fit did not converge");
  }

  const int m = table.data.size();
  const dpfh::AsymptoticBlocks blocks =
      dpfh::asymptotic_blocks(table.data, fit.params, al);

  std::vector<double> estimates;
  std::vector<bool> clamped(static_cast<size_t>(m), false);
  double b_a = 0.0;
  int boot_failed = 0;
  if (variant == "naive") {
    estimates = dpfh::mse_naive(table.data, fit.params, al);
  } else if (variant == "plugin") {
    estimates = dpfh::mse_plugin(table.data, fit.params, al);
  } else if (variant == "bootstrap") {
    const dpfh::BootstrapMse boot =
        dpfh::mse_bootstrap(table.data, fit, al, bootstrap_b, seed);
    estimates = boot.mse;
    clamped = boot.clamped;
    b_a = boot.b_a;
    boot_failed = boot.failed;
    if (boot.failed > 0) {
      warnings.add(std::to_string(boot.failed) + " bootstrap refit(s) failed");
    }
  } else {
    throw CLI::ValidationError("variant must be one of naive, plugin, bootstrap");
  }

  std::ostringstream out;
  out << "area_id,g1,g2,g3,g4,g5,mse_estimate,clamped,bootstrap_failures\n";
  for (int i = 0; i < m; ++i) {
    const dpfh::MseComponents c =
        dpfh::mse_components(table.data, i, fit.params, al, blocks, b_a);
    out << table.area_ids[static_cast<size_t>(i)] << ',' << dpfh::format_full(c.g1)
        << ',' << dpfh::format_full(c.g2) << ',' << dpfh::format_full(c.g3) << ','
        << dpfh::format_full(c.g4) << ',' << dpfh::format_full(c.g5) << ','
        << dpfh::format_full(estimates[static_cast<size_t>(i)]) << ','
        << (clamped[static_cast<size_t>(i)] ? 1 : 0) << ',' << boot_failed << '\n';
  }
  write_text(output, out.str());
  for (const auto& msg : warnings.messages) {
    std::cerr << "warning: " << msg << "\n";
  }
  return warnings.messages.empty() ? kExitOk : kExitWarnings;
}

int cmd_select_alpha(const std::string& input, double c_percent) {
  const dpfh::InputTable table = dpfh::read_input_table_file(input);
  const dpfh::AlphaSelection sel = dpfh::select_alpha(table.data, c_percent);
  std::cout << "alpha: " << dpfh::format_full(sel.alpha) << "\n";
  std::cout << "excess: " << dpfh::format_full(sel.excess) << "\n";
  std::cout << "a_ml: " << dpfh::format_full(sel.a_ml) << "\n";
  std::cout << "iterations: " << sel.iterations << "\n";
  if (sel.capped) {
    std::cerr << "warning: target efficiency loss unattainable; alpha capped\n";
    return kExitWarnings;
  }
  return kExitOk;
}

int cmd_simulate(const std::string& study, const dpfh::Scenario& scenario, int r,
                 int outer_s, int truth_r, std::uint64_t seed,
                 const dpfh::StudyConfig& config, const std::string& out_prefix) {
  dpfh::SimReport report;
  if (study == "prediction") {
    report = dpfh::run_prediction_study(scenario, dpfh::standard_estimators(), r, seed,
                                        config);
  } else if (study == "mse") {
    report = dpfh::run_mse_estimator_study(scenario, outer_s, truth_r, seed, config);
  } else {
    throw CLI::ValidationError("study must be 'prediction' or 'mse'");
  }

  std::ostringstream header;
  header << "# scenario " << dpfh::to_string(scenario.tag) << ", m " << scenario.m
         << ", seed " << report.seed << ", replicates " << report.replicates
         << ", failed " << report.failed << "\n";
  if (out_prefix.empty()) {
    std::cout << header.str() << report.to_table();
  } else {
    write_text(out_prefix + ".csv", report.to_csv());
    write_text(out_prefix + ".txt", header.str() + report.to_table());
    std::cout << "wrote " << out_prefix << ".csv and " << out_prefix << ".txt\n";
  }
  if (report.failed > 0) {
    std::cerr << "warning: " << report.failed << " replicate(s) excluded\n";
    return kExitWarnings;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust small-area estimation for area-level models"};
  app.require_subcommand(1);
  app.set_config("--config")->description("key = value config file; flags override");

  std::uint64_t seed = 20260824ULL;
  int threads = 0;
  app.add_option("--seed", seed, "RNG seed for all stochastic commands");
  app.add_option("--threads", threads, "worker threads (0 = all cores)")
      ->envname("DPFH_THREADS");

  std::string input;
  std::string output;
  double alpha = -1.0;
  double c_percent = 5.0;
  double huber_k = 1.345;
  int bootstrap_b = 500;

  auto* fit_cmd = app.add_subcommand("fit", "Estimate model parameters");
  std::string fit_method = "dpd";
  fit_cmd->add_option("--input", input, "input CSV")->required();
  fit_cmd->add_option("--method", fit_method, "ml or dpd")
      ->check(CLI::IsMember({"ml", "dpd"}));
  fit_cmd->add_option("--alpha", alpha, "tuning parameter in [0, 1)");
  fit_cmd->add_option("--c", c_percent, "efficiency-loss percent for alpha selection");
  fit_cmd->add_option("--output", output, "output path (default stdout)");

  auto* predict_cmd = app.add_subcommand("predict", "Per-area point predictions");
  std::string predict_method = "dpeb";
  predict_cmd->add_option("--input", input, "input CSV")->required();
  predict_cmd->add_option("--method", predict_method, "eb, dpeb, geb, or sreb")
      ->check(CLI::IsMember({"eb", "dpeb", "geb", "sreb"}));
  predict_cmd->add_option("--alpha", alpha, "tuning parameter in [0, 1)");
  predict_cmd->add_option("--c", c_percent, "efficiency-loss percent for alpha selection");
  predict_cmd->add_option("--k", huber_k, "Huber tuning constant");
  predict_cmd->add_option("--output", output, "output path (default stdout)");

  auto* mse_cmd = app.add_subcommand("mse", "Per-area MSE estimates");
  std::string mse_variant = "bootstrap";
  mse_cmd->add_option("--input", input, "input CSV")->required();
  mse_cmd->add_option("--variant", mse_variant, "naive, plugin, or bootstrap")
      ->check(CLI::IsMember({"naive", "plugin", "bootstrap"}));
  mse_cmd->add_option("--alpha", alpha, "tuning parameter in [0, 1)");
  mse_cmd->add_option("--c", c_percent, "efficiency-loss percent for alpha selection");
  mse_cmd->add_option("-b,--bootstrap-b", bootstrap_b, "bootstrap resamples");
  mse_cmd->add_option("--output", output, "output path (default stdout)");

  auto* select_cmd = app.add_subcommand("select-alpha", "Choose the tuning parameter");
  select_cmd->add_option("--input", input, "input CSV")->required();
  select_cmd->add_option("--c", c_percent, "efficiency-loss percent target");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo studies");
  std::string study = "prediction";
  std::string scenario_name = "I";
  dpfh::Scenario scenario;
  int r = 1000;
  int outer_s = 500;
  int truth_r = 2000;
  std::string out_prefix;
  std::string cache_dir;
  sim_cmd->add_option("--study", study, "prediction or mse")
      ->check(CLI::IsMember({"prediction", "mse"}));
  sim_cmd->add_option("--scenario", scenario_name, "I, II, III, IV, or V");
  sim_cmd->add_option("--m", scenario.m, "number of areas (multiple of 5)");
  sim_cmd->add_option("--a", scenario.a, "random-effect variance");
  sim_cmd->add_option("--beta0", scenario.beta0, "intercept");
  sim_cmd->add_option("--beta1", scenario.beta1, "slope");
  sim_cmd->add_option("--covariate-seed", scenario.covariate_seed, "seed for the fixed covariate draw");
  sim_cmd->add_option("--r", r, "prediction-study replicates");
  sim_cmd->add_option("--S", outer_s, "mse-study outer replicates");
  sim_cmd->add_option("--truth-r", truth_r, "mse-study truth replicates");
  sim_cmd->add_option("--c", c_percent, "efficiency-loss percent for the mse study");
  sim_cmd->add_option("-b,--bootstrap-b", bootstrap_b, "bootstrap resamples per replicate")
      ->default_val(200);
  sim_cmd->add_option("--cache-dir", cache_dir, "directory for true-MSE caching");
  sim_cmd->add_option("--out-prefix", out_prefix, "write <prefix>.csv and <prefix>.txt");
  auto* sim_seed = sim_cmd->add_option("--seed", seed, "RNG seed (required)");
  sim_seed->required();

  for (CLI::App* sub : {fit_cmd, predict_cmd, mse_cmd, select_cmd, sim_cmd}) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  if (alpha != -1.0 && !(alpha >= 0.0 && alpha < 1.0)) {
    std::cerr << "error: --alpha must lie in [0, 1)\n";
    return kExitParse;
  }

  try {
    if (fit_cmd->parsed()) {
      return cmd_fit(input, fit_method, alpha, c_percent, output);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(input, predict_method, alpha, c_percent, huber_k, output);
    }
    if (mse_cmd->parsed()) {
      return cmd_mse(input, mse_variant, alpha, c_percent, bootstrap_b, seed, output);
    }
    if (select_cmd->parsed()) {
      return cmd_select_alpha(input, c_percent);
    }
    if (sim_cmd->parsed()) {
      scenario.tag = dpfh::scenario_tag_from_string(scenario_name);
      dpfh::StudyConfig config;
      config.threads = threads;
      config.bootstrap_b = bootstrap_b;
      config.c_percent = c_percent;
      config.cache_dir = cache_dir;
      return cmd_simulate(study, scenario, r, outer_s, truth_r, seed, config, out_prefix);
    }
  } catch (const dpfh::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const dpfh::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const dpfh::SingularDesignError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
