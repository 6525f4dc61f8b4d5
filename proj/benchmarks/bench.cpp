// Microbenchmarks for the hot paths: the fixed-point fits, the per-area
// weight evaluation, and the bootstrap MSE estimator.

#include <benchmark/benchmark.h>

#include <random>

#include "dpfh/fitting.hpp"
#include "dpfh/model.hpp"
#include "dpfh/mse.hpp"
#include "dpfh/simulation.hpp"

namespace {

dpfh::Dataset scenario_data(int m) {
  dpfh::Scenario s;
  s.m = m;
  auto [data, theta] = dpfh::generate_scenario(s, 0, 99);
  return data;
}

void BM_FitMl(benchmark::State& state) {
  const auto data = scenario_data(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpfh::fit_ml(data));
  }
}
BENCHMARK(BM_FitMl)->Arg(30)->Arg(100)->Arg(500);

void BM_FitDpd(benchmark::State& state) {
  const auto data = scenario_data(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpfh::fit_dpd(data, dpfh::Alpha(0.3)));
  }
}
BENCHMARK(BM_FitDpd)->Arg(30)->Arg(100)->Arg(500);

void BM_Weights(benchmark::State& state) {
  const auto data = scenario_data(100);
  const dpfh::FitResult fit = dpfh::fit_ml(data);
  for (auto _ : state) {
    double acc = 0.0;
    for (const auto& obs : data.areas()) {
      acc += dpfh::s_weight(obs, fit.params, dpfh::Alpha(0.3));
    }
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_Weights);

void BM_MseBootstrap(benchmark::State& state) {
  const auto data = scenario_data(30);
  const dpfh::FitResult fit = dpfh::fit_dpd(data, dpfh::Alpha(0.3));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dpfh::mse_bootstrap(data, fit, dpfh::Alpha(0.3), 100, 5));
  }
}
BENCHMARK(BM_MseBootstrap);

}  // namespace

BENCHMARK_MAIN();
