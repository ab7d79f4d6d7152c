// Serial reference against the OpenMP path for the per-observation work.

#include <benchmark/benchmark.h>

#include "riskmmse/experiments.hpp"

using namespace riskmmse;

namespace {

ExecPolicy policy_of(const benchmark::State& s) { return s.range(0) ? ExecPolicy::parallel : ExecPolicy::serial; }

ModelSpec model_of(const benchmark::State& s) { return s.range(1) ? scenario_b() : scenario_a(); }

void BM_BuildObservationSet(benchmark::State& state) {
  const auto model = model_of(state);
  for (auto _ : state) {
    ObservationSet obs(model, {OuterMode::monte_carlo, 400, 7}, {}, policy_of(state));
    benchmark::DoNotOptimize(obs.size());
  }
}

void BM_Evaluate(benchmark::State& state) {
  const auto model = model_of(state);
  const ObservationSet obs(model, {OuterMode::monte_carlo, 2000, 7});
  const bool per_component = model.state_dim() > 1;
  for (auto _ : state) benchmark::DoNotOptimize(obs.evaluate(1.0, per_component, policy_of(state)).risk);
}

void BM_Sweep(benchmark::State& state) {
  const auto model = model_of(state);
  const ObservationSet obs(model, {OuterMode::monte_carlo, 2000, 7});
  const auto grid = log_grid(1e-3, 1e3, 30);
  for (auto _ : state) benchmark::DoNotOptimize(sweep_mu(obs, grid, policy_of(state)).size());
}

}  // namespace

// Args: {parallel, scenario B}
BENCHMARK(BM_BuildObservationSet)->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate)->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Sweep)->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
