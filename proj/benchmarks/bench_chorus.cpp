#include <benchmark/benchmark.h>

#include "chorus/likelihood.hpp"
#include "chorus/logpmf.hpp"
#include "chorus/mcmc.hpp"
#include "chorus/rng.hpp"
#include "chorus/simulate.hpp"

namespace {

using namespace chorus;

ScenarioSpec medium_spec() {
  ScenarioSpec spec;
  spec.design.num_acoustic_sites = 50;
  spec.design.num_count_sites = 50;
  spec.design.acoustic_surveys = 10;
  spec.design.count_surveys = 3;
  spec.design.site_map.resize(50);
  for (int i = 0; i < 50; ++i) spec.design.site_map[i] = i;
  spec.abundance.kind = AbundanceKind::kConstant;
  spec.abundance.lambda = 3.0;
  spec.alpha0 = -2.19;
  spec.alpha1 = 3.0;
  spec.delta = 4.0;
  spec.omega = 3.0;
  spec.p = inv_logit(-2.19 + 3.0);
  spec.validation_fraction = 0.2;
  spec.seed = 7;
  return spec;
}

void BM_PhiloxU64(benchmark::State& state) {
  RngStream rng(1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(rng.next_u64());
}
BENCHMARK(BM_PhiloxU64);

void BM_PoissonLpmf(benchmark::State& state) {
  long x = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(poisson_lpmf(x, 7.3));
    x = (x + 1) & 63;
  }
}
BENCHMARK(BM_PoissonLpmf);

void BM_Simulate(benchmark::State& state) {
  ScenarioSpec spec = medium_spec();
  for (auto _ : state) {
    spec.seed += 1;
    benchmark::DoNotOptimize(simulate_complete(spec));
  }
}
BENCHMARK(BM_Simulate);

void BM_JointLoglik(benchmark::State& state) {
  const auto [dataset, truth] = simulate_complete(medium_spec());
  ParameterState ps;
  ps.site_abundance = truth.site_abundance;
  ps.true_calls = truth.true_calls;
  ps.alpha0 = truth.alpha0;
  ps.alpha1 = truth.alpha1;
  ps.delta = truth.delta;
  ps.omega = truth.omega;
  ps.p = truth.p;
  ps.abundance = truth.abundance;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        joint_loglik(ps, dataset, ModelVariant::kACV).value);
}
BENCHMARK(BM_JointLoglik);

void BM_ShortFit(benchmark::State& state) {
  const auto [dataset, truth] = simulate_complete(medium_spec());
  McmcConfig config;
  config.chains = 1;
  config.iterations = 400;
  config.burn_in = 100;
  config.adapt = 100;
  config.thin = 2;
  config.seed = 3;
  for (auto _ : state)
    benchmark::DoNotOptimize(run(dataset, ModelVariant::kACV, config));
}
BENCHMARK(BM_ShortFit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
