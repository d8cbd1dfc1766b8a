#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "chorus/diagnostics.hpp"
#include "chorus/likelihood.hpp"
#include "chorus/logpmf.hpp"
#include "chorus/mcmc.hpp"
#include "chorus/rng.hpp"
#include "chorus/simulate.hpp"
#include "chorus/types.hpp"

using namespace chorus;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One shared global site carrying acoustic, validation, and count data.
Dataset one_site_acv() {
  SurveyDesign d;
  d.num_acoustic_sites = 1;
  d.num_count_sites = 1;
  d.acoustic_surveys = 2;
  d.count_surveys = 2;
  d.site_map = {0};
  AcousticData ac;
  ac.y = Grid<int8_t>(1, 2, 1);
  ac.v = Grid<int>(1, 2);
  ac.missing = Grid<uint8_t>(1, 2);
  ac.v(0, 0) = 3;
  ac.v(0, 1) = 5;
  ValidationData val;
  val.n = Grid<int>(1, 2);
  val.k = Grid<int>(1, 2);
  val.n(0, 0) = 1;
  val.k(0, 0) = 1;
  val.n(0, 1) = 2;
  val.k(0, 1) = 1;
  CountData cd;
  cd.c = Grid<int>(1, 2);
  cd.missing = Grid<uint8_t>(1, 2);
  cd.c(0, 0) = 2;
  cd.c(0, 1) = 3;
  return validate_dataset(d, ac, val, cd, {}, ModelVariant::kACV);
}

ParameterState mid_state(const Dataset& dataset) {
  ParameterState s;
  s.site_abundance.assign(
      static_cast<std::size_t>(dataset.design.num_global_sites()), 3);
  if (dataset.acoustic) {
    s.true_calls = Grid<int>(dataset.acoustic->y.rows(),
                             dataset.acoustic->y.cols());
    if (dataset.validation) {
      for (int g = 0; g < s.true_calls.rows(); ++g)
        for (int j = 0; j < s.true_calls.cols(); ++j)
          s.true_calls(g, j) = dataset.validation->k(g, j);
    }
  }
  s.alpha0 = -0.5;
  s.alpha1 = 1.0;
  s.delta = 2.0;
  s.omega = 1.0;
  s.p = 0.5;
  s.abundance.kind = AbundanceKind::kConstant;
  s.abundance.lambda = 2.5;
  return s;
}

// Random feasible state for the balance checks. min_n = 1 keeps the
// validation term finite (tp > 0) where a test requires finite densities.
ParameterState random_state(const Dataset& dataset, RngStream& rng,
                            long min_n = 0) {
  ParameterState s = mid_state(dataset);
  for (auto& n : s.site_abundance) n = rng.uniform_int(min_n, 6);
  if (dataset.acoustic && dataset.validation) {
    for (int g = 0; g < s.true_calls.rows(); ++g) {
      for (int j = 0; j < s.true_calls.cols(); ++j) {
        const int v = dataset.acoustic->v(g, j);
        const int n = dataset.validation->n(g, j);
        const int k = dataset.validation->k(g, j);
        s.true_calls(g, j) =
            n > 0 ? static_cast<int>(rng.uniform_int(k, v - n + k)) : 0;
      }
    }
  }
  s.alpha0 = rng.uniform(-2.0, 0.5);
  s.alpha1 = rng.uniform(0.1, 3.0);
  s.delta = rng.uniform(0.5, 6.0);
  s.omega = rng.uniform(0.5, 4.0);
  s.p = rng.uniform(0.1, 0.9);
  s.abundance.lambda = rng.uniform(0.5, 6.0);
  return s;
}

std::pair<Dataset, TruthRecord> sim_acv(uint64_t seed, int sites = 6) {
  ScenarioSpec spec;
  spec.design.num_acoustic_sites = sites;
  spec.design.num_count_sites = sites;
  spec.design.acoustic_surveys = 3;
  spec.design.count_surveys = 2;
  spec.design.site_map.resize(static_cast<std::size_t>(sites));
  for (int i = 0; i < sites; ++i)
    spec.design.site_map[static_cast<std::size_t>(i)] = i;
  spec.abundance.kind = AbundanceKind::kConstant;
  spec.abundance.lambda = 2.0;
  spec.alpha0 = -1.0;
  spec.alpha1 = 2.0;
  spec.delta = 3.0;
  spec.omega = 2.0;
  spec.p = 0.5;
  spec.validation_fraction = 0.3;
  spec.seed = seed;
  return simulate_complete(spec);
}

McmcConfig quick_config(uint64_t seed) {
  McmcConfig c;
  c.chains = 2;
  c.iterations = 600;
  c.burn_in = 150;
  c.adapt = 150;
  c.thin = 1;
  c.seed = seed;
  return c;
}

double total_variation(const std::vector<double>& a,
                       const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("true_call_conditional matches its support and edge masses") {
  int k_min = -1;
  const auto pmf = true_call_conditional(5, 2, 1, 0.4, &k_min);
  CHECK(k_min == 1);                      // K >= k
  CHECK(pmf.size() == 4);                 // K <= v - (n - k) = 4
  double sum = 0.0;
  for (double w : pmf) {
    CHECK(w >= 0.0);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  // tp = 0 concentrates at K = k; tp = 1 at the upper end.
  const auto zero = true_call_conditional(5, 2, 1, 0.0, &k_min);
  CHECK(k_min == 1);
  CHECK(zero[0] == 1.0);
  const auto one = true_call_conditional(5, 2, 1, 1.0, &k_min);
  CHECK(one.back() == 1.0);

  // All calls checked: K is fully observed.
  const auto all = true_call_conditional(4, 4, 3, 0.6, &k_min);
  CHECK(k_min == 3);
  CHECK(all.size() == 1);
  CHECK(all[0] == 1.0);

  CHECK_THROWS_AS(true_call_conditional(3, 4, 1, 0.5, &k_min),
                  ValidationError);  // n > v
  CHECK_THROWS_AS(true_call_conditional(3, 2, 3, 0.5, &k_min),
                  ValidationError);  // k > n
  CHECK_THROWS_AS(true_call_conditional(-1, 0, 0, 0.5, &k_min),
                  ValidationError);
}

TEST_CASE("site moves: local density differences equal full posterior differences") {
  const Dataset dataset = one_site_acv();
  const Priors priors;
  RngStream rng(301, 0);
  for (ModelVariant variant : {ModelVariant::kAV, ModelVariant::kC,
                               ModelVariant::kAC, ModelVariant::kACV}) {
    for (int trial = 0; trial < 200; ++trial) {
      ParameterState s = random_state(dataset, rng);
      const long from = s.site_abundance[0];
      const long to = rng.uniform_int(0, 6);
      const double before_local = site_local_logdensity(s, dataset, variant, 0);
      const double before_full =
          posterior_logdensity(s, dataset, variant, priors).value;
      s.site_abundance[0] = to;
      const double after_local = site_local_logdensity(s, dataset, variant, 0);
      const double after_full =
          posterior_logdensity(s, dataset, variant, priors).value;
      s.site_abundance[0] = from;

      const double d_local = after_local - before_local;
      const double d_full = after_full - before_full;
      if (std::isfinite(d_local) && std::isfinite(d_full)) {
        CHECK(std::abs(d_local - d_full) <=
              1e-9 * std::max(1.0, std::abs(d_full)));
      } else {
        // Both sides must agree on which direction lost support.
        CHECK(std::isinf(after_local) == std::isinf(after_full));
        CHECK(std::isinf(before_local) == std::isinf(before_full));
      }
    }
  }
}

TEST_CASE("scalar moves: local density differences equal full posterior differences") {
  const Dataset dataset = one_site_acv();
  const Priors priors;
  RngStream rng(302, 0);
  for (ModelVariant variant : {ModelVariant::kAV, ModelVariant::kC,
                               ModelVariant::kAC, ModelVariant::kACV}) {
    const auto scalars = sampled_scalars(variant, AbundanceKind::kConstant);
    for (int trial = 0; trial < 120; ++trial) {
      ParameterState s = random_state(dataset, rng, 1);
      for (ScalarId scalar : scalars) {
        ParameterState t = s;
        switch (scalar) {
          case ScalarId::kLambda: t.abundance.lambda = rng.uniform(0.5, 6.0); break;
          case ScalarId::kAlpha0: t.alpha0 = rng.uniform(-2.0, 0.5); break;
          case ScalarId::kAlpha1: t.alpha1 = rng.uniform(0.1, 3.0); break;
          case ScalarId::kDelta: t.delta = rng.uniform(0.5, 6.0); break;
          case ScalarId::kOmega: t.omega = rng.uniform(0.5, 4.0); break;
          case ScalarId::kP: t.p = rng.uniform(0.1, 0.9); break;
          default: continue;
        }
        const double d_local =
            scalar_local_logdensity(t, dataset, variant, priors, scalar) -
            scalar_local_logdensity(s, dataset, variant, priors, scalar);
        const double d_full =
            posterior_logdensity(t, dataset, variant, priors).value -
            posterior_logdensity(s, dataset, variant, priors).value;
        REQUIRE(std::isfinite(d_full));
        CHECK(std::abs(d_local - d_full) <=
              1e-9 * std::max(1.0, std::abs(d_full)));
      }
    }
  }
}

TEST_CASE("reference site update leaves the exact conditional invariant") {
  const Dataset dataset = one_site_acv();
  ParameterState s = mid_state(dataset);
  const long cap = 12;

  // Enumerate the N conditional with everything else held fixed.
  std::vector<double> logw(static_cast<std::size_t>(cap) + 1);
  for (long n = 0; n <= cap; ++n) {
    s.site_abundance[0] = n;
    logw[static_cast<std::size_t>(n)] =
        site_local_logdensity(s, dataset, ModelVariant::kACV, 0);
  }
  const double shift = *std::max_element(logw.begin(), logw.end());
  std::vector<double> exact(logw.size());
  double norm = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    exact[i] = std::isfinite(logw[i]) ? std::exp(logw[i] - shift) : 0.0;
    norm += exact[i];
  }
  for (double& w : exact) w /= norm;

  s.site_abundance[0] = 3;
  RngStream rng(303, 0);
  std::vector<double> freq(exact.size(), 0.0);
  const int warm = 2000, draws = 400000;
  for (int i = 0; i < warm; ++i)
    update_site_abundance(s, dataset, ModelVariant::kACV, 0, 3, cap, rng);
  for (int i = 0; i < draws; ++i) {
    update_site_abundance(s, dataset, ModelVariant::kACV, 0, 3, cap, rng);
    freq[static_cast<std::size_t>(s.site_abundance[0])] += 1.0;
  }
  for (double& f : freq) f /= draws;
  CHECK(total_variation(freq, exact) < 0.02);
}

TEST_CASE("true-call redraw matches its conditional pmf") {
  const Dataset dataset = one_site_acv();
  ParameterState s = mid_state(dataset);
  const int v = dataset.acoustic->v(0, 1);       // 5
  const int n = dataset.validation->n(0, 1);     // 2
  const int k = dataset.validation->k(0, 1);     // 1
  const double tp = true_positive_rate(s.site_abundance[0], s.delta, s.omega);
  int k_min = -1;
  const auto pmf = true_call_conditional(v, n, k, tp, &k_min);

  RngStream rng(304, 0);
  std::vector<double> freq(pmf.size(), 0.0);
  const int draws = 300000;
  for (int i = 0; i < draws; ++i) {
    update_true_calls(s, dataset, 0, 1, rng);
    const int K = s.true_calls(0, 1);
    REQUIRE(K >= k_min);
    REQUIRE(K < k_min + static_cast<int>(pmf.size()));
    freq[static_cast<std::size_t>(K - k_min)] += 1.0;
  }
  for (double& f : freq) f /= draws;
  CHECK(total_variation(freq, pmf) < 0.01);
}

TEST_CASE("sampler matches brute-force enumeration on a grid-pinned model") {
  // Variant C, one global site, two visits; lambda on 8 atoms, p pinned.
  SurveyDesign d;
  d.num_acoustic_sites = 1;
  d.num_count_sites = 1;
  d.acoustic_surveys = 1;
  d.count_surveys = 2;
  d.site_map = {0};
  CountData cd;
  cd.c = Grid<int>(1, 2);
  cd.missing = Grid<uint8_t>(1, 2);
  cd.c(0, 0) = 2;
  cd.c(0, 1) = 1;
  const Dataset dataset =
      validate_dataset(d, std::nullopt, std::nullopt, cd, {}, ModelVariant::kC);

  const std::vector<double> lambda_grid = {0.5, 1.0, 1.5, 2.0,
                                           2.5, 3.0, 4.0, 5.0};
  const double p_atom = 0.45;
  const long cap = 8;

  // Exact joint over (lambda atom, N): uniform prior over atoms.
  std::vector<double> lambda_exact(lambda_grid.size(), 0.0);
  std::vector<double> n_exact(static_cast<std::size_t>(cap) + 1, 0.0);
  double norm = 0.0;
  for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
    for (long n = 0; n <= cap; ++n) {
      const double logw = poisson_lpmf(n, lambda_grid[li]) +
                          binomial_lpmf(2, n, p_atom) +
                          binomial_lpmf(1, n, p_atom);
      if (!std::isfinite(logw)) continue;
      const double w = std::exp(logw);
      lambda_exact[li] += w;
      n_exact[static_cast<std::size_t>(n)] += w;
      norm += w;
    }
  }
  for (double& w : lambda_exact) w /= norm;
  for (double& w : n_exact) w /= norm;

  McmcConfig config;
  config.chains = 3;
  config.iterations = 32000;
  config.burn_in = 1000;
  config.adapt = 1000;
  config.thin = 1;
  config.seed = 99;
  config.support.max_abundance = cap;
  config.support.lambda_grid = lambda_grid;
  config.support.p_grid = {p_atom};
  const ChainOutput out = run(dataset, ModelVariant::kC, config);

  std::vector<double> lambda_freq(lambda_grid.size(), 0.0);
  std::vector<double> n_freq(static_cast<std::size_t>(cap) + 1, 0.0);
  double total = 0.0;
  const int li_idx = out.parameter_index("lambda");
  const int n_idx = out.parameter_index("N[0]");
  REQUIRE(li_idx >= 0);
  REQUIRE(n_idx >= 0);
  for (const auto& chain : out.draws) {
    const auto& lam = chain[static_cast<std::size_t>(li_idx)];
    const auto& ncol = chain[static_cast<std::size_t>(n_idx)];
    for (std::size_t i = 0; i < lam.size(); ++i) {
      const auto it =
          std::find(lambda_grid.begin(), lambda_grid.end(), lam[i]);
      REQUIRE(it != lambda_grid.end());
      lambda_freq[static_cast<std::size_t>(it - lambda_grid.begin())] += 1.0;
      const long n = static_cast<long>(ncol[i]);
      REQUIRE(n >= 0);
      REQUIRE(n <= cap);
      n_freq[static_cast<std::size_t>(n)] += 1.0;
      total += 1.0;
    }
  }
  REQUIRE(total == 3.0 * 30000.0);
  for (double& f : lambda_freq) f /= total;
  for (double& f : n_freq) f /= total;

  CHECK(total_variation(lambda_freq, lambda_exact) < 0.02);
  CHECK(total_variation(n_freq, n_exact) < 0.02);
}

TEST_CASE("audited run agrees with the reference kernels") {
  auto [dataset, truth] = sim_acv(71);
  McmcConfig config = quick_config(7);
  config.audit = true;
  // audit_* throw std::logic_error on any cached-delta mismatch.
  CHECK_NOTHROW(run(dataset, ModelVariant::kACV, config));
  CHECK_NOTHROW(run(dataset, ModelVariant::kAV, config));
  CHECK_NOTHROW(run(dataset, ModelVariant::kC, config));
  CHECK_NOTHROW(run(dataset, ModelVariant::kAC, config));
}

TEST_CASE("audited log-linear run agrees with the reference kernels") {
  ScenarioSpec spec;
  spec.design.num_acoustic_sites = 5;
  spec.design.num_count_sites = 5;
  spec.design.acoustic_surveys = 3;
  spec.design.count_surveys = 2;
  spec.design.site_map = {0, 1, 2, 3, 4};
  spec.abundance.kind = AbundanceKind::kLogLinear;
  spec.abundance.beta0 = 0.8;
  spec.abundance.beta1 = 0.4;
  spec.alpha0 = -1.0;
  spec.alpha1 = 2.0;
  spec.delta = 3.0;
  spec.omega = 2.0;
  spec.p = 0.5;
  spec.validation_fraction = 0.3;
  spec.seed = 72;
  auto [dataset, truth] = simulate_complete(spec);

  McmcConfig config = quick_config(8);
  config.abundance = AbundanceKind::kLogLinear;
  config.audit = true;
  CHECK_NOTHROW(run(dataset, ModelVariant::kACV, config));
  CHECK_NOTHROW(run(dataset, ModelVariant::kAC, config));
}

TEST_CASE("runs are deterministic and worker-count independent") {
  auto [dataset, truth] = sim_acv(73);
  McmcConfig config = quick_config(9);
  config.chains = 3;
  const ChainOutput a = run(dataset, ModelVariant::kACV, config);
  const ChainOutput b = run(dataset, ModelVariant::kACV, config);
  CHECK(a.draws == b.draws);
  CHECK(a.acceptance_rates == b.acceptance_rates);
  CHECK(a.config_digest == b.config_digest);

  config.workers = 3;
  const ChainOutput c = run(dataset, ModelVariant::kACV, config);
  CHECK(a.draws == c.draws);
  CHECK(a.acceptance_rates == c.acceptance_rates);

  config.workers = 1;
  config.seed = 10;
  const ChainOutput d = run(dataset, ModelVariant::kACV, config);
  CHECK(a.draws != d.draws);
  CHECK(a.config_digest != d.config_digest);
}

TEST_CASE("chain output is shaped and labeled correctly") {
  auto [dataset, truth] = sim_acv(74);
  McmcConfig config = quick_config(11);
  config.thin = 3;  // retained = (600 - 300) / 3 = 100
  const ChainOutput out = run(dataset, ModelVariant::kACV, config);

  CHECK(out.retained_per_chain == 100);
  CHECK(out.num_scalars == 6);  // lambda, alpha0, alpha1, delta, omega, p
  const std::vector<std::string> want_scalars = {"lambda", "alpha0", "alpha1",
                                                 "delta", "omega", "p"};
  for (std::size_t i = 0; i < want_scalars.size(); ++i)
    CHECK(out.parameter_names[i] == want_scalars[i]);
  CHECK(out.parameter_names.back() == "log_density");
  // 6 active sites between the scalars and the log density.
  CHECK(out.parameter_names.size() == 6 + 6 + 1);
  CHECK(out.parameter_names[6] == "N[0]");

  REQUIRE(out.draws.size() == 2);
  for (const auto& chain : out.draws) {
    REQUIRE(chain.size() == out.parameter_names.size());
    for (const auto& series : chain)
      CHECK(series.size() == 100);
  }

  // Acceptance rates are per scalar plus one pooled N block, in [0, 1].
  REQUIRE(out.block_names.size() == 7);
  CHECK(out.block_names.back() == "N");
  for (const auto& chain_rates : out.acceptance_rates) {
    REQUIRE(chain_rates.size() == 7);
    for (double r : chain_rates) {
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
    }
  }

  // Retained log densities must be the posterior at the retained state.
  const auto ld = out.parameter_chains("log_density");
  for (const auto& chain : ld)
    for (double v : chain) CHECK(std::isfinite(v));

  CHECK(out.parameter_index("nope") == -1);
  CHECK_THROWS_AS(out.parameter_chains("nope"), ConfigError);
}

TEST_CASE("variant scalar lists") {
  using S = ScalarId;
  CHECK(sampled_scalars(ModelVariant::kC, AbundanceKind::kConstant) ==
        std::vector<S>{S::kLambda, S::kP});
  CHECK(sampled_scalars(ModelVariant::kAV, AbundanceKind::kConstant) ==
        std::vector<S>{S::kLambda, S::kAlpha0, S::kAlpha1, S::kDelta,
                       S::kOmega});
  CHECK(sampled_scalars(ModelVariant::kAC, AbundanceKind::kConstant) ==
        std::vector<S>{S::kLambda, S::kAlpha0, S::kAlpha1, S::kDelta,
                       S::kOmega, S::kP});
  CHECK(sampled_scalars(ModelVariant::kACV, AbundanceKind::kConstant) ==
        sampled_scalars(ModelVariant::kAC, AbundanceKind::kConstant));
  CHECK(sampled_scalars(ModelVariant::kC, AbundanceKind::kLogLinear) ==
        std::vector<S>{S::kBeta0, S::kBeta1, S::kP});
  for (S s : sampled_scalars(ModelVariant::kACV, AbundanceKind::kLogLinear))
    CHECK(s != S::kLambda);
}

TEST_CASE("initialization respects data floors and is finite") {
  auto [dataset, truth] = sim_acv(75);
  McmcConfig config = quick_config(12);
  RngStream rng(500, 0);
  const ParameterState s =
      initialize(dataset, ModelVariant::kACV, config, rng);

  CHECK(posterior_logdensity(s, dataset, ModelVariant::kACV, config.priors)
            .finite());
  for (int g = 0; g < dataset.design.num_acoustic_sites; ++g) {
    for (int j = 0; j < dataset.design.acoustic_surveys; ++j) {
      if (dataset.acoustic->y(g, j))
        CHECK(s.site_abundance[static_cast<std::size_t>(g)] >= 1);
      const int n = dataset.validation->n(g, j);
      if (n > 0) {
        CHECK(s.true_calls(g, j) >= dataset.validation->k(g, j));
        CHECK(s.true_calls(g, j) <=
              dataset.acoustic->v(g, j) - (n - dataset.validation->k(g, j)));
      }
    }
  }
  for (int i = 0; i < dataset.design.num_count_sites; ++i) {
    const int g = dataset.design.site_map[static_cast<std::size_t>(i)];
    for (int t = 0; t < dataset.design.count_surveys; ++t)
      CHECK(s.site_abundance[static_cast<std::size_t>(g)] >=
            dataset.counts->c(i, t));
  }
}

TEST_CASE("initialization reports the impossible component") {
  // A verified true call with delta pinned to zero: the validation term can
  // never be finite, so initialization must fail and say why.
  const Dataset dataset = one_site_acv();
  McmcConfig config = quick_config(13);
  config.support.delta_grid = {0.0};
  RngStream rng(501, 0);
  try {
    initialize(dataset, ModelVariant::kACV, config, rng);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    const std::string what = e.what();
    CHECK(what.find("validation") != std::string::npos);
  }
}

TEST_CASE("initialization draws inside narrow prior boxes") {
  auto [dataset, truth] = sim_acv(76);
  McmcConfig config = quick_config(14);
  config.priors.lambda_min = 0.5;
  config.priors.lambda_max = 6.0;
  config.priors.delta_min = 1.0;
  config.priors.delta_max = 8.0;
  config.priors.omega_min = 0.5;
  config.priors.omega_max = 6.0;
  config.priors.p_min = 0.2;
  config.priors.p_max = 0.8;
  config.priors.alpha0_min = -3.0;
  config.priors.alpha0_max = -1.0;
  config.priors.alpha1_min = 0.5;
  config.priors.alpha1_max = 4.0;
  RngStream rng(502, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const ParameterState s =
        initialize(dataset, ModelVariant::kACV, config, rng);
    CHECK(s.abundance.lambda >= 0.5);
    CHECK(s.abundance.lambda <= 6.0);
    CHECK(s.delta >= 1.0);
    CHECK(s.delta <= 8.0);
    CHECK(s.omega >= 0.5);
    CHECK(s.omega <= 6.0);
    CHECK(s.p >= 0.2);
    CHECK(s.p <= 0.8);
    CHECK(s.alpha0 >= -3.0);
    CHECK(s.alpha0 <= -1.0);
    CHECK(s.alpha1 >= 0.5);
    CHECK(s.alpha1 <= 4.0);
    CHECK(logprior(s, ModelVariant::kACV, config.priors).finite());
  }
}

TEST_CASE("config validation") {
  McmcConfig config = quick_config(15);
  CHECK_NOTHROW(config.validate());
  CHECK(config.retained_per_chain() == 300);

  config.thin = 4;
  CHECK(config.retained_per_chain() == 75);

  config = quick_config(15);
  config.chains = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = quick_config(15);
  config.burn_in = 400;
  config.adapt = 300;  // burn + adapt >= iterations
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = quick_config(15);
  config.thin = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = quick_config(15);
  config.target_accept = 1.5;
  CHECK_THROWS_AS(config.validate(), ConfigError);

  config = quick_config(15);
  config.burn_in = -1;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("run validates the dataset against the variant") {
  // A counts-only dataset cannot serve acoustic variants.
  SurveyDesign d;
  d.num_acoustic_sites = 1;
  d.num_count_sites = 1;
  d.acoustic_surveys = 1;
  d.count_surveys = 2;
  d.site_map = {0};
  CountData cd;
  cd.c = Grid<int>(1, 2);
  cd.missing = Grid<uint8_t>(1, 2);
  const Dataset dataset =
      validate_dataset(d, std::nullopt, std::nullopt, cd, {}, ModelVariant::kC);
  McmcConfig config = quick_config(16);
  CHECK_THROWS_AS(run(dataset, ModelVariant::kACV, config),
                  ValidationError);

  // Log-linear abundance needs a covariate.
  config.abundance = AbundanceKind::kLogLinear;
  CHECK_THROWS_AS(run(dataset, ModelVariant::kC, config), ConfigError);
}

TEST_CASE("short integrated fit recovers sane posteriors") {
  auto [dataset, truth] = sim_acv(77, 10);
  McmcConfig config;
  config.chains = 2;
  config.iterations = 2000;
  config.burn_in = 400;
  config.adapt = 600;
  config.thin = 2;
  config.seed = 21;
  const ChainOutput out = run(dataset, ModelVariant::kACV, config);
  const PosteriorSummary lam = summarize(out.parameter_chains("lambda"));
  CHECK(std::isfinite(lam.median));
  CHECK(lam.ci_lower < lam.median);
  CHECK(lam.median < lam.ci_upper);
  CHECK(lam.median > 0.2);
  CHECK(lam.median < 10.0);
  CHECK(lam.ess > 20.0);
}

}  // TEST_SUITE("mcmc")
