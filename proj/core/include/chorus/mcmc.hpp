#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "chorus/likelihood.hpp"
#include "chorus/rng.hpp"
#include "chorus/types.hpp"

namespace chorus {

// Finite-support test harness. A positive max_abundance truncates the latent
// N walk; a non-empty grid pins that scalar to the listed values, proposed
// uniformly over the other atoms. This makes the sampler's state space
// exactly enumerable so marginal posteriors can be checked against
// brute-force oracles. Production runs leave everything empty.
struct SupportConstraints {
  long max_abundance = -1;  // < 0: unbounded
  std::vector<double> lambda_grid;
  std::vector<double> beta0_grid;
  std::vector<double> beta1_grid;
  std::vector<double> alpha0_grid;
  std::vector<double> alpha1_grid;
  std::vector<double> delta_grid;
  std::vector<double> omega_grid;
  std::vector<double> p_grid;
};

struct McmcConfig {
  int chains = 3;
  int iterations = 10000;
  int burn_in = 3000;
  int adapt = 5000;
  int thin = 2;
  uint64_t seed = 0;
  double target_accept = 0.44;
  int workers = 1;  // chains run in parallel up to this many threads
  AbundanceKind abundance = AbundanceKind::kConstant;
  Priors priors;
  SupportConstraints support;
  // Cross-checks every incremental proposal delta against the cache-free
  // reference kernels; for tests, far too slow for production.
  bool audit = false;
  // Invoked every few hundred iterations per chain; must be thread-safe
  // when workers > 1.
  std::function<void(int chain, int iteration, double log_density)> progress;

  void validate() const;
  // Retained draws per chain: floor((iterations - burn_in - adapt) / thin).
  // Adaptation runs over the first `adapt` iterations; proposal scales are
  // frozen afterwards, and retention starts at burn_in + adapt.
  int retained_per_chain() const;
};

struct ChainOutput {
  // Scalar parameters first, then latent "N[g]" per active global site,
  // then "log_density" (joint posterior at the retained state).
  std::vector<std::string> parameter_names;
  int num_scalars = 0;
  // draws[chain][parameter][draw index]
  std::vector<std::vector<std::vector<double>>> draws;
  // Metropolis blocks: every scalar plus pooled "N"; rates counted after
  // the adaptation window.
  std::vector<std::string> block_names;
  std::vector<std::vector<double>> acceptance_rates;  // [chain][block]
  uint64_t config_digest = 0;
  uint64_t seed = 0;
  int iterations = 0;
  int burn_in = 0;
  int adapt = 0;
  int thin = 0;
  int retained_per_chain = 0;

  int parameter_index(std::string_view name) const;  // -1 when absent
  // Per-chain draw sequences for one parameter.
  std::vector<std::vector<double>> parameter_chains(
      std::string_view name) const;
};

// Multi-chain Metropolis-within-Gibbs. Sweep order per iteration: latent N
// per active site, latent K per validated cell (when the variant uses
// validation), then each scalar. Deterministic for fixed (seed, config,
// dataset) regardless of worker scheduling.
ChainOutput run(const Dataset& dataset, ModelVariant variant,
                const McmcConfig& config);

// Data-informed start: N from observed maxima, K from verified counts plus
// half the unchecked calls, scalars drawn from moderate ranges until the
// joint density is finite (<= 1000 attempts, then ConvergenceError naming
// the offending component).
ParameterState initialize(const Dataset& dataset, ModelVariant variant,
                          const McmcConfig& config, RngStream& rng);

// Full-conditional pmf of one cell's latent true-call count K given
// (v, n, k) and the site's true-positive rate. Support is K in
// [k, v - (n - k)]; *k_min receives the lower end; probabilities are
// normalized.
std::vector<double> true_call_conditional(int v, int n, int k, double tp,
                                          int* k_min);

// One Metropolis step on a single site's latent N (cache-free reference
// path): symmetric walk N' = N +/- u, u uniform on {1..walk_width}. Returns
// whether the proposal was accepted. max_abundance < 0 means unbounded.
bool update_site_abundance(ParameterState& state, const Dataset& dataset,
                           ModelVariant variant, int global_site,
                           int walk_width, long max_abundance,
                           RngStream& rng);

// Exact conditional redraw of one validated cell's K (reference path).
void update_true_calls(ParameterState& state, const Dataset& dataset,
                       int site, int survey, RngStream& rng);

enum class ScalarId {
  kLambda,
  kBeta0,
  kBeta1,
  kAlpha0,
  kAlpha1,
  kDelta,
  kOmega,
  kP
};

// Cache-free local log densities: every posterior term involving the block,
// recomputed from scratch. A block's Metropolis ratio computed from these
// must equal the full posterior-density difference (the engine's
// incremental deltas are audited against them).
double site_local_logdensity(const ParameterState& state,
                             const Dataset& dataset, ModelVariant variant,
                             int global_site);
double scalar_local_logdensity(const ParameterState& state,
                               const Dataset& dataset, ModelVariant variant,
                               const Priors& priors, ScalarId scalar);

// Scalars the engine samples for a variant/abundance-kind combination, in
// sweep (and output) order.
std::vector<ScalarId> sampled_scalars(ModelVariant variant,
                                      AbundanceKind abundance);
std::string_view scalar_name(ScalarId scalar);

}  // namespace chorus
