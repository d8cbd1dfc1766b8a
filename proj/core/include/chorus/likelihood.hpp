#pragma once

#include <limits>
#include <span>

#include "chorus/types.hpp"

namespace chorus {

// Natural-log density accumulator. -inf marks a hard support violation and
// absorbs every later term; NaN is a kernel bug, not a value.
struct LogDensity {
  double value = 0.0;

  LogDensity() = default;
  LogDensity(double v) : value(v) { assert(!(v != v)); }

  LogDensity& operator+=(double term) {
    assert(!(term != term));
    if (value == -std::numeric_limits<double>::infinity()) return *this;
    value += term;
    return *this;
  }
  LogDensity& operator+=(LogDensity other) { return *this += other.value; }

  bool finite() const {
    return value > -std::numeric_limits<double>::infinity();
  }
};

// Prior hyperparameters. Defaults: U(0, 1000) for delta, omega, lambda,
// alpha1; U(0, 1) for p; N(0, variance 100) for alpha0 and both betas.
// The min/max windows on the Gaussians truncate without renormalizing
// (constant factor, irrelevant to sampling); calibration runs narrow every
// window so the fitted prior equals the truth-drawing distribution.
struct Priors {
  double delta_min = 0.0, delta_max = 1000.0;
  double omega_min = 0.0, omega_max = 1000.0;
  double lambda_min = 0.0, lambda_max = 1000.0;
  double alpha1_min = 0.0, alpha1_max = 1000.0;
  double p_min = 0.0, p_max = 1.0;
  double alpha0_mean = 0.0, alpha0_variance = 100.0;
  double alpha0_min = -std::numeric_limits<double>::infinity();
  double alpha0_max = std::numeric_limits<double>::infinity();
  double beta_mean = 0.0, beta_variance = 100.0;
  double beta_min = -std::numeric_limits<double>::infinity();
  double beta_max = std::numeric_limits<double>::infinity();
};

// Poisson abundance term over all sites of N (global indices 0..size-1).
LogDensity loglik_abundance(std::span<const long> N,
                            const AbundanceModel& abundance);
// Same, restricted to the given global sites.
LogDensity loglik_abundance(std::span<const long> N,
                            const AbundanceModel& abundance,
                            std::span<const int> sites);

// Bernoulli detection term over unmasked acoustic cells.
LogDensity loglik_acoustic_binary(const AcousticData& acoustic,
                                  std::span<const long> N, double alpha0,
                                  double alpha1);

// Poisson vocalization term; cells with y = 0 contribute 0 (their v is 0 by
// dataset invariant). y = 1 with rate 0 and v > 0 is a support violation.
LogDensity loglik_vocalizations(const AcousticData& acoustic,
                                std::span<const long> N, double delta,
                                double omega);

// Latent-truth and verification terms over unmasked cells with n > 0:
// Binomial(K | v, tp) + Hypergeometric(k | K true, v-K false, n drawn).
// Cells with n = 0 contribute exactly 1 once K is marginalized (the Binomial
// normalizes), so they are skipped; the sampler does not carry K there.
LogDensity loglik_validation(const ValidationData& validation,
                             const AcousticData& acoustic,
                             const Grid<int>& true_calls,
                             std::span<const long> N, double delta,
                             double omega);

// Binomial point-count term over unmasked cells; c > N yields -inf.
LogDensity loglik_counts(const CountData& counts, std::span<const long> N,
                         double p, std::span<const int> site_map);

// Log prior over the scalars the variant actually samples.
LogDensity logprior(const ParameterState& state, ModelVariant variant,
                    const Priors& priors);

// Sum of the variant's active component log-likelihoods. The abundance term
// covers active_sites(design, variant).
LogDensity joint_loglik(const ParameterState& state, const Dataset& dataset,
                        ModelVariant variant);

LogDensity posterior_logdensity(const ParameterState& state,
                                const Dataset& dataset, ModelVariant variant,
                                const Priors& priors);

}  // namespace chorus
