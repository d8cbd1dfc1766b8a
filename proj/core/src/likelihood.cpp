#include "chorus/likelihood.hpp"

#include <cmath>

#include "chorus/logpmf.hpp"

namespace chorus {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log density of U(min, max) at x: -log(width) inside, -inf outside.
double uniform_lpdf(double x, double min, double max) {
  if (x < min || x > max || !(max > min)) return kNegInf;
  return -std::log(max - min);
}

// Gaussian truncated to [min, max]; unnormalized (constant offset).
double truncated_normal_lpdf(double x, double mean, double variance,
                             double min, double max) {
  if (x < min || x > max) return kNegInf;
  return normal_lpdf(x, mean, variance);
}

}  // namespace

LogDensity loglik_abundance(std::span<const long> N,
                            const AbundanceModel& abundance) {
  LogDensity total;
  for (std::size_t g = 0; g < N.size(); ++g) {
    const double mean = abundance.mean_at(static_cast<int>(g));
    if (!std::isfinite(mean)) return LogDensity(kNegInf);
    total += poisson_lpmf(N[g], mean);
  }
  return total;
}

LogDensity loglik_abundance(std::span<const long> N,
                            const AbundanceModel& abundance,
                            std::span<const int> sites) {
  LogDensity total;
  for (int g : sites) {
    const double mean = abundance.mean_at(g);
    if (!std::isfinite(mean)) return LogDensity(kNegInf);
    total += poisson_lpmf(N[g], mean);
  }
  return total;
}

LogDensity loglik_acoustic_binary(const AcousticData& acoustic,
                                  std::span<const long> N, double alpha0,
                                  double alpha1) {
  LogDensity total;
  for (int i = 0; i < acoustic.y.rows(); ++i) {
    const double logit_pi = alpha0 + alpha1 * static_cast<double>(N[i]);
    for (int j = 0; j < acoustic.y.cols(); ++j) {
      if (acoustic.missing(i, j)) continue;
      total += log_inv_logit(acoustic.y(i, j) ? logit_pi : -logit_pi);
    }
  }
  return total;
}

LogDensity loglik_vocalizations(const AcousticData& acoustic,
                                std::span<const long> N, double delta,
                                double omega) {
  LogDensity total;
  for (int i = 0; i < acoustic.v.rows(); ++i) {
    const double rate = delta * static_cast<double>(N[i]) + omega;
    for (int j = 0; j < acoustic.v.cols(); ++j) {
      if (acoustic.missing(i, j) || !acoustic.y(i, j)) continue;
      total += poisson_lpmf(acoustic.v(i, j), rate);
      if (!total.finite()) return total;
    }
  }
  return total;
}

LogDensity loglik_validation(const ValidationData& validation,
                             const AcousticData& acoustic,
                             const Grid<int>& true_calls,
                             std::span<const long> N, double delta,
                             double omega) {
  LogDensity total;
  for (int i = 0; i < validation.n.rows(); ++i) {
    const double tp = true_positive_rate(N[i], delta, omega);
    for (int j = 0; j < validation.n.cols(); ++j) {
      if (acoustic.missing(i, j)) continue;
      const int n = validation.n(i, j);
      if (n == 0) continue;
      const int v = acoustic.v(i, j);
      const int K = true_calls(i, j);
      total += binomial_lpmf(K, v, tp);
      total += hypergeometric_lpmf(validation.k(i, j), K, v - K, n);
      if (!total.finite()) return total;
    }
  }
  return total;
}

LogDensity loglik_counts(const CountData& counts, std::span<const long> N,
                         double p, std::span<const int> site_map) {
  LogDensity total;
  for (int i = 0; i < counts.c.rows(); ++i) {
    const long trials = N[site_map[i]];
    for (int t = 0; t < counts.c.cols(); ++t) {
      if (counts.missing(i, t)) continue;
      total += binomial_lpmf(counts.c(i, t), trials, p);
      if (!total.finite()) return total;
    }
  }
  return total;
}

LogDensity logprior(const ParameterState& state, ModelVariant variant,
                    const Priors& priors) {
  LogDensity total;
  if (variant_uses_acoustic(variant)) {
    total += truncated_normal_lpdf(state.alpha0, priors.alpha0_mean,
                                   priors.alpha0_variance, priors.alpha0_min,
                                   priors.alpha0_max);
    total += uniform_lpdf(state.alpha1, priors.alpha1_min, priors.alpha1_max);
    total += uniform_lpdf(state.delta, priors.delta_min, priors.delta_max);
    total += uniform_lpdf(state.omega, priors.omega_min, priors.omega_max);
  }
  if (variant_uses_counts(variant))
    total += uniform_lpdf(state.p, priors.p_min, priors.p_max);
  if (state.abundance.kind == AbundanceKind::kConstant) {
    total += uniform_lpdf(state.abundance.lambda, priors.lambda_min,
                          priors.lambda_max);
  } else {
    total += truncated_normal_lpdf(state.abundance.beta0, priors.beta_mean,
                                   priors.beta_variance, priors.beta_min,
                                   priors.beta_max);
    total += truncated_normal_lpdf(state.abundance.beta1, priors.beta_mean,
                                   priors.beta_variance, priors.beta_min,
                                   priors.beta_max);
  }
  return total;
}

LogDensity joint_loglik(const ParameterState& state, const Dataset& dataset,
                        ModelVariant variant) {
  LogDensity total;
  const auto sites = active_sites(dataset.design, variant);
  total += loglik_abundance(state.site_abundance, state.abundance, sites);
  if (!total.finite()) return total;
  if (variant_uses_acoustic(variant)) {
    total += loglik_acoustic_binary(*dataset.acoustic, state.site_abundance,
                                    state.alpha0, state.alpha1);
    total += loglik_vocalizations(*dataset.acoustic, state.site_abundance,
                                  state.delta, state.omega);
    if (!total.finite()) return total;
  }
  if (variant_uses_validation(variant)) {
    total += loglik_validation(*dataset.validation, *dataset.acoustic,
                               state.true_calls, state.site_abundance,
                               state.delta, state.omega);
    if (!total.finite()) return total;
  }
  if (variant_uses_counts(variant)) {
    total += loglik_counts(*dataset.counts, state.site_abundance, state.p,
                           dataset.design.site_map);
  }
  return total;
}

LogDensity posterior_logdensity(const ParameterState& state,
                                const Dataset& dataset, ModelVariant variant,
                                const Priors& priors) {
  LogDensity total = logprior(state, variant, priors);
  if (!total.finite()) return total;
  total += joint_loglik(state, dataset, variant);
  return total;
}

}  // namespace chorus
