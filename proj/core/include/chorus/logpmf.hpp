#pragma once

#include <cstdint>

namespace chorus {

// Log-density kernels. All functions return -inf (never NaN) outside the
// support, so callers can sum terms and test once for finiteness.

// log(x!) for x >= 0; cached for small x, lgamma beyond the cache.
double log_factorial(int64_t x);

// log C(n, k); -inf when k < 0 or k > n.
double log_choose(int64_t n, int64_t k);

// P(X = x) for X ~ Poisson(mean). mean == 0 concentrates at x == 0.
double poisson_lpmf(int64_t x, double mean);

// P(X = x) for X ~ Binomial(trials, prob).
double binomial_lpmf(int64_t x, int64_t trials, double prob);

// P(X = x) where x items of the `true_pool` appear in a uniform sample of
// `draws` from true_pool + false_pool items.
double hypergeometric_lpmf(int64_t x, int64_t true_pool, int64_t false_pool,
                           int64_t draws);

// Gaussian log-density parameterized by variance.
double normal_lpdf(double x, double mean, double variance);

// Stable logistic helpers.
double inv_logit(double x);
double logit(double p);
// log(inv_logit(x)), stable for large |x|.
double log_inv_logit(double x);

}  // namespace chorus
