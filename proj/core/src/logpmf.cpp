#include "chorus/logpmf.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace chorus {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int64_t kFactCacheSize = 131072;

// Each entry comes straight from lgamma; accumulating log(k) instead would
// drift by ~1e-8 over the table and is not acceptable for exact-pmf tests.
const std::vector<double>& factorial_cache() {
  static const std::vector<double> cache = [] {
    std::vector<double> c(kFactCacheSize);
    for (int64_t i = 0; i < kFactCacheSize; ++i)
      c[i] = std::lgamma(static_cast<double>(i) + 1.0);
    return c;
  }();
  return cache;
}

}  // namespace

double log_factorial(int64_t x) {
  if (x < 0) return kNegInf;
  if (x < kFactCacheSize) return factorial_cache()[static_cast<size_t>(x)];
  return std::lgamma(static_cast<double>(x) + 1.0);
}

double log_choose(int64_t n, int64_t k) {
  if (k < 0 || k > n || n < 0) return kNegInf;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double poisson_lpmf(int64_t x, double mean) {
  if (x < 0 || mean < 0.0 || std::isnan(mean)) return kNegInf;
  if (mean == 0.0) return x == 0 ? 0.0 : kNegInf;
  return static_cast<double>(x) * std::log(mean) - mean - log_factorial(x);
}

double binomial_lpmf(int64_t x, int64_t trials, double prob) {
  if (x < 0 || x > trials || trials < 0 || std::isnan(prob)) return kNegInf;
  if (prob <= 0.0) return x == 0 ? (prob == 0.0 ? 0.0 : kNegInf) : kNegInf;
  if (prob >= 1.0) return x == trials ? (prob == 1.0 ? 0.0 : kNegInf) : kNegInf;
  return log_choose(trials, x) + static_cast<double>(x) * std::log(prob) +
         static_cast<double>(trials - x) * std::log1p(-prob);
}

double hypergeometric_lpmf(int64_t x, int64_t true_pool, int64_t false_pool,
                           int64_t draws) {
  if (true_pool < 0 || false_pool < 0 || draws < 0 ||
      draws > true_pool + false_pool)
    return kNegInf;
  if (x < 0 || x > true_pool || x > draws || draws - x > false_pool)
    return kNegInf;
  return log_choose(true_pool, x) + log_choose(false_pool, draws - x) -
         log_choose(true_pool + false_pool, draws);
}

double normal_lpdf(double x, double mean, double variance) {
  if (!(variance > 0.0)) return kNegInf;
  const double z = x - mean;
  return -0.5 * (std::log(2.0 * M_PI * variance) + z * z / variance);
}

double inv_logit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double log_inv_logit(double x) {
  // -log(1 + exp(-x)) without overflow on either tail.
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

}  // namespace chorus
