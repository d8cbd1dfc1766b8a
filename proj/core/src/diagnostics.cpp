#include "chorus/diagnostics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "chorus/types.hpp"

namespace chorus {

namespace {

double mean_of(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Unbiased sample variance (n-1 denominator).
double variance_of(std::span<const double> xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

RhatResult rhat(std::span<const std::vector<double>> chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw ConfigError("rhat requires at least 2 chains");
  const std::size_t n = chains[0].size();
  if (n < 4) throw ConfigError("rhat requires at least 4 draws per chain");
  for (const auto& chain : chains)
    if (chain.size() != n)
      throw ConfigError("rhat requires equal-length chains");

  double within = 0.0;
  std::vector<double> means(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean_of(chains[j]);
    within += variance_of(chains[j], means[j]);
  }
  within /= static_cast<double>(m);
  const double grand = mean_of(means);
  // B/n = variance of the chain means (m-1 denominator).
  const double between_over_n = variance_of(means, grand);

  if (within <= 0.0) {
    if (between_over_n <= 0.0) return {1.0, true};
    return {std::numeric_limits<double>::infinity(), true};
  }
  const double nd = static_cast<double>(n);
  const double pooled = (nd - 1.0) / nd * within + between_over_n;
  return {std::max(1.0, std::sqrt(pooled / within)), false};
}

double quantile_sorted(std::span<const double> sorted, double q) {
  assert(!sorted.empty());
  assert(q >= 0.0 && q <= 1.0);
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

namespace {

// Geyer initial-monotone-sequence variance estimate for one chain; returns
// the effective sample size contribution.
double chain_ess(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = mean_of(chain);
  // Biased (1/n) autocovariances, conventional for this estimator.
  auto gamma = [&](std::size_t lag) {
    double sum = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i)
      sum += (chain[i] - mean) * (chain[i + lag] - mean);
    return sum / static_cast<double>(n);
  };
  const double g0 = gamma(0);
  if (g0 <= 0.0) return static_cast<double>(n);  // constant chain

  double sigma2 = -g0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    double pair = gamma(lag) + gamma(lag + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // enforce monotone decrease
    sigma2 += 2.0 * pair;
    prev_pair = pair;
  }
  if (sigma2 <= 0.0) return static_cast<double>(n);
  return static_cast<double>(n) * g0 / sigma2;
}

}  // namespace

double effective_sample_size(std::span<const std::vector<double>> chains) {
  double total = 0.0;
  for (const auto& chain : chains) total += chain_ess(chain);
  return total;
}

PosteriorSummary summarize(std::span<const std::vector<double>> chains) {
  std::size_t total = 0;
  for (const auto& chain : chains) total += chain.size();
  if (total == 0) throw ConfigError("summarize requires draws");

  std::vector<double> pooled;
  pooled.reserve(total);
  for (const auto& chain : chains)
    pooled.insert(pooled.end(), chain.begin(), chain.end());
  std::sort(pooled.begin(), pooled.end());

  PosteriorSummary summary;
  summary.ci_lower = quantile_sorted(pooled, 0.025);
  summary.median = quantile_sorted(pooled, 0.5);
  summary.ci_upper = quantile_sorted(pooled, 0.975);
  summary.ci_width = summary.ci_upper - summary.ci_lower;
  summary.ess = effective_sample_size(chains);
  if (chains.size() >= 2 && chains[0].size() >= 4) {
    const RhatResult r = rhat(chains);
    summary.rhat = r.value;
    summary.degenerate = r.degenerate;
  } else {
    summary.rhat = 1.0;
    summary.degenerate = true;
  }
  return summary;
}

double relative_bias_pct(double estimate, double truth, bool* absolute) {
  if (truth == 0.0) {
    if (absolute) *absolute = true;
    return estimate - truth;
  }
  if (absolute) *absolute = false;
  return (estimate - truth) / truth * 100.0;
}

bool converged(std::span<const PosteriorSummary> summaries, double threshold) {
  for (const auto& summary : summaries)
    if (!(summary.rhat < threshold)) return false;
  return true;
}

}  // namespace chorus
