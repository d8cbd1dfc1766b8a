#pragma once

#include <span>
#include <vector>

namespace chorus {

struct PosteriorSummary {
  double median = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double ci_width = 0.0;
  double rhat = 1.0;
  double ess = 0.0;
  // Set when rhat could not be computed normally: single chain, or zero
  // within-chain variance.
  bool degenerate = false;
};

struct RhatResult {
  double value = 1.0;
  bool degenerate = false;
};

// Classic Gelman-Rubin potential scale reduction,
// sqrt(((n-1)/n * W + B/n) / W), clamped up to 1.0 (sampling noise can push
// the raw value slightly below 1). Zero within-chain variance is flagged:
// identical constant chains give 1.0, separated constant chains +inf.
// Requires >= 2 chains with >= 4 draws each.
RhatResult rhat(std::span<const std::vector<double>> chains);

// Linear-interpolation quantile (the common "type 7" convention) of already
// sorted values; q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);
// Convenience: copies and sorts.
double quantile(std::vector<double> values, double q);

// Effective sample size across chains: per-chain initial-monotone-sequence
// autocorrelation truncation, summed. Informational, never gating.
double effective_sample_size(std::span<const std::vector<double>> chains);

// Pooled {0.025, 0.5, 0.975} quantiles plus rhat and ess.
PosteriorSummary summarize(std::span<const std::vector<double>> chains);

// (estimate - truth)/truth in percent. truth = 0 is undefined: returns the
// absolute difference and sets *absolute when provided.
double relative_bias_pct(double estimate, double truth,
                         bool* absolute = nullptr);

// True iff every summary's rhat is below the threshold.
bool converged(std::span<const PosteriorSummary> summaries,
               double threshold = 1.1);

}  // namespace chorus
