#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "chorus/diagnostics.hpp"
#include "chorus/mcmc.hpp"
#include "chorus/types.hpp"

namespace chorus {

// One model fit inside a simulation study.
struct FitRecord {
  int scenario = 0;  // grid index, or point-count subset size for the sweep
  std::string scenario_label;
  std::string variant;
  int replicate = 0;
  bool failed = false;      // fit threw; summaries are empty
  bool converged = false;   // every scalar R-hat below the threshold
  double wall_seconds = 0.0;
  uint64_t data_digest = 0;  // fingerprint of the fitted dataset
  std::map<std::string, PosteriorSummary> summaries;
  std::map<std::string, double> truth;
  std::string error;
};

struct StudyOptions {
  int replicates = 25;
  std::vector<ModelVariant> variants = {ModelVariant::kAV, ModelVariant::kC,
                                        ModelVariant::kAC, ModelVariant::kACV};
  McmcConfig mcmc;  // per-fit template; seed and abundance kind are derived
  uint64_t master_seed = 0;
  std::vector<int> scenario_indices;  // grid scenarios; empty means all
  int shard_index = 0;   // this process runs replicates r with
  int shard_count = 1;   // r % shard_count == shard_index
  int workers = 1;       // concurrent fits (chains inside a fit stay serial)
  std::function<void(const FitRecord&)> on_fit;  // called as fits finish
  std::vector<FitRecord> completed;  // prior results to keep and skip (resume)
};

// R-hat cutoff used to call a fit converged.
inline constexpr double kConvergedRhat = 1.1;

// Stable derived seed for a labeled sub-experiment, independent of execution
// order. Datasets depend on (scenario, replicate) only so every variant fits
// the same realization.
uint64_t sub_seed(uint64_t master, std::string_view label, uint64_t a = 0,
                  uint64_t b = 0, uint64_t c = 0);

// Fits one dataset and reduces the chains to summaries. Exceptions from the
// sampler become a failed record rather than propagating.
FitRecord fit_one(const Dataset& dataset, ModelVariant variant,
                  const McmcConfig& config, int scenario,
                  std::string scenario_label, int replicate,
                  std::map<std::string, double> truth);

// Factorial scenario study: replicates x variants over the scenario grid.
std::vector<FitRecord> run_grid_study(const StudyOptions& options);

// Point-count dilution sweep: one full dataset per replicate, counts
// restricted to random subsets of each size, AC fits with log-linear
// abundance. FitRecord.scenario holds the subset size.
std::vector<FitRecord> run_pointcount_sweep(const StudyOptions& options);

// Canonical ordering: scenario, then variant (AV, C, AC, ACV), replicate.
void sort_fits(std::vector<FitRecord>& fits);

// Union of two result sets with exact-key duplicates dropped, sorted.
std::vector<FitRecord> merge_fits(std::vector<FitRecord> a,
                                  const std::vector<FitRecord>& b);

// Per (scenario, variant, parameter) reduction over replicates. Bias,
// width, and coverage are computed over converged fits only; the converged
// fraction is over all non-failed-plus-failed fits.
struct AggregateRow {
  int scenario = 0;
  std::string scenario_label;
  std::string variant;
  std::string parameter;
  int fits = 0;
  int converged_fits = 0;
  double converged_fraction = 0.0;
  double median_bias = std::numeric_limits<double>::quiet_NaN();
  bool bias_is_absolute = false;  // truth was 0; bias is estimate - truth
  double median_ci_width = std::numeric_limits<double>::quiet_NaN();
  double coverage = std::numeric_limits<double>::quiet_NaN();
};

std::vector<AggregateRow> aggregate(const std::vector<FitRecord>& fits);

}  // namespace chorus
