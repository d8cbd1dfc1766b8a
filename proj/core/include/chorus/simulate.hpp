#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "chorus/rng.hpp"
#include "chorus/types.hpp"

namespace chorus {

// Everything needed to generate one synthetic dataset.
struct ScenarioSpec {
  SurveyDesign design;
  AbundanceModel abundance;
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double delta = 0.0;
  double omega = 0.0;
  double p = 0.5;
  double validation_fraction = 0.0;
  uint64_t seed = 0;

  void validate() const;
};

// Generating values kept for scoring: latent abundance, the true/false call
// decomposition behind each v, and the parameters that produced the data.
struct TruthRecord {
  std::vector<long> site_abundance;
  Grid<int> true_calls;   // K per acoustic cell
  Grid<int> false_calls;  // F per acoustic cell; v = K + F
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double delta = 0.0;
  double omega = 0.0;
  double p = 0.5;
  AbundanceModel abundance;  // covariate filled when drawn here
};

// Draws one dataset (acoustic + counts, no validation block yet) under the
// generative model. A log-linear abundance spec with an empty covariate gets
// X drawn standard-normal per site; the draw is stored in both outputs.
// Per-site RNG streams make output independent of site evaluation order.
std::pair<Dataset, TruthRecord> simulate(const ScenarioSpec& spec);

// Manual-verification subsample: n = round-half-even(fraction * v) per
// unmasked cell, k hypergeometric from the cell's true/false pool.
ValidationData simulate_validation(const Dataset& dataset,
                                   const TruthRecord& truth, double fraction,
                                   RngStream& rng);

// simulate() plus an attached validation block drawn at the spec's fraction.
std::pair<Dataset, TruthRecord> simulate_complete(const ScenarioSpec& spec);

// The 48-cell factorial: {50,100 sites} x {R=I, R=I/2, R/2=I} x {T=3,5}
// x {alpha1=1.2,3} x {lambda=0.5,3}; J=10, delta=4, omega=3, alpha0=-2.19,
// 20% validation, p = inverse-logit(alpha0 + alpha1). Seeds left 0 for the
// harness to assign per replicate.
std::vector<ScenarioSpec> scenario_grid();

// Human-readable factor values of one grid cell, e.g. for CSV labels.
struct GridCellLabel {
  int total_sites;
  int num_acoustic;
  int num_count;
  int count_surveys;
  double alpha1;
  double lambda;
};
GridCellLabel grid_cell_label(int index);

// Covariate experiment: R = 50 acoustic sites, log-linear abundance
// (beta0 = 2, beta1 = 0.3, X standard normal), T = 4, with point-count
// subset sizes {5, 10, 20, 30, 50}. The returned site_map is a placeholder
// prefix; the study harness draws the actual random subset per replicate.
std::vector<ScenarioSpec> covariate_experiment_specs();
std::vector<int> covariate_subset_sizes();

// Restricts the count block to the given global sites (strictly increasing);
// acoustic data and covariate pass through unchanged.
Dataset restrict_counts(const Dataset& dataset,
                        std::span<const int> keep_sites);

// Round-half-to-even to the nearest integer; fixed here so validation
// subsample sizes are platform-independent.
long round_half_even(double x);

}  // namespace chorus
