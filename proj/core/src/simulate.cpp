#include "chorus/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "chorus/logpmf.hpp"

namespace chorus {

namespace {

// Stream tags under a scenario's root stream.
constexpr uint64_t kCovariateStream = 1;
constexpr uint64_t kSiteStream = 2;
constexpr uint64_t kValidationStream = 3;

}  // namespace

void ScenarioSpec::validate() const {
  design.validate();
  if (!(validation_fraction >= 0.0 && validation_fraction <= 1.0))
    throw ConfigError("validation_fraction out of range [0, 1]");
  if (alpha1 < 0.0 || delta < 0.0 || omega < 0.0)
    throw ConfigError("alpha1, delta, omega must be non-negative");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p out of range [0, 1]");
  if (abundance.kind == AbundanceKind::kConstant) {
    if (!(abundance.lambda > 0.0)) throw ConfigError("lambda must be > 0");
  } else {
    if (!std::isfinite(abundance.beta0) || !std::isfinite(abundance.beta1))
      throw ConfigError("beta0, beta1 must be finite");
    if (!abundance.covariate.empty() &&
        static_cast<int>(abundance.covariate.size()) !=
            design.num_global_sites())
      throw ConfigError("covariate must have one value per global site");
  }
}

long round_half_even(double x) {
  const double floor_x = std::floor(x);
  const double frac = x - floor_x;
  const long lo = static_cast<long>(floor_x);
  if (frac > 0.5) return lo + 1;
  if (frac < 0.5) return lo;
  return (lo % 2 == 0) ? lo : lo + 1;
}

std::pair<Dataset, TruthRecord> simulate(const ScenarioSpec& spec) {
  spec.validate();
  const SurveyDesign& design = spec.design;
  const int R = design.num_acoustic_sites;
  const int J = design.acoustic_surveys;
  const int I = design.num_count_sites;
  const int T = design.count_surveys;
  const int global = design.num_global_sites();
  const auto count_by_global = design.count_site_by_global();

  RngStream root(spec.seed, 0);

  AbundanceModel abundance = spec.abundance;
  if (abundance.kind == AbundanceKind::kLogLinear &&
      abundance.covariate.empty()) {
    RngStream xs = root.split(kCovariateStream);
    abundance.covariate.resize(static_cast<std::size_t>(global));
    for (double& x : abundance.covariate) x = xs.normal();
  }

  TruthRecord truth;
  truth.site_abundance.assign(static_cast<std::size_t>(global), 0);
  truth.true_calls = Grid<int>(R, J);
  truth.false_calls = Grid<int>(R, J);
  truth.alpha0 = spec.alpha0;
  truth.alpha1 = spec.alpha1;
  truth.delta = spec.delta;
  truth.omega = spec.omega;
  truth.p = spec.p;
  truth.abundance = abundance;

  AcousticData acoustic{Grid<int8_t>(R, J), Grid<int>(R, J),
                        Grid<uint8_t>(R, J)};
  CountData counts{Grid<int>(I, T), Grid<uint8_t>(I, T)};

  RngStream site_root = root.split(kSiteStream);
  for (int g = 0; g < global; ++g) {
    RngStream sg = site_root.split(static_cast<uint64_t>(g));
    const long N = sg.poisson(abundance.mean_at(g));
    truth.site_abundance[g] = N;
    if (g < R) {
      const double pi = detection_prob(N, spec.alpha0, spec.alpha1);
      const double true_rate = spec.delta * static_cast<double>(N);
      for (int j = 0; j < J; ++j) {
        if (sg.unit() < pi) {
          const int k_true = static_cast<int>(sg.poisson(true_rate));
          const int k_false = static_cast<int>(sg.poisson(spec.omega));
          acoustic.y(g, j) = 1;
          acoustic.v(g, j) = k_true + k_false;
          truth.true_calls(g, j) = k_true;
          truth.false_calls(g, j) = k_false;
        }
      }
    }
    if (const int row = count_by_global[g]; row >= 0) {
      for (int t = 0; t < T; ++t)
        counts.c(row, t) = static_cast<int>(sg.binomial(N, spec.p));
    }
  }

  Dataset dataset =
      validate_dataset(design, std::move(acoustic), std::nullopt,
                       std::move(counts), abundance.covariate,
                       ModelVariant::kAC);
  return {std::move(dataset), std::move(truth)};
}

ValidationData simulate_validation(const Dataset& dataset,
                                   const TruthRecord& truth, double fraction,
                                   RngStream& rng) {
  const AcousticData& acoustic = *dataset.acoustic;
  const int R = acoustic.v.rows();
  const int J = acoustic.v.cols();
  ValidationData validation{Grid<int>(R, J), Grid<int>(R, J)};
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < J; ++j) {
      if (acoustic.missing(i, j)) continue;
      const int v = acoustic.v(i, j);
      const int n = static_cast<int>(
          round_half_even(fraction * static_cast<double>(v)));
      if (n == 0) continue;
      const int k_true = truth.true_calls(i, j);
      validation.n(i, j) = n;
      validation.k(i, j) =
          static_cast<int>(rng.hypergeometric(k_true, v - k_true, n));
    }
  }
  return validation;
}

std::pair<Dataset, TruthRecord> simulate_complete(const ScenarioSpec& spec) {
  auto [dataset, truth] = simulate(spec);
  RngStream vrng = RngStream(spec.seed, 0).split(kValidationStream);
  dataset.validation =
      simulate_validation(dataset, truth, spec.validation_fraction, vrng);
  return {std::move(dataset), std::move(truth)};
}

namespace {

constexpr int kGridTotals[] = {50, 100};
constexpr int kGridRatios = 3;  // R=I, R=I/2, R/2=I
constexpr int kGridVisits[] = {3, 5};
constexpr double kGridAlpha1[] = {1.2, 3.0};
constexpr double kGridLambda[] = {0.5, 3.0};
constexpr double kGridAlpha0 = -2.19;

void ratio_dims(int ratio, int total, int* num_acoustic, int* num_count) {
  switch (ratio) {
    case 0: *num_acoustic = total, *num_count = total; break;
    case 1: *num_acoustic = total / 2, *num_count = total; break;
    default: *num_acoustic = total, *num_count = total / 2; break;
  }
}

std::vector<int> identity_map(int n) {
  std::vector<int> map(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) map[i] = i;
  return map;
}

}  // namespace

std::vector<ScenarioSpec> scenario_grid() {
  std::vector<ScenarioSpec> specs;
  specs.reserve(48);
  for (int total : kGridTotals) {
    for (int ratio = 0; ratio < kGridRatios; ++ratio) {
      for (int visits : kGridVisits) {
        for (double alpha1 : kGridAlpha1) {
          for (double lambda : kGridLambda) {
            ScenarioSpec spec;
            int num_acoustic, num_count;
            ratio_dims(ratio, total, &num_acoustic, &num_count);
            spec.design.num_acoustic_sites = num_acoustic;
            spec.design.num_count_sites = num_count;
            spec.design.acoustic_surveys = 10;
            spec.design.count_surveys = visits;
            spec.design.site_map = identity_map(num_count);
            spec.abundance.kind = AbundanceKind::kConstant;
            spec.abundance.lambda = lambda;
            spec.alpha0 = kGridAlpha0;
            spec.alpha1 = alpha1;
            spec.delta = 4.0;
            spec.omega = 3.0;
            spec.p = inv_logit(kGridAlpha0 + alpha1);
            spec.validation_fraction = 0.2;
            specs.push_back(std::move(spec));
          }
        }
      }
    }
  }
  return specs;
}

GridCellLabel grid_cell_label(int index) {
  assert(index >= 0 && index < 48);
  const int lambda_i = index % 2;
  const int alpha_i = index / 2 % 2;
  const int visits_i = index / 4 % 2;
  const int ratio = index / 8 % 3;
  const int total_i = index / 24;
  GridCellLabel label;
  label.total_sites = kGridTotals[total_i];
  ratio_dims(ratio, label.total_sites, &label.num_acoustic, &label.num_count);
  label.count_surveys = kGridVisits[visits_i];
  label.alpha1 = kGridAlpha1[alpha_i];
  label.lambda = kGridLambda[lambda_i];
  return label;
}

std::vector<int> covariate_subset_sizes() { return {5, 10, 20, 30, 50}; }

std::vector<ScenarioSpec> covariate_experiment_specs() {
  std::vector<ScenarioSpec> specs;
  for (int size : covariate_subset_sizes()) {
    ScenarioSpec spec;
    spec.design.num_acoustic_sites = 50;
    spec.design.num_count_sites = size;
    spec.design.acoustic_surveys = 10;
    spec.design.count_surveys = 4;
    spec.design.site_map = identity_map(size);  // harness randomizes
    spec.abundance.kind = AbundanceKind::kLogLinear;
    spec.abundance.beta0 = 2.0;
    spec.abundance.beta1 = 0.3;
    spec.alpha0 = kGridAlpha0;
    spec.alpha1 = 3.0;
    spec.delta = 4.0;
    spec.omega = 3.0;
    spec.p = inv_logit(kGridAlpha0 + 3.0);
    spec.validation_fraction = 0.2;
    specs.push_back(std::move(spec));
  }
  return specs;
}

Dataset restrict_counts(const Dataset& dataset,
                        std::span<const int> keep_sites) {
  if (!dataset.counts)
    throw ValidationError("restrict_counts requires a count block");
  for (std::size_t i = 1; i < keep_sites.size(); ++i)
    if (keep_sites[i] <= keep_sites[i - 1])
      throw ValidationError("keep_sites must be strictly increasing");
  const CountData& full = *dataset.counts;
  const int T = full.c.cols();
  const int kept = static_cast<int>(keep_sites.size());
  CountData restricted{Grid<int>(kept, T), Grid<uint8_t>(kept, T)};
  std::vector<int> site_map(keep_sites.begin(), keep_sites.end());
  for (int i = 0; i < kept; ++i) {
    if (keep_sites[i] < 0 ||
        keep_sites[i] >= static_cast<int>(dataset.count_by_global.size()) ||
        dataset.count_by_global[keep_sites[i]] < 0)
      throw ValidationError("global site " + std::to_string(keep_sites[i]) +
                            " has no count data");
    const int row = dataset.count_by_global[keep_sites[i]];
    for (int t = 0; t < T; ++t) {
      restricted.c(i, t) = full.c(row, t);
      restricted.missing(i, t) = full.missing(row, t);
    }
  }
  SurveyDesign design = dataset.design;
  design.num_count_sites = kept;
  design.site_map = std::move(site_map);
  return validate_dataset(design, dataset.acoustic, dataset.validation,
                          std::move(restricted), dataset.covariate,
                          ModelVariant::kAC);
}

}  // namespace chorus
