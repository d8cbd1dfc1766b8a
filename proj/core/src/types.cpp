#include "chorus/types.hpp"

#include <algorithm>
#include <cmath>

#include "chorus/logpmf.hpp"

namespace chorus {

namespace {

std::string cell(int r, int c) {
  return "(" + std::to_string(r) + "," + std::to_string(c) + ")";
}

}  // namespace

int SurveyDesign::num_global_sites() const {
  int max_index = num_acoustic_sites - 1;
  for (int g : site_map) max_index = std::max(max_index, g);
  return max_index + 1;
}

void SurveyDesign::validate() const {
  if (num_acoustic_sites < 1) throw ValidationError("R must be >= 1");
  if (num_count_sites < 1) throw ValidationError("I must be >= 1");
  if (acoustic_surveys < 1) throw ValidationError("J must be >= 1");
  if (count_surveys < 1) throw ValidationError("T must be >= 1");
  if (static_cast<int>(site_map.size()) != num_count_sites)
    throw ValidationError("site_map must have one entry per count site");
  std::vector<int> seen;
  for (int g : site_map) {
    if (g < 0) throw ValidationError("site_map entries must be non-negative");
    seen.push_back(g);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw ValidationError("site_map must be injective");
  // Union coverage: indices >= R come only from site_map, so the map must
  // fill R..G-1 without gaps.
  const int global = num_global_sites();
  std::vector<char> covered(static_cast<std::size_t>(global), 0);
  for (int g = 0; g < num_acoustic_sites; ++g) covered[g] = 1;
  for (int g : site_map) covered[g] = 1;
  for (int g = 0; g < global; ++g)
    if (!covered[g])
      throw ValidationError("global site " + std::to_string(g) +
                            " referenced by neither survey");
}

std::vector<int> SurveyDesign::count_site_by_global() const {
  std::vector<int> lookup(static_cast<std::size_t>(num_global_sites()), -1);
  for (int i = 0; i < num_count_sites; ++i) lookup[site_map[i]] = i;
  return lookup;
}

double AbundanceModel::mean_at(int global_site) const {
  if (kind == AbundanceKind::kConstant) return lambda;
  assert(global_site >= 0 &&
         global_site < static_cast<int>(covariate.size()));
  return std::exp(beta0 + beta1 * covariate[global_site]);
}

std::string_view variant_name(ModelVariant variant) {
  switch (variant) {
    case ModelVariant::kAV: return "AV";
    case ModelVariant::kC: return "C";
    case ModelVariant::kAC: return "AC";
    case ModelVariant::kACV: return "ACV";
  }
  return "?";
}

ModelVariant variant_from_name(std::string_view name) {
  if (name == "AV" || name == "av") return ModelVariant::kAV;
  if (name == "C" || name == "c") return ModelVariant::kC;
  if (name == "AC" || name == "ac") return ModelVariant::kAC;
  if (name == "ACV" || name == "acv") return ModelVariant::kACV;
  throw ConfigError("unknown model variant '" + std::string(name) +
                    "' (expected AV, C, AC, or ACV)");
}

bool variant_uses_acoustic(ModelVariant variant) {
  return variant != ModelVariant::kC;
}

bool variant_uses_validation(ModelVariant variant) {
  return variant == ModelVariant::kAV || variant == ModelVariant::kACV;
}

bool variant_uses_counts(ModelVariant variant) {
  return variant != ModelVariant::kAV;
}

Dataset validate_dataset(const SurveyDesign& design,
                         std::optional<AcousticData> acoustic,
                         std::optional<ValidationData> validation,
                         std::optional<CountData> counts,
                         std::vector<double> covariate, ModelVariant variant) {
  design.validate();
  const int R = design.num_acoustic_sites;
  const int J = design.acoustic_surveys;
  const int I = design.num_count_sites;
  const int T = design.count_surveys;

  if (variant_uses_acoustic(variant) && !acoustic)
    throw ValidationError(std::string("variant ") +
                          std::string(variant_name(variant)) +
                          " requires the acoustic block");
  if (variant_uses_validation(variant) && !validation)
    throw ValidationError(std::string("variant ") +
                          std::string(variant_name(variant)) +
                          " requires the validation block");
  if (variant_uses_counts(variant) && !counts)
    throw ValidationError(std::string("variant ") +
                          std::string(variant_name(variant)) +
                          " requires the count block");

  if (acoustic) {
    const auto& a = *acoustic;
    if (a.y.rows() != R || a.y.cols() != J || a.v.rows() != R ||
        a.v.cols() != J || a.missing.rows() != R || a.missing.cols() != J)
      throw ValidationError("acoustic matrices must be R x J");
    for (int i = 0; i < R; ++i) {
      for (int j = 0; j < J; ++j) {
        if (a.y(i, j) != 0 && a.y(i, j) != 1)
          throw ValidationError("acoustic y must be binary at " + cell(i, j));
        if (a.v(i, j) < 0)
          throw ValidationError("negative vocalization count at " +
                                cell(i, j));
        if (a.missing(i, j)) {
          if (a.y(i, j) != 0 || a.v(i, j) != 0)
            throw ValidationError("masked acoustic cell " + cell(i, j) +
                                  " must store y = 0, v = 0");
        } else if (a.y(i, j) == 0 && a.v(i, j) > 0) {
          throw ValidationError("vocalizations without detection at " +
                                cell(i, j));
        }
      }
    }
  }

  if (validation) {
    if (!acoustic)
      throw ValidationError("validation block requires the acoustic block");
    const auto& val = *validation;
    if (val.n.rows() != R || val.n.cols() != J || val.k.rows() != R ||
        val.k.cols() != J)
      throw ValidationError("validation matrices must be R x J");
    for (int i = 0; i < R; ++i) {
      for (int j = 0; j < J; ++j) {
        const int n = val.n(i, j);
        const int k = val.k(i, j);
        if (k < 0 || k > n)
          throw ValidationError("k > n (or negative) at " + cell(i, j));
        if (n > acoustic->v(i, j))
          throw ValidationError("n > v at " + cell(i, j));
        if (acoustic->missing(i, j) && n != 0)
          throw ValidationError("validation on masked acoustic cell " +
                                cell(i, j));
      }
    }
  }

  if (counts) {
    const auto& cd = *counts;
    if (cd.c.rows() != I || cd.c.cols() != T || cd.missing.rows() != I ||
        cd.missing.cols() != T)
      throw ValidationError("count matrices must be I x T");
    for (int i = 0; i < I; ++i) {
      for (int t = 0; t < T; ++t) {
        if (cd.c(i, t) < 0)
          throw ValidationError("negative count at " + cell(i, t));
        if (cd.missing(i, t) && cd.c(i, t) != 0)
          throw ValidationError("masked count cell " + cell(i, t) +
                                " must store c = 0");
      }
    }
  }

  const int global = design.num_global_sites();
  if (!covariate.empty() && static_cast<int>(covariate.size()) != global)
    throw ValidationError("covariate must have one value per global site");
  for (double x : covariate)
    if (!std::isfinite(x))
      throw ValidationError("covariate values must be finite");

  Dataset dataset;
  dataset.design = design;
  dataset.acoustic = std::move(acoustic);
  dataset.validation = std::move(validation);
  dataset.counts = std::move(counts);
  dataset.covariate = std::move(covariate);
  dataset.count_by_global = design.count_site_by_global();
  return dataset;
}

double true_positive_rate(long abundance, double delta, double omega,
                          bool* degenerate) {
  assert(abundance >= 0 && delta >= 0.0 && omega >= 0.0);
  const double truth_rate = delta * static_cast<double>(abundance);
  const double total = truth_rate + omega;
  if (total <= 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return truth_rate / total;
}

double detection_prob(long abundance, double alpha0, double alpha1) {
  return inv_logit(alpha0 + alpha1 * static_cast<double>(abundance));
}

std::vector<int> active_sites(const SurveyDesign& design,
                              ModelVariant variant) {
  std::vector<char> active(
      static_cast<std::size_t>(design.num_global_sites()), 0);
  if (variant_uses_acoustic(variant))
    for (int g = 0; g < design.num_acoustic_sites; ++g) active[g] = 1;
  if (variant_uses_counts(variant))
    for (int g : design.site_map) active[g] = 1;
  std::vector<int> sites;
  for (int g = 0; g < static_cast<int>(active.size()); ++g)
    if (active[g]) sites.push_back(g);
  return sites;
}

}  // namespace chorus
