#include "chorus/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "chorus/digest.hpp"
#include "chorus/logpmf.hpp"

namespace chorus {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kAdaptBatch = 50;
constexpr double kMaxSiteWalkWidth = 200.0;
constexpr int kMaxInitAttempts = 1000;

enum class Transform { kLog, kIdentity, kLogit };

Transform transform_of(ScalarId scalar) {
  switch (scalar) {
    case ScalarId::kLambda:
    case ScalarId::kDelta:
    case ScalarId::kOmega:
    case ScalarId::kAlpha1:
      return Transform::kLog;
    case ScalarId::kP:
      return Transform::kLogit;
    default:
      return Transform::kIdentity;
  }
}

double get_scalar(const ParameterState& state, ScalarId scalar) {
  switch (scalar) {
    case ScalarId::kLambda: return state.abundance.lambda;
    case ScalarId::kBeta0: return state.abundance.beta0;
    case ScalarId::kBeta1: return state.abundance.beta1;
    case ScalarId::kAlpha0: return state.alpha0;
    case ScalarId::kAlpha1: return state.alpha1;
    case ScalarId::kDelta: return state.delta;
    case ScalarId::kOmega: return state.omega;
    case ScalarId::kP: return state.p;
  }
  return 0.0;
}

void set_scalar(ParameterState& state, ScalarId scalar, double value) {
  switch (scalar) {
    case ScalarId::kLambda: state.abundance.lambda = value; break;
    case ScalarId::kBeta0: state.abundance.beta0 = value; break;
    case ScalarId::kBeta1: state.abundance.beta1 = value; break;
    case ScalarId::kAlpha0: state.alpha0 = value; break;
    case ScalarId::kAlpha1: state.alpha1 = value; break;
    case ScalarId::kDelta: state.delta = value; break;
    case ScalarId::kOmega: state.omega = value; break;
    case ScalarId::kP: state.p = value; break;
  }
}

const std::vector<double>& grid_of(const SupportConstraints& support,
                                   ScalarId scalar) {
  switch (scalar) {
    case ScalarId::kLambda: return support.lambda_grid;
    case ScalarId::kBeta0: return support.beta0_grid;
    case ScalarId::kBeta1: return support.beta1_grid;
    case ScalarId::kAlpha0: return support.alpha0_grid;
    case ScalarId::kAlpha1: return support.alpha1_grid;
    case ScalarId::kDelta: return support.delta_grid;
    case ScalarId::kOmega: return support.omega_grid;
    case ScalarId::kP: return support.p_grid;
  }
  return support.lambda_grid;
}

double uniform_lpdf(double x, double min, double max) {
  if (x < min || x > max || !(max > min)) return kNegInf;
  return -std::log(max - min);
}

double truncated_normal_lpdf(double x, double mean, double variance,
                             double min, double max) {
  if (x < min || x > max) return kNegInf;
  return normal_lpdf(x, mean, variance);
}

// Prior term of one scalar, matching logprior's treatment.
double scalar_prior(ScalarId scalar, double value, const Priors& priors) {
  switch (scalar) {
    case ScalarId::kLambda:
      return uniform_lpdf(value, priors.lambda_min, priors.lambda_max);
    case ScalarId::kBeta0:
    case ScalarId::kBeta1:
      return truncated_normal_lpdf(value, priors.beta_mean,
                                   priors.beta_variance, priors.beta_min,
                                   priors.beta_max);
    case ScalarId::kAlpha0:
      return truncated_normal_lpdf(value, priors.alpha0_mean,
                                   priors.alpha0_variance, priors.alpha0_min,
                                   priors.alpha0_max);
    case ScalarId::kAlpha1:
      return uniform_lpdf(value, priors.alpha1_min, priors.alpha1_max);
    case ScalarId::kDelta:
      return uniform_lpdf(value, priors.delta_min, priors.delta_max);
    case ScalarId::kOmega:
      return uniform_lpdf(value, priors.omega_min, priors.omega_max);
    case ScalarId::kP:
      return uniform_lpdf(value, priors.p_min, priors.p_max);
  }
  return kNegInf;
}

// Shared full-conditional weight layout for a validated cell's true-call
// count: Binomial(K | v, tp) * Hypergeometric(k | K, v-K, n) on the log
// scale over the support [k, v-(n-k)]. Returns the support start.
int fill_k_logweights(int v, int n, int k, double log_tp, double log_1mtp,
                      std::vector<double>& lw) {
  const int k_min = k;
  const int k_max = v - (n - k);
  assert(k_max >= k_min);
  lw.resize(static_cast<std::size_t>(k_max - k_min + 1));
  for (int K = k_min; K <= k_max; ++K) {
    lw[static_cast<std::size_t>(K - k_min)] =
        log_choose(v, K) + static_cast<double>(K) * log_tp +
        static_cast<double>(v - K) * log_1mtp + log_choose(K, k) +
        log_choose(v - K, n - k);
  }
  return k_min;
}

}  // namespace

std::vector<double> true_call_conditional(int v, int n, int k, double tp,
                                          int* k_min) {
  if (v < 0 || n > v || k > n || k < 0)
    throw ValidationError("true_call_conditional: inconsistent (v, n, k)");
  std::vector<double> pmf;
  int lo;
  if (tp <= 0.0) {
    // No true calls possible, so all mass sits at the support floor K = k
    // (legal data then has k = 0).
    lo = k;
    pmf.assign(1, 1.0);
    if (k_min) *k_min = lo;
    return pmf;
  }
  if (tp >= 1.0) {
    lo = v - (n - k);
    pmf.assign(1, 1.0);
    if (k_min) *k_min = lo;
    return pmf;
  }
  lo = fill_k_logweights(v, n, k, std::log(tp), std::log1p(-tp), pmf);
  double max_lw = kNegInf;
  for (double w : pmf) max_lw = std::max(max_lw, w);
  double total = 0.0;
  for (double& w : pmf) {
    w = std::exp(w - max_lw);
    total += w;
  }
  for (double& w : pmf) w /= total;
  if (k_min) *k_min = lo;
  return pmf;
}

std::vector<ScalarId> sampled_scalars(ModelVariant variant,
                                      AbundanceKind abundance) {
  std::vector<ScalarId> scalars;
  if (abundance == AbundanceKind::kConstant) {
    scalars.push_back(ScalarId::kLambda);
  } else {
    scalars.push_back(ScalarId::kBeta0);
    scalars.push_back(ScalarId::kBeta1);
  }
  if (variant_uses_acoustic(variant)) {
    scalars.push_back(ScalarId::kAlpha0);
    scalars.push_back(ScalarId::kAlpha1);
    scalars.push_back(ScalarId::kDelta);
    scalars.push_back(ScalarId::kOmega);
  }
  if (variant_uses_counts(variant)) scalars.push_back(ScalarId::kP);
  return scalars;
}

std::string_view scalar_name(ScalarId scalar) {
  switch (scalar) {
    case ScalarId::kLambda: return "lambda";
    case ScalarId::kBeta0: return "beta0";
    case ScalarId::kBeta1: return "beta1";
    case ScalarId::kAlpha0: return "alpha0";
    case ScalarId::kAlpha1: return "alpha1";
    case ScalarId::kDelta: return "delta";
    case ScalarId::kOmega: return "omega";
    case ScalarId::kP: return "p";
  }
  return "?";
}

double site_local_logdensity(const ParameterState& state,
                             const Dataset& dataset, ModelVariant variant,
                             int global_site) {
  const long N = state.site_abundance[global_site];
  LogDensity total;
  total += poisson_lpmf(N, state.abundance.mean_at(global_site));
  if (variant_uses_acoustic(variant) &&
      global_site < dataset.design.num_acoustic_sites) {
    const AcousticData& ac = *dataset.acoustic;
    const double logit_pi =
        state.alpha0 + state.alpha1 * static_cast<double>(N);
    const double rate = state.delta * static_cast<double>(N) + state.omega;
    const double tp = true_positive_rate(N, state.delta, state.omega);
    for (int j = 0; j < ac.y.cols(); ++j) {
      if (ac.missing(global_site, j)) continue;
      total += log_inv_logit(ac.y(global_site, j) ? logit_pi : -logit_pi);
      if (ac.y(global_site, j))
        total += poisson_lpmf(ac.v(global_site, j), rate);
      if (variant_uses_validation(variant) &&
          dataset.validation->n(global_site, j) > 0)
        total += binomial_lpmf(state.true_calls(global_site, j),
                               ac.v(global_site, j), tp);
      if (!total.finite()) return total.value;
    }
  }
  if (variant_uses_counts(variant)) {
    const int row = dataset.count_by_global[global_site];
    if (row >= 0) {
      const CountData& cd = *dataset.counts;
      for (int t = 0; t < cd.c.cols(); ++t) {
        if (cd.missing(row, t)) continue;
        total += binomial_lpmf(cd.c(row, t), N, state.p);
        if (!total.finite()) return total.value;
      }
    }
  }
  return total.value;
}

double scalar_local_logdensity(const ParameterState& state,
                               const Dataset& dataset, ModelVariant variant,
                               const Priors& priors, ScalarId scalar) {
  LogDensity total(scalar_prior(scalar, get_scalar(state, scalar), priors));
  if (!total.finite()) return total.value;
  switch (scalar) {
    case ScalarId::kLambda:
    case ScalarId::kBeta0:
    case ScalarId::kBeta1: {
      const auto sites = active_sites(dataset.design, variant);
      total += loglik_abundance(state.site_abundance, state.abundance, sites);
      break;
    }
    case ScalarId::kAlpha0:
    case ScalarId::kAlpha1:
      total += loglik_acoustic_binary(*dataset.acoustic, state.site_abundance,
                                      state.alpha0, state.alpha1);
      break;
    case ScalarId::kDelta:
    case ScalarId::kOmega:
      total += loglik_vocalizations(*dataset.acoustic, state.site_abundance,
                                    state.delta, state.omega);
      if (total.finite() && variant_uses_validation(variant))
        total += loglik_validation(*dataset.validation, *dataset.acoustic,
                                   state.true_calls, state.site_abundance,
                                   state.delta, state.omega);
      break;
    case ScalarId::kP:
      total += loglik_counts(*dataset.counts, state.site_abundance, state.p,
                             dataset.design.site_map);
      break;
  }
  return total.value;
}

bool update_site_abundance(ParameterState& state, const Dataset& dataset,
                           ModelVariant variant, int global_site,
                           int walk_width, long max_abundance,
                           RngStream& rng) {
  assert(walk_width >= 1);
  long step = rng.uniform_int(1, walk_width);
  if (rng.unit() < 0.5) step = -step;
  const double u = rng.unit();
  const long current = state.site_abundance[global_site];
  const long proposed = current + step;
  if (proposed < 0 || (max_abundance >= 0 && proposed > max_abundance))
    return false;
  const double before =
      site_local_logdensity(state, dataset, variant, global_site);
  state.site_abundance[global_site] = proposed;
  const double after =
      site_local_logdensity(state, dataset, variant, global_site);
  if (std::log(u) < after - before) return true;
  state.site_abundance[global_site] = current;
  return false;
}

void update_true_calls(ParameterState& state, const Dataset& dataset,
                       int site, int survey, RngStream& rng) {
  const AcousticData& ac = *dataset.acoustic;
  const ValidationData& val = *dataset.validation;
  assert(!ac.missing(site, survey));
  const int v = ac.v(site, survey);
  const int n = val.n(site, survey);
  const int k = val.k(site, survey);
  const double tp = true_positive_rate(state.site_abundance[site],
                                       state.delta, state.omega);
  int k_min = 0;
  const std::vector<double> pmf = true_call_conditional(v, n, k, tp, &k_min);
  const double target = rng.unit();
  std::size_t idx = pmf.size() - 1;
  double cum = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    cum += pmf[i];
    if (target < cum) {
      idx = i;
      break;
    }
  }
  state.true_calls(site, survey) = k_min + static_cast<int>(idx);
}

void McmcConfig::validate() const {
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (burn_in < 0 || adapt < 0)
    throw ConfigError("burn_in and adapt must be >= 0");
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (burn_in + adapt >= iterations)
    throw ConfigError("burn_in + adapt must be < iterations");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw ConfigError("target_accept must lie in (0, 1)");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (retained_per_chain() < 1)
    throw ConfigError("config retains no draws (iterations too small)");
}

int McmcConfig::retained_per_chain() const {
  return (iterations - burn_in - adapt) / thin;
}

int ChainOutput::parameter_index(std::string_view name) const {
  for (std::size_t i = 0; i < parameter_names.size(); ++i)
    if (parameter_names[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::vector<double>> ChainOutput::parameter_chains(
    std::string_view name) const {
  const int idx = parameter_index(name);
  if (idx < 0)
    throw ConfigError("unknown parameter '" + std::string(name) + "'");
  std::vector<std::vector<double>> chains;
  chains.reserve(draws.size());
  for (const auto& chain : draws)
    chains.push_back(chain[static_cast<std::size_t>(idx)]);
  return chains;
}

ParameterState initialize(const Dataset& dataset, ModelVariant variant,
                          const McmcConfig& config, RngStream& rng) {
  const int global = dataset.design.num_global_sites();
  const bool use_acoustic = variant_uses_acoustic(variant);
  const bool use_validation = variant_uses_validation(variant);
  const bool use_counts = variant_uses_counts(variant);
  const std::vector<int> active = active_sites(dataset.design, variant);

  ParameterState state;
  state.abundance.kind = config.abundance;
  state.abundance.covariate = dataset.covariate;
  state.abundance.lambda = 1.0;
  state.site_abundance.assign(static_cast<std::size_t>(global), 0);
  if (use_acoustic)
    state.true_calls =
        Grid<int>(dataset.acoustic->y.rows(), dataset.acoustic->y.cols());

  // Data-informed abundance floor so the initial state has positive support.
  for (int g = 0; g < global; ++g) {
    long floor_n = 0;
    if (use_counts) {
      const int row = dataset.count_by_global[g];
      if (row >= 0) {
        const CountData& cd = *dataset.counts;
        for (int t = 0; t < cd.c.cols(); ++t)
          if (!cd.missing(row, t))
            floor_n = std::max(floor_n, static_cast<long>(cd.c(row, t)));
      }
    }
    if (use_acoustic && g < dataset.design.num_acoustic_sites) {
      const AcousticData& ac = *dataset.acoustic;
      long ymax = 0;
      for (int j = 0; j < ac.y.cols(); ++j) {
        if (ac.missing(g, j)) continue;
        ymax = std::max(ymax, static_cast<long>(ac.y(g, j)));
        if (use_validation && dataset.validation->k(g, j) > 0) ymax = std::max(ymax, 1L);
      }
      floor_n = std::max(floor_n, 1 + ymax);
    }
    if (config.support.max_abundance >= 0)
      floor_n = std::min(floor_n, config.support.max_abundance);
    state.site_abundance[static_cast<std::size_t>(g)] = floor_n;
  }

  const std::vector<ScalarId> scalars =
      sampled_scalars(variant, config.abundance);
  // Starting ranges clipped to the prior support so narrow boxes do not
  // burn attempts on zero-mass draws; (a, b] keeps log-scale scalars
  // strictly positive when the box floor is 0.
  const Priors& pri = config.priors;
  auto draw_in = [&rng](double lo, double hi, double pmin, double pmax) {
    double a = std::max(lo, pmin);
    double b = std::min(hi, pmax);
    if (!(a < b)) a = pmin, b = pmax;  // default range misses the box
    if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) a = lo, b = hi;
    return a + (b - a) * (1.0 - rng.unit());
  };
  std::string first_bad;
  for (int attempt = 0; attempt < kMaxInitAttempts; ++attempt) {
    for (ScalarId scalar : scalars) {
      const auto& grid = grid_of(config.support, scalar);
      double value;
      if (!grid.empty()) {
        value = grid[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<long>(grid.size()) - 1))];
      } else {
        switch (scalar) {
          case ScalarId::kLambda:
            value = draw_in(0.0, 20.0, pri.lambda_min, pri.lambda_max);
            break;
          case ScalarId::kDelta:
            value = draw_in(0.0, 20.0, pri.delta_min, pri.delta_max);
            break;
          case ScalarId::kOmega:
            value = draw_in(0.0, 20.0, pri.omega_min, pri.omega_max);
            break;
          case ScalarId::kAlpha0:
            value = draw_in(-5.0, 0.0, pri.alpha0_min, pri.alpha0_max);
            break;
          case ScalarId::kAlpha1:
            value = draw_in(0.0, 5.0, pri.alpha1_min, pri.alpha1_max);
            break;
          case ScalarId::kP:
            value = draw_in(0.05, 0.95, pri.p_min, pri.p_max);
            break;
          case ScalarId::kBeta0:
            value = draw_in(-1.0, 3.0, pri.beta_min, pri.beta_max);
            break;
          case ScalarId::kBeta1:
            value = draw_in(-1.0, 1.0, pri.beta_min, pri.beta_max);
            break;
        }
      }
      set_scalar(state, scalar, value);
    }
    if (use_validation) {
      const AcousticData& ac = *dataset.acoustic;
      const ValidationData& val = *dataset.validation;
      for (int g = 0; g < ac.y.rows(); ++g) {
        const double tp = true_positive_rate(state.site_abundance[g],
                                             state.delta, state.omega);
        for (int j = 0; j < ac.y.cols(); ++j) {
          if (ac.missing(g, j) || val.n(g, j) == 0) {
            state.true_calls(g, j) = 0;
            continue;
          }
          const int v = ac.v(g, j);
          const int n = val.n(g, j);
          const int k = val.k(g, j);
          state.true_calls(g, j) = tp > 0.0 ? k + (v - n) / 2 : k;
        }
      }
    }
    const LogDensity density =
        posterior_logdensity(state, dataset, variant, config.priors);
    if (density.finite()) return state;
    if (first_bad.empty()) {
      // Identify the offending term for the eventual error message.
      if (!logprior(state, variant, config.priors).finite()) {
        first_bad = "prior";
      } else if (!loglik_abundance(state.site_abundance, state.abundance,
                                   active)
                      .finite()) {
        first_bad = "abundance";
      } else if (use_acoustic &&
                 !loglik_acoustic_binary(*dataset.acoustic,
                                         state.site_abundance, state.alpha0,
                                         state.alpha1)
                      .finite()) {
        first_bad = "acoustic detection";
      } else if (use_acoustic &&
                 !loglik_vocalizations(*dataset.acoustic,
                                       state.site_abundance, state.delta,
                                       state.omega)
                      .finite()) {
        first_bad = "vocalization";
      } else if (use_validation &&
                 !loglik_validation(*dataset.validation, *dataset.acoustic,
                                    state.true_calls, state.site_abundance,
                                    state.delta, state.omega)
                      .finite()) {
        first_bad = "validation";
      } else if (use_counts &&
                 !loglik_counts(*dataset.counts, state.site_abundance,
                                state.p, dataset.design.site_map)
                      .finite()) {
        first_bad = "point count";
      } else {
        first_bad = "unknown";
      }
    }
  }
  throw ConvergenceError(
      "chain initialization failed after 1000 attempts; first non-finite "
      "term: " +
      first_bad);
}

namespace {

// Dataset-derived constants for one global site, shared by all chains.
struct SiteStatic {
  bool acoustic = false;
  int n1 = 0;          // unmasked surveys with y = 1
  int n0 = 0;          // unmasked surveys with y = 0
  long sum_v = 0;      // total vocalizations over y = 1 cells
  long sum_v_val = 0;  // total vocalizations over validated cells
  std::vector<int> val_surveys;  // surveys of unmasked cells with n > 0
  int count_row = -1;
  int t_unmasked = 0;
  long sum_c = 0;
};

struct SharedPlan {
  const Dataset* dataset = nullptr;
  ModelVariant variant = ModelVariant::kACV;
  const McmcConfig* config = nullptr;
  std::vector<int> active;
  std::vector<SiteStatic> sites;  // indexed by global site
  std::vector<ScalarId> scalars;
  long sum_c_total = 0;
  bool use_acoustic = false;
  bool use_validation = false;
  bool use_counts = false;
};

SharedPlan build_plan(const Dataset& dataset, ModelVariant variant,
                      const McmcConfig& config) {
  SharedPlan plan;
  plan.dataset = &dataset;
  plan.variant = variant;
  plan.config = &config;
  plan.active = active_sites(dataset.design, variant);
  plan.scalars = sampled_scalars(variant, config.abundance);
  plan.use_acoustic = variant_uses_acoustic(variant);
  plan.use_validation = variant_uses_validation(variant);
  plan.use_counts = variant_uses_counts(variant);
  const int global = dataset.design.num_global_sites();
  plan.sites.resize(static_cast<std::size_t>(global));
  for (int g = 0; g < global; ++g) {
    SiteStatic& site = plan.sites[static_cast<std::size_t>(g)];
    if (plan.use_acoustic && g < dataset.design.num_acoustic_sites) {
      site.acoustic = true;
      const AcousticData& ac = *dataset.acoustic;
      for (int j = 0; j < ac.y.cols(); ++j) {
        if (ac.missing(g, j)) continue;
        if (ac.y(g, j)) {
          ++site.n1;
          site.sum_v += ac.v(g, j);
        } else {
          ++site.n0;
        }
        if (plan.use_validation && dataset.validation->n(g, j) > 0) {
          site.val_surveys.push_back(j);
          site.sum_v_val += ac.v(g, j);
        }
      }
    }
    if (plan.use_counts) {
      site.count_row = dataset.count_by_global[g];
      if (site.count_row >= 0) {
        const CountData& cd = *dataset.counts;
        for (int t = 0; t < cd.c.cols(); ++t) {
          if (cd.missing(site.count_row, t)) continue;
          ++site.t_unmasked;
          site.sum_c += cd.c(site.count_row, t);
        }
        plan.sum_c_total += site.sum_c;
      }
    }
  }
  return plan;
}

// Vocalization terms that vary with the call rate, site-aggregated; the
// log(v!) constants cancel inside every Metropolis ratio and are dropped.
double vocal_term(const SiteStatic& site, double rate) {
  if (rate <= 0.0) return site.sum_v > 0 ? kNegInf : 0.0;
  return static_cast<double>(site.sum_v) * std::log(rate) -
         static_cast<double>(site.n1) * rate;
}

// Validation Binomial terms that vary with tp; log C(v, K) is dropped.
double validation_term(const SiteStatic& site, long sum_k, double tp) {
  if (site.val_surveys.empty()) return 0.0;
  const long false_part = site.sum_v_val - sum_k;
  if (tp <= 0.0) return sum_k > 0 ? kNegInf : 0.0;
  if (tp >= 1.0) return false_part > 0 ? kNegInf : 0.0;
  return static_cast<double>(sum_k) * std::log(tp) +
         static_cast<double>(false_part) * std::log1p(-tp);
}

struct BlockStats {
  long proposals = 0;
  long accepts = 0;
  long batch_proposals = 0;
  long batch_accepts = 0;
};

class ChainRunner {
 public:
  ChainRunner(const SharedPlan& plan, int chain_index)
      : plan_(plan),
        dataset_(*plan.dataset),
        config_(*plan.config),
        rng_(RngStream(plan.config->seed, 0).split(
            static_cast<uint64_t>(chain_index))) {}

  void run(std::vector<std::vector<double>>& draws,
           std::vector<double>& acceptance,
           const std::function<void(int)>& on_progress);

 private:
  void prepare();
  void update_site(std::size_t position);
  void update_site_k(int g);
  void update_scalar(std::size_t s);
  void adapt_step(int batch_number);
  void record(std::vector<std::vector<double>>& draws, int slot);

  double scalar_local(ScalarId scalar, double value) const;
  double site_delta(int g, long from, long to) const;
  void audit_site(int g, long from, long to, double cached_delta);
  void audit_scalar(ScalarId scalar, double from, double to,
                    double cached_delta);

  const SharedPlan& plan_;
  const Dataset& dataset_;
  const McmcConfig& config_;
  RngStream rng_;

  ParameterState state_;
  std::vector<long> sum_k_;  // per global site over validated cells
  long sum_n_active_ = 0;
  double sum_nt_ = 0.0;  // sum over count sites of t_unmasked * N

  std::vector<double> log_width_;  // per active-site walk width
  std::vector<double> log_sd_;     // per scalar proposal sd
  std::vector<int> grid_idx_;      // per scalar, -1 when continuous
  std::vector<BlockStats> site_stats_;
  std::vector<BlockStats> scalar_stats_;
};

void ChainRunner::prepare() {
  state_ = initialize(dataset_, plan_.variant, config_, rng_);

  sum_k_.assign(plan_.sites.size(), 0);
  sum_n_active_ = 0;
  sum_nt_ = 0.0;
  for (int g : plan_.active) {
    sum_n_active_ += state_.site_abundance[g];
    const SiteStatic& site = plan_.sites[static_cast<std::size_t>(g)];
    if (site.count_row >= 0)
      sum_nt_ += static_cast<double>(site.t_unmasked) *
                 static_cast<double>(state_.site_abundance[g]);
  }
  if (plan_.use_validation)
    for (std::size_t g = 0; g < plan_.sites.size(); ++g)
      for (int j : plan_.sites[g].val_surveys)
        sum_k_[g] += state_.true_calls(static_cast<int>(g), j);

  log_width_.assign(plan_.active.size(), std::log(3.0));
  site_stats_.assign(plan_.active.size(), BlockStats{});
  log_sd_.assign(plan_.scalars.size(), std::log(0.5));
  grid_idx_.assign(plan_.scalars.size(), -1);
  scalar_stats_.assign(plan_.scalars.size(), BlockStats{});
  for (std::size_t s = 0; s < plan_.scalars.size(); ++s) {
    const auto& grid = grid_of(config_.support, plan_.scalars[s]);
    if (grid.empty()) continue;
    const double value = get_scalar(state_, plan_.scalars[s]);
    const auto it = std::find(grid.begin(), grid.end(), value);
    assert(it != grid.end());
    grid_idx_[s] = static_cast<int>(it - grid.begin());
  }
}

double ChainRunner::scalar_local(ScalarId scalar, double value) const {
  double total = scalar_prior(scalar, value, config_.priors);
  if (total == kNegInf) return total;
  switch (scalar) {
    case ScalarId::kLambda: {
      if (!(value > 0.0)) return kNegInf;
      total += static_cast<double>(sum_n_active_) * std::log(value) -
               static_cast<double>(plan_.active.size()) * value;
      break;
    }
    case ScalarId::kBeta0:
    case ScalarId::kBeta1: {
      const double b0 =
          scalar == ScalarId::kBeta0 ? value : state_.abundance.beta0;
      const double b1 =
          scalar == ScalarId::kBeta1 ? value : state_.abundance.beta1;
      for (int g : plan_.active) {
        const double eta = b0 + b1 * dataset_.covariate[g];
        const double mean = std::exp(eta);
        if (!std::isfinite(mean)) return kNegInf;
        total += static_cast<double>(state_.site_abundance[g]) * eta - mean;
      }
      break;
    }
    case ScalarId::kAlpha0:
    case ScalarId::kAlpha1: {
      const double a0 = scalar == ScalarId::kAlpha0 ? value : state_.alpha0;
      const double a1 = scalar == ScalarId::kAlpha1 ? value : state_.alpha1;
      for (int g = 0; g < dataset_.design.num_acoustic_sites; ++g) {
        const SiteStatic& site = plan_.sites[static_cast<std::size_t>(g)];
        const double logit_pi =
            a0 + a1 * static_cast<double>(state_.site_abundance[g]);
        total += static_cast<double>(site.n1) * log_inv_logit(logit_pi) +
                 static_cast<double>(site.n0) * log_inv_logit(-logit_pi);
      }
      break;
    }
    case ScalarId::kDelta:
    case ScalarId::kOmega: {
      const double d = scalar == ScalarId::kDelta ? value : state_.delta;
      const double w = scalar == ScalarId::kOmega ? value : state_.omega;
      for (int g = 0; g < dataset_.design.num_acoustic_sites; ++g) {
        const SiteStatic& site = plan_.sites[static_cast<std::size_t>(g)];
        const double dn = d * static_cast<double>(state_.site_abundance[g]);
        const double rate = dn + w;
        total += vocal_term(site, rate);
        if (plan_.use_validation) {
          const double tp = rate > 0.0 ? dn / rate : 0.0;
          total +=
              validation_term(site, sum_k_[static_cast<std::size_t>(g)], tp);
        }
        if (total == kNegInf) return total;
      }
      break;
    }
    case ScalarId::kP: {
      if (value <= 0.0) return plan_.sum_c_total > 0 ? kNegInf : total;
      if (value >= 1.0) {
        // Would need every count to equal its site's N; resolve exactly.
        LogDensity exact(total);
        ParameterState probe = state_;
        probe.p = value;
        exact += loglik_counts(*dataset_.counts, probe.site_abundance,
                               probe.p, dataset_.design.site_map);
        return exact.value;
      }
      total += static_cast<double>(plan_.sum_c_total) * std::log(value) +
               (sum_nt_ - static_cast<double>(plan_.sum_c_total)) *
                   std::log1p(-value);
      break;
    }
  }
  return total;
}

double ChainRunner::site_delta(int g, long from, long to) const {
  const SiteStatic& site = plan_.sites[static_cast<std::size_t>(g)];
  const double mean = state_.abundance.mean_at(g);
  const double pois_to = poisson_lpmf(to, mean);
  if (pois_to == kNegInf) return kNegInf;
  double delta = pois_to - poisson_lpmf(from, mean);
  if (site.acoustic) {
    const double l_from =
        state_.alpha0 + state_.alpha1 * static_cast<double>(from);
    const double l_to =
        state_.alpha0 + state_.alpha1 * static_cast<double>(to);
    delta += static_cast<double>(site.n1) *
                 (log_inv_logit(l_to) - log_inv_logit(l_from)) +
             static_cast<double>(site.n0) *
                 (log_inv_logit(-l_to) - log_inv_logit(-l_from));
    const double dn_from = state_.delta * static_cast<double>(from);
    const double dn_to = state_.delta * static_cast<double>(to);
    const double voc_to = vocal_term(site, dn_to + state_.omega);
    if (voc_to == kNegInf) return kNegInf;
    delta += voc_to - vocal_term(site, dn_from + state_.omega);
    if (plan_.use_validation && !site.val_surveys.empty()) {
      const double rate_from = dn_from + state_.omega;
      const double rate_to = dn_to + state_.omega;
      const double tp_from = rate_from > 0.0 ? dn_from / rate_from : 0.0;
      const double tp_to = rate_to > 0.0 ? dn_to / rate_to : 0.0;
      const long sum_k = sum_k_[static_cast<std::size_t>(g)];
      const double val_to = validation_term(site, sum_k, tp_to);
      if (val_to == kNegInf) return kNegInf;
      delta += val_to - validation_term(site, sum_k, tp_from);
    }
  }
  if (site.count_row >= 0) {
    const CountData& cd = *dataset_.counts;
    if (state_.p <= 0.0 || state_.p >= 1.0) {
      for (int t = 0; t < cd.c.cols(); ++t) {
        if (cd.missing(site.count_row, t)) continue;
        const double term_to =
            binomial_lpmf(cd.c(site.count_row, t), to, state_.p);
        if (term_to == kNegInf) return kNegInf;
        delta += term_to -
                 binomial_lpmf(cd.c(site.count_row, t), from, state_.p);
      }
    } else {
      for (int t = 0; t < cd.c.cols(); ++t) {
        if (cd.missing(site.count_row, t)) continue;
        const double lc_to = log_choose(to, cd.c(site.count_row, t));
        if (lc_to == kNegInf) return kNegInf;
        delta += lc_to - log_choose(from, cd.c(site.count_row, t));
      }
      delta += static_cast<double>(to - from) *
               static_cast<double>(site.t_unmasked) * std::log1p(-state_.p);
    }
  }
  return delta;
}

void ChainRunner::audit_site(int g, long from, long to, double cached_delta) {
  const long keep = state_.site_abundance[g];
  state_.site_abundance[g] = from;
  const double before =
      site_local_logdensity(state_, dataset_, plan_.variant, g);
  state_.site_abundance[g] = to;
  const double after =
      site_local_logdensity(state_, dataset_, plan_.variant, g);
  state_.site_abundance[g] = keep;
  const double pure = after - before;
  const bool both_inf = pure == kNegInf && cached_delta == kNegInf;
  if (!both_inf &&
      std::abs(pure - cached_delta) > 1e-8 * std::max(1.0, std::abs(pure)))
    throw std::logic_error("site update delta diverged from reference");
}

void ChainRunner::audit_scalar(ScalarId scalar, double from, double to,
                               double cached_delta) {
  set_scalar(state_, scalar, to);
  const double after = scalar_local_logdensity(state_, dataset_,
                                               plan_.variant, config_.priors,
                                               scalar);
  set_scalar(state_, scalar, from);
  const double before = scalar_local_logdensity(state_, dataset_,
                                                plan_.variant, config_.priors,
                                                scalar);
  const double pure = after - before;
  const bool both_inf = pure == kNegInf && cached_delta == kNegInf;
  if (!both_inf &&
      std::abs(pure - cached_delta) > 1e-8 * std::max(1.0, std::abs(pure)))
    throw std::logic_error("scalar update delta diverged from reference");
}

void ChainRunner::update_site(std::size_t position) {
  const int g = plan_.active[position];
  BlockStats& stats = site_stats_[position];
  const int width =
      static_cast<int>(std::lround(std::exp(log_width_[position])));
  long step = rng_.uniform_int(1, std::max(1, width));
  if (rng_.unit() < 0.5) step = -step;
  const double u = rng_.unit();
  ++stats.proposals;
  ++stats.batch_proposals;
  const long from = state_.site_abundance[g];
  const long to = from + step;
  if (to < 0 || (config_.support.max_abundance >= 0 &&
                 to > config_.support.max_abundance))
    return;
  const double delta = site_delta(g, from, to);
  if (config_.audit) audit_site(g, from, to, delta);
  if (!(std::log(u) < delta)) return;
  state_.site_abundance[g] = to;
  sum_n_active_ += to - from;
  const SiteStatic& site = plan_.sites[static_cast<std::size_t>(g)];
  if (site.count_row >= 0)
    sum_nt_ += static_cast<double>(site.t_unmasked) *
               static_cast<double>(to - from);
  ++stats.accepts;
  ++stats.batch_accepts;
}

void ChainRunner::update_site_k(int g) {
  const SiteStatic& site = plan_.sites[static_cast<std::size_t>(g)];
  if (site.val_surveys.empty()) return;
  const AcousticData& ac = *dataset_.acoustic;
  const ValidationData& val = *dataset_.validation;
  const double dn =
      state_.delta * static_cast<double>(state_.site_abundance[g]);
  const double rate = dn + state_.omega;
  const double tp = rate > 0.0 ? dn / rate : 0.0;
  std::vector<double> lw;
  for (int j : site.val_surveys) {
    const int v = ac.v(g, j);
    const int n = val.n(g, j);
    const int k = val.k(g, j);
    int to;
    if (tp <= 0.0) {
      to = k;
    } else if (tp >= 1.0) {
      to = v - (n - k);
    } else {
      const int k_min =
          fill_k_logweights(v, n, k, std::log(tp), std::log1p(-tp), lw);
      to = k_min + static_cast<int>(rng_.categorical_from_log(lw));
    }
    sum_k_[static_cast<std::size_t>(g)] += to - state_.true_calls(g, j);
    state_.true_calls(g, j) = to;
  }
}

void ChainRunner::update_scalar(std::size_t s) {
  const ScalarId scalar = plan_.scalars[s];
  BlockStats& stats = scalar_stats_[s];
  const double from = get_scalar(state_, scalar);

  if (grid_idx_[s] >= 0) {
    // Uniform draw over the other atoms: symmetric, and mixes in O(1) sweeps
    // even on long grids, which keeps enumeration cross-checks cheap.
    const auto& grid = grid_of(config_.support, scalar);
    const long others = static_cast<long>(grid.size()) - 1;
    ++stats.proposals;
    ++stats.batch_proposals;
    if (others < 1) return;  // single-atom grid pins the scalar
    long to_idx = rng_.uniform_int(0, others - 1);
    if (to_idx >= grid_idx_[s]) ++to_idx;
    const double u = rng_.unit();
    const double to = grid[static_cast<std::size_t>(to_idx)];
    const double delta =
        scalar_local(scalar, to) - scalar_local(scalar, from);
    if (config_.audit && delta == delta)
      audit_scalar(scalar, from, to, delta);
    if (!(std::log(u) < delta)) return;
    set_scalar(state_, scalar, to);
    grid_idx_[s] = static_cast<int>(to_idx);
    ++stats.accepts;
    ++stats.batch_accepts;
    return;
  }

  const Transform tf = transform_of(scalar);
  const double noise = std::exp(log_sd_[s]) * rng_.normal();
  const double u = rng_.unit();
  ++stats.proposals;
  ++stats.batch_proposals;
  double to, jacobian;
  switch (tf) {
    case Transform::kLog: {
      to = from * std::exp(noise);
      if (!(to > 0.0) || !std::isfinite(to)) return;
      jacobian = std::log(to) - std::log(from);
      break;
    }
    case Transform::kLogit: {
      const double x = logit(from) + noise;
      if (!std::isfinite(x)) return;
      to = inv_logit(x);
      if (!(to > 0.0) || !(to < 1.0)) return;
      jacobian = std::log(to) + std::log1p(-to) - std::log(from) -
                 std::log1p(-from);
      break;
    }
    default: {
      to = from + noise;
      if (!std::isfinite(to)) return;
      jacobian = 0.0;
      break;
    }
  }
  const double local_delta =
      scalar_local(scalar, to) - scalar_local(scalar, from);
  if (config_.audit && local_delta == local_delta)
    audit_scalar(scalar, from, to, local_delta);
  if (!(std::log(u) < local_delta + jacobian)) return;
  set_scalar(state_, scalar, to);
  ++stats.accepts;
  ++stats.batch_accepts;
}

void ChainRunner::adapt_step(int batch_number) {
  const double nudge =
      std::min(0.05, 1.0 / std::sqrt(static_cast<double>(batch_number)));
  for (std::size_t i = 0; i < site_stats_.size(); ++i) {
    BlockStats& stats = site_stats_[i];
    if (stats.batch_proposals > 0) {
      const double rate = static_cast<double>(stats.batch_accepts) /
                          static_cast<double>(stats.batch_proposals);
      log_width_[i] += rate > config_.target_accept ? nudge : -nudge;
      log_width_[i] =
          std::clamp(log_width_[i], 0.0, std::log(kMaxSiteWalkWidth));
    }
    stats.batch_proposals = 0;
    stats.batch_accepts = 0;
  }
  for (std::size_t s = 0; s < scalar_stats_.size(); ++s) {
    BlockStats& stats = scalar_stats_[s];
    if (grid_idx_[s] < 0 && stats.batch_proposals > 0) {
      const double rate = static_cast<double>(stats.batch_accepts) /
                          static_cast<double>(stats.batch_proposals);
      log_sd_[s] += rate > config_.target_accept ? nudge : -nudge;
      log_sd_[s] = std::clamp(log_sd_[s], std::log(1e-4), std::log(50.0));
    }
    stats.batch_proposals = 0;
    stats.batch_accepts = 0;
  }
}

void ChainRunner::record(std::vector<std::vector<double>>& draws, int slot) {
  std::size_t col = 0;
  for (ScalarId scalar : plan_.scalars)
    draws[col++][static_cast<std::size_t>(slot)] = get_scalar(state_, scalar);
  for (int g : plan_.active)
    draws[col++][static_cast<std::size_t>(slot)] =
        static_cast<double>(state_.site_abundance[g]);
  draws[col][static_cast<std::size_t>(slot)] =
      posterior_logdensity(state_, dataset_, plan_.variant, config_.priors)
          .value;
}

void ChainRunner::run(std::vector<std::vector<double>>& draws,
                      std::vector<double>& acceptance,
                      const std::function<void(int)>& on_progress) {
  prepare();

  const int start = config_.burn_in + config_.adapt;
  int batch_number = 0;
  int slot = 0;
  for (int iter = 0; iter < config_.iterations; ++iter) {
    const bool adapting = iter < config_.adapt;
    for (std::size_t i = 0; i < plan_.active.size(); ++i) update_site(i);
    if (plan_.use_validation)
      for (int g = 0; g < dataset_.design.num_acoustic_sites; ++g)
        update_site_k(g);
    for (std::size_t s = 0; s < plan_.scalars.size(); ++s) update_scalar(s);
    if (adapting && (iter + 1) % kAdaptBatch == 0) adapt_step(++batch_number);
    if (iter + 1 == config_.adapt) {
      // Freeze proposals; report acceptance over the frozen phase only.
      for (BlockStats& stats : site_stats_) {
        stats.proposals = 0;
        stats.accepts = 0;
      }
      for (BlockStats& stats : scalar_stats_) {
        stats.proposals = 0;
        stats.accepts = 0;
      }
    }
    if (iter >= start && (iter - start + 1) % config_.thin == 0 &&
        slot < config_.retained_per_chain())
      record(draws, slot++);
    if (on_progress &&
        ((iter + 1) % 200 == 0 || iter + 1 == config_.iterations))
      on_progress(iter + 1);
  }

  // Post-adaptation acceptance rates: scalar blocks then the pooled N block.
  acceptance.assign(plan_.scalars.size() + 1, 0.0);
  for (std::size_t s = 0; s < plan_.scalars.size(); ++s) {
    const BlockStats& stats = scalar_stats_[s];
    acceptance[s] = stats.proposals > 0
                        ? static_cast<double>(stats.accepts) /
                              static_cast<double>(stats.proposals)
                        : 0.0;
  }
  long n_prop = 0;
  long n_acc = 0;
  for (const BlockStats& stats : site_stats_) {
    n_prop += stats.proposals;
    n_acc += stats.accepts;
  }
  acceptance.back() =
      n_prop > 0
          ? static_cast<double>(n_acc) / static_cast<double>(n_prop)
          : 0.0;
}

uint64_t config_digest_of(const Dataset& dataset, ModelVariant variant,
                          const McmcConfig& config) {
  Fnv1a64 h;
  h.str("mcmc-config-v1");
  h.u64(dataset_digest(dataset));
  h.str(variant_name(variant));
  h.i64(config.chains);
  h.i64(config.iterations);
  h.i64(config.burn_in);
  h.i64(config.adapt);
  h.i64(config.thin);
  h.u64(config.seed);
  h.f64(config.target_accept);
  h.i64(config.abundance == AbundanceKind::kConstant ? 0 : 1);
  const Priors& pr = config.priors;
  for (double x : {pr.delta_min, pr.delta_max, pr.omega_min, pr.omega_max,
                   pr.lambda_min, pr.lambda_max, pr.alpha1_min, pr.alpha1_max,
                   pr.p_min, pr.p_max, pr.alpha0_mean, pr.alpha0_variance,
                   pr.alpha0_min, pr.alpha0_max, pr.beta_mean,
                   pr.beta_variance, pr.beta_min, pr.beta_max})
    h.f64(x);
  h.i64(config.support.max_abundance);
  for (const auto* grid :
       {&config.support.lambda_grid, &config.support.beta0_grid,
        &config.support.beta1_grid, &config.support.alpha0_grid,
        &config.support.alpha1_grid, &config.support.delta_grid,
        &config.support.omega_grid, &config.support.p_grid}) {
    h.u64(grid->size());
    for (double x : *grid) h.f64(x);
  }
  return h.value();
}

}  // namespace

ChainOutput run(const Dataset& dataset, ModelVariant variant,
                const McmcConfig& config) {
  config.validate();
  if (variant_uses_acoustic(variant) && !dataset.acoustic)
    throw ValidationError("variant requires acoustic data");
  if (variant_uses_validation(variant) && !dataset.validation)
    throw ValidationError("variant requires validation data");
  if (variant_uses_counts(variant) && !dataset.counts)
    throw ValidationError("variant requires point-count data");
  if (config.abundance == AbundanceKind::kLogLinear &&
      dataset.covariate.empty())
    throw ConfigError("log-linear abundance requires a site covariate");

  const SharedPlan plan = build_plan(dataset, variant, config);

  ChainOutput out;
  out.seed = config.seed;
  out.iterations = config.iterations;
  out.burn_in = config.burn_in;
  out.adapt = config.adapt;
  out.thin = config.thin;
  out.retained_per_chain = config.retained_per_chain();
  out.config_digest = config_digest_of(dataset, variant, config);
  for (ScalarId scalar : plan.scalars) {
    out.parameter_names.emplace_back(scalar_name(scalar));
    out.block_names.emplace_back(scalar_name(scalar));
  }
  out.num_scalars = static_cast<int>(plan.scalars.size());
  out.block_names.emplace_back("N");
  for (int g : plan.active)
    out.parameter_names.push_back("N[" + std::to_string(g) + "]");
  out.parameter_names.emplace_back("log_density");

  const std::size_t num_params = out.parameter_names.size();
  const std::size_t retained =
      static_cast<std::size_t>(out.retained_per_chain);
  out.draws.assign(
      static_cast<std::size_t>(config.chains),
      std::vector<std::vector<double>>(num_params,
                                       std::vector<double>(retained, 0.0)));
  out.acceptance_rates.assign(static_cast<std::size_t>(config.chains), {});

  std::mutex progress_mutex;
  auto progress_cb = [&](int chain, int done) {
    std::lock_guard<std::mutex> lock(progress_mutex);
    config.progress(chain, done,
                    static_cast<double>(done) /
                        static_cast<double>(config.iterations));
  };

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_chain = [&](int chain) {
    try {
      ChainRunner runner(plan, chain);
      std::function<void(int)> hook;
      if (config.progress)
        hook = [&, chain](int done) { progress_cb(chain, done); };
      runner.run(out.draws[static_cast<std::size_t>(chain)],
                 out.acceptance_rates[static_cast<std::size_t>(chain)], hook);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  const int workers = std::max(1, std::min(config.workers, config.chains));
  if (workers == 1) {
    for (int chain = 0; chain < config.chains; ++chain) run_chain(chain);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int chain = next.fetch_add(1); chain < config.chains;
             chain = next.fetch_add(1))
          run_chain(chain);
      });
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace chorus
