#include "chorus/study.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>
#include <tuple>

#include "chorus/digest.hpp"
#include "chorus/simulate.hpp"

namespace chorus {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int variant_rank(const std::string& name) {
  if (name == "AV") return 0;
  if (name == "C") return 1;
  if (name == "AC") return 2;
  if (name == "ACV") return 3;
  return 4;
}

std::tuple<int, int, int> fit_key(const FitRecord& rec) {
  return {rec.scenario, variant_rank(rec.variant), rec.replicate};
}

// Scalars in reporting order; only names present in the record are emitted.
const std::vector<std::string>& canonical_parameters() {
  static const std::vector<std::string> names = {
      "lambda", "beta0", "beta1", "alpha0", "alpha1",
      "delta",  "omega", "p",     "N_total"};
  return names;
}

std::map<std::string, double> scalar_truth(const TruthRecord& truth) {
  std::map<std::string, double> out;
  if (truth.abundance.kind == AbundanceKind::kConstant) {
    out["lambda"] = truth.abundance.lambda;
  } else {
    out["beta0"] = truth.abundance.beta0;
    out["beta1"] = truth.abundance.beta1;
  }
  out["alpha0"] = truth.alpha0;
  out["alpha1"] = truth.alpha1;
  out["delta"] = truth.delta;
  out["omega"] = truth.omega;
  out["p"] = truth.p;
  return out;
}

// Keep only the entries a variant's fit actually reports, and add the
// variant-specific latent total.
std::map<std::string, double> truth_for_variant(
    const std::map<std::string, double>& scalars, const TruthRecord& truth,
    const SurveyDesign& design, ModelVariant variant) {
  std::map<std::string, double> out;
  for (const auto& [name, value] : scalars) {
    if ((name == "alpha0" || name == "alpha1" || name == "delta" ||
         name == "omega") &&
        !variant_uses_acoustic(variant))
      continue;
    if (name == "p" && !variant_uses_counts(variant)) continue;
    out[name] = value;
  }
  long total = 0;
  for (int g : active_sites(design, variant))
    total += truth.site_abundance[static_cast<std::size_t>(g)];
  out["N_total"] = static_cast<double>(total);
  return out;
}

struct WorkQueue {
  std::atomic<std::size_t> next{0};
};

void run_tasks(std::size_t count, int workers,
               const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  WorkQueue queue;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = queue.next.fetch_add(1); i < count;
         i = queue.next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(workers, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void check_common(const StudyOptions& options) {
  if (options.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (options.shard_count < 1 || options.shard_index < 0 ||
      options.shard_index >= options.shard_count)
    throw ConfigError("shard must satisfy 0 <= index < count");
  if (options.workers < 1) throw ConfigError("workers must be >= 1");
}

std::set<std::tuple<int, int, int>> completed_keys(
    const std::vector<FitRecord>& completed) {
  std::set<std::tuple<int, int, int>> keys;
  for (const FitRecord& rec : completed) keys.insert(fit_key(rec));
  return keys;
}

}  // namespace

uint64_t sub_seed(uint64_t master, std::string_view label, uint64_t a,
                  uint64_t b, uint64_t c) {
  Fnv1a64 h;
  h.str(label);
  uint64_t seed = RngStream::derive_stream(master, h.value());
  seed = RngStream::derive_stream(seed, a);
  seed = RngStream::derive_stream(seed, b);
  seed = RngStream::derive_stream(seed, c);
  return seed;
}

FitRecord fit_one(const Dataset& dataset, ModelVariant variant,
                  const McmcConfig& config, int scenario,
                  std::string scenario_label, int replicate,
                  std::map<std::string, double> truth) {
  FitRecord rec;
  rec.scenario = scenario;
  rec.scenario_label = std::move(scenario_label);
  rec.variant = std::string(variant_name(variant));
  rec.replicate = replicate;
  rec.data_digest = dataset_digest(dataset);
  rec.truth = std::move(truth);

  const auto started = std::chrono::steady_clock::now();
  try {
    const ChainOutput out = run(dataset, variant, config);
    std::vector<PosteriorSummary> scalar_summaries;
    for (int s = 0; s < out.num_scalars; ++s) {
      const std::string& name = out.parameter_names[static_cast<std::size_t>(s)];
      const PosteriorSummary summary =
          summarize(out.parameter_chains(name));
      rec.summaries[name] = summary;
      scalar_summaries.push_back(summary);
    }
    // Total latent abundance over the variant's active sites.
    const std::size_t n_sites =
        out.parameter_names.size() - static_cast<std::size_t>(out.num_scalars) - 1;
    std::vector<std::vector<double>> totals(out.draws.size());
    for (std::size_t chain = 0; chain < out.draws.size(); ++chain) {
      const auto& chain_draws = out.draws[chain];
      std::vector<double>& sums = totals[chain];
      sums.assign(chain_draws.front().size(), 0.0);
      for (std::size_t s = 0; s < n_sites; ++s) {
        const auto& row =
            chain_draws[static_cast<std::size_t>(out.num_scalars) + s];
        for (std::size_t d = 0; d < row.size(); ++d) sums[d] += row[d];
      }
    }
    rec.summaries["N_total"] = summarize(totals);
    rec.converged = converged(scalar_summaries, kConvergedRhat);
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.converged = false;
    rec.error = e.what();
    rec.summaries.clear();
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return rec;
}

std::vector<FitRecord> run_grid_study(const StudyOptions& options) {
  check_common(options);
  if (options.variants.empty()) throw ConfigError("no variants selected");
  const std::vector<ScenarioSpec> grid = scenario_grid();
  std::vector<int> scenarios = options.scenario_indices;
  if (scenarios.empty()) {
    scenarios.resize(grid.size());
    std::iota(scenarios.begin(), scenarios.end(), 0);
  }
  for (int s : scenarios)
    if (s < 0 || s >= static_cast<int>(grid.size()))
      throw ConfigError("scenario index " + std::to_string(s) +
                        " outside the grid");

  const auto done = completed_keys(options.completed);
  struct Task {
    int scenario;
    int replicate;
    ModelVariant variant;
  };
  std::vector<Task> tasks;
  for (int s : scenarios)
    for (int r = 0; r < options.replicates; ++r) {
      if (r % options.shard_count != options.shard_index) continue;
      for (ModelVariant v : options.variants) {
        FitRecord probe;
        probe.scenario = s;
        probe.variant = std::string(variant_name(v));
        probe.replicate = r;
        if (done.count(fit_key(probe))) continue;
        tasks.push_back({s, r, v});
      }
    }

  std::vector<FitRecord> results(tasks.size());
  std::mutex cb_mutex;
  run_tasks(tasks.size(), options.workers, [&](std::size_t idx) {
    const Task& task = tasks[idx];
    ScenarioSpec spec = grid[static_cast<std::size_t>(task.scenario)];
    spec.seed = sub_seed(options.master_seed, "data",
                         static_cast<uint64_t>(task.scenario),
                         static_cast<uint64_t>(task.replicate));
    const auto [dataset, truth] = simulate_complete(spec);

    McmcConfig config = options.mcmc;
    config.abundance = AbundanceKind::kConstant;
    config.seed = sub_seed(options.master_seed, "fit",
                           static_cast<uint64_t>(task.scenario),
                           static_cast<uint64_t>(task.replicate),
                           static_cast<uint64_t>(task.variant));

    const GridCellLabel label = grid_cell_label(task.scenario);
    std::string label_str = "sites=" + std::to_string(label.total_sites) +
                            ",R=" + std::to_string(label.num_acoustic) +
                            ",I=" + std::to_string(label.num_count) +
                            ",T=" + std::to_string(label.count_surveys) +
                            ",alpha1=" + std::to_string(label.alpha1) +
                            ",lambda=" + std::to_string(label.lambda);
    FitRecord rec = fit_one(
        dataset, task.variant, config, task.scenario, std::move(label_str),
        task.replicate,
        truth_for_variant(scalar_truth(truth), truth, dataset.design,
                          task.variant));
    if (options.on_fit) {
      std::lock_guard<std::mutex> lock(cb_mutex);
      options.on_fit(rec);
    }
    results[idx] = std::move(rec);
  });

  std::vector<FitRecord> all = options.completed;
  all.insert(all.end(), std::make_move_iterator(results.begin()),
             std::make_move_iterator(results.end()));
  sort_fits(all);
  return all;
}

std::vector<FitRecord> run_pointcount_sweep(const StudyOptions& options) {
  check_common(options);
  const std::vector<ScenarioSpec> specs = covariate_experiment_specs();
  const ScenarioSpec full_spec = specs.back();
  const std::vector<int> sizes = covariate_subset_sizes();
  const int full_size = full_spec.design.num_count_sites;

  const auto done = completed_keys(options.completed);
  struct Task {
    int replicate;
    int size;
  };
  std::vector<Task> tasks;
  for (int r = 0; r < options.replicates; ++r) {
    if (r % options.shard_count != options.shard_index) continue;
    for (int m : sizes) {
      FitRecord probe;
      probe.scenario = m;
      probe.variant = "AC";
      probe.replicate = r;
      if (done.count(fit_key(probe))) continue;
      tasks.push_back({r, m});
    }
  }

  std::vector<FitRecord> results(tasks.size());
  std::mutex cb_mutex;
  run_tasks(tasks.size(), options.workers, [&](std::size_t idx) {
    const Task& task = tasks[idx];
    ScenarioSpec spec = full_spec;
    spec.seed = sub_seed(options.master_seed, "sweep-data",
                         static_cast<uint64_t>(task.replicate));
    const auto [full, truth] = simulate_complete(spec);

    Dataset dataset = full;
    if (task.size < full_size) {
      RngStream subset_rng(
          sub_seed(options.master_seed, "subset",
                   static_cast<uint64_t>(task.replicate),
                   static_cast<uint64_t>(task.size)),
          0);
      std::vector<int> pool(static_cast<std::size_t>(full_size));
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < task.size; ++i) {
        const long j =
            subset_rng.uniform_int(i, static_cast<long>(full_size) - 1);
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[static_cast<std::size_t>(j)]);
      }
      std::vector<int> keep(pool.begin(), pool.begin() + task.size);
      std::sort(keep.begin(), keep.end());
      dataset = restrict_counts(full, keep);
    }

    McmcConfig config = options.mcmc;
    config.abundance = AbundanceKind::kLogLinear;
    config.seed = sub_seed(options.master_seed, "fit-sweep",
                           static_cast<uint64_t>(task.replicate),
                           static_cast<uint64_t>(task.size));

    FitRecord rec = fit_one(
        dataset, ModelVariant::kAC, config, task.size,
        "point_counts=" + std::to_string(task.size), task.replicate,
        truth_for_variant(scalar_truth(truth), truth, dataset.design,
                          ModelVariant::kAC));
    if (options.on_fit) {
      std::lock_guard<std::mutex> lock(cb_mutex);
      options.on_fit(rec);
    }
    results[idx] = std::move(rec);
  });

  std::vector<FitRecord> all = options.completed;
  all.insert(all.end(), std::make_move_iterator(results.begin()),
             std::make_move_iterator(results.end()));
  sort_fits(all);
  return all;
}

void sort_fits(std::vector<FitRecord>& fits) {
  std::stable_sort(fits.begin(), fits.end(),
                   [](const FitRecord& a, const FitRecord& b) {
                     return fit_key(a) < fit_key(b);
                   });
}

std::vector<FitRecord> merge_fits(std::vector<FitRecord> a,
                                  const std::vector<FitRecord>& b) {
  a.insert(a.end(), b.begin(), b.end());
  sort_fits(a);
  std::set<std::tuple<int, int, int>> seen;
  std::vector<FitRecord> out;
  out.reserve(a.size());
  for (FitRecord& rec : a)
    if (seen.insert(fit_key(rec)).second) out.push_back(std::move(rec));
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<FitRecord>& fits) {
  std::vector<FitRecord> sorted = fits;
  sort_fits(sorted);

  std::vector<AggregateRow> rows;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].scenario == sorted[i].scenario &&
           sorted[j].variant == sorted[i].variant)
      ++j;
    const int total = static_cast<int>(j - i);
    int n_converged = 0;
    for (std::size_t r = i; r < j; ++r)
      if (sorted[r].converged) ++n_converged;

    for (const std::string& param : canonical_parameters()) {
      bool present = false;
      for (std::size_t r = i; r < j; ++r)
        if (sorted[r].summaries.count(param)) {
          present = true;
          break;
        }
      if (!present) continue;

      AggregateRow row;
      row.scenario = sorted[i].scenario;
      row.scenario_label = sorted[i].scenario_label;
      row.variant = sorted[i].variant;
      row.parameter = param;
      row.fits = total;
      row.converged_fits = n_converged;
      row.converged_fraction =
          total > 0 ? static_cast<double>(n_converged) /
                          static_cast<double>(total)
                    : kNaN;

      std::vector<double> biases;
      std::vector<double> widths;
      int covered = 0;
      int with_truth = 0;
      bool any_absolute = false;
      for (std::size_t r = i; r < j; ++r) {
        const FitRecord& rec = sorted[r];
        if (!rec.converged) continue;
        const auto found = rec.summaries.find(param);
        if (found == rec.summaries.end()) continue;
        const PosteriorSummary& summary = found->second;
        widths.push_back(summary.ci_width);
        const auto truth_it = rec.truth.find(param);
        if (truth_it != rec.truth.end()) {
          bool absolute = false;
          biases.push_back(
              relative_bias_pct(summary.median, truth_it->second, &absolute));
          any_absolute = any_absolute || absolute;
          ++with_truth;
          if (summary.ci_lower <= truth_it->second &&
              truth_it->second <= summary.ci_upper)
            ++covered;
        }
      }
      if (!widths.empty()) row.median_ci_width = quantile(widths, 0.5);
      if (!biases.empty()) {
        row.median_bias = quantile(biases, 0.5);
        row.bias_is_absolute = any_absolute;
      }
      if (with_truth > 0)
        row.coverage =
            static_cast<double>(covered) / static_cast<double>(with_truth);
      rows.push_back(std::move(row));
    }
    i = j;
  }
  return rows;
}

}  // namespace chorus
