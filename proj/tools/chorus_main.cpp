// chorus: simulate, fit, and batch-study integrated acoustic + point-count
// abundance models from the command line.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chorus/diagnostics.hpp"
#include "chorus/digest.hpp"
#include "chorus/io.hpp"
#include "chorus/mcmc.hpp"
#include "chorus/simulate.hpp"
#include "chorus/study.hpp"
#include "chorus/types.hpp"
#include "chorus/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace chorus;

namespace {

std::string join_command(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    const std::string arg = argv[i];
    if (arg.find(' ') != std::string::npos) {
      out += '\'';
      out += arg;
      out += '\'';
    } else {
      out += arg;
    }
  }
  return out;
}

int env_workers() {
  if (const char* env = std::getenv("CHORUS_WORKERS")) {
    const int value = std::atoi(env);
    if (value >= 1) return value;
  }
  return 1;
}

McmcConfig desk_mcmc() {
  McmcConfig config;
  config.chains = 3;
  config.iterations = 4000;
  config.burn_in = 1000;
  config.adapt = 1000;
  config.thin = 2;
  return config;
}

McmcConfig full_scale_mcmc() {
  McmcConfig config;
  config.chains = 3;
  config.iterations = 10000;
  config.burn_in = 3000;
  config.adapt = 5000;
  config.thin = 2;
  return config;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string scenario;  // "grid:K" or "sweep:M"; empty = inline spec
  std::string config_path;
  std::string out_dir;
  int acoustic_sites = 10;
  int count_sites = 10;
  int acoustic_surveys = 5;
  int count_visits = 3;
  double lambda = 3.0;
  double beta0 = 0.0;
  double beta1 = 0.0;
  bool beta_given = false;
  double alpha0 = -2.19;
  double alpha1 = 3.0;
  double delta = 4.0;
  double omega = 3.0;
  double p = 0.5;
  double validation_fraction = 0.2;
  uint64_t seed = 0;
};

ScenarioSpec inline_spec(const SimulateArgs& args) {
  ScenarioSpec spec;
  spec.design.num_acoustic_sites = args.acoustic_sites;
  spec.design.num_count_sites = args.count_sites;
  spec.design.acoustic_surveys = args.acoustic_surveys;
  spec.design.count_surveys = args.count_visits;
  spec.design.site_map.resize(static_cast<std::size_t>(args.count_sites));
  for (int i = 0; i < args.count_sites; ++i)
    spec.design.site_map[static_cast<std::size_t>(i)] = i;
  if (args.beta_given) {
    spec.abundance.kind = AbundanceKind::kLogLinear;
    spec.abundance.beta0 = args.beta0;
    spec.abundance.beta1 = args.beta1;
  } else {
    spec.abundance.kind = AbundanceKind::kConstant;
    spec.abundance.lambda = args.lambda;
  }
  spec.alpha0 = args.alpha0;
  spec.alpha1 = args.alpha1;
  spec.delta = args.delta;
  spec.omega = args.omega;
  spec.p = args.p;
  spec.validation_fraction = args.validation_fraction;
  spec.seed = args.seed;
  return spec;
}

ScenarioSpec named_spec(const std::string& name, uint64_t seed) {
  const auto colon = name.find(':');
  if (colon == std::string::npos)
    throw ConfigError("--scenario must look like grid:INDEX or sweep:SIZE");
  const std::string kind = name.substr(0, colon);
  const int value = std::atoi(name.c_str() + colon + 1);
  if (kind == "grid") {
    const auto grid = scenario_grid();
    if (value < 0 || value >= static_cast<int>(grid.size()))
      throw ConfigError("grid scenario index must lie in [0, " +
                        std::to_string(grid.size()) + ")");
    ScenarioSpec spec = grid[static_cast<std::size_t>(value)];
    spec.seed = seed;
    return spec;
  }
  if (kind == "sweep") {
    for (const ScenarioSpec& spec : covariate_experiment_specs())
      if (spec.design.num_count_sites == value) {
        ScenarioSpec out = spec;
        out.seed = seed;
        return out;
      }
    std::string sizes;
    for (int m : covariate_subset_sizes())
      sizes += (sizes.empty() ? "" : ",") + std::to_string(m);
    throw ConfigError("sweep size must be one of {" + sizes + "}");
  }
  throw ConfigError("unknown scenario kind '" + kind + "'");
}

int cmd_simulate(const SimulateArgs& args, const std::string& command) {
  ScenarioSpec spec = args.scenario.empty()
                          ? inline_spec(args)
                          : named_spec(args.scenario, args.seed);
  spec.validate();

  const auto [dataset, truth] = simulate_complete(spec);

  OutputManifest manifest;
  manifest.command = command;
  manifest.seed = spec.seed;
  json config;
  config["scenario"] = args.scenario.empty() ? "inline" : args.scenario;
  config["acoustic_sites"] = spec.design.num_acoustic_sites;
  config["count_sites"] = spec.design.num_count_sites;
  config["acoustic_surveys"] = spec.design.acoustic_surveys;
  config["count_visits"] = spec.design.count_surveys;
  if (spec.abundance.kind == AbundanceKind::kConstant) {
    config["lambda"] = spec.abundance.lambda;
  } else {
    config["beta0"] = spec.abundance.beta0;
    config["beta1"] = spec.abundance.beta1;
  }
  config["alpha0"] = spec.alpha0;
  config["alpha1"] = spec.alpha1;
  config["delta"] = spec.delta;
  config["omega"] = spec.omega;
  config["p"] = spec.p;
  config["validation_fraction"] = spec.validation_fraction;
  manifest.config_json = config.dump();

  const fs::path dir(args.out_dir);
  const std::string hex = write_manifest(dir, manifest);
  write_dataset(dir, dataset, &truth, hex);
  std::printf("wrote dataset to %s (digest %s)\n", dir.string().c_str(),
              digest_hex(dataset_digest(dataset)).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data_dir;
  std::string out_dir;
  std::string variant = "ACV";
  std::string abundance = "constant";
  int chains = 3;
  int iterations = 4000;
  int burn_in = 1000;
  int adapt = 1000;
  int thin = 2;
  uint64_t seed = 0;
  int workers = 0;  // 0 = CHORUS_WORKERS or 1
  bool allow_nonconverged = false;
  bool audit = false;
};

int cmd_fit(const FitArgs& args, const std::string& command) {
  const Dataset dataset = read_dataset(args.data_dir);
  const ModelVariant variant = variant_from_name(args.variant);

  McmcConfig config;
  config.chains = args.chains;
  config.iterations = args.iterations;
  config.burn_in = args.burn_in;
  config.adapt = args.adapt;
  config.thin = args.thin;
  config.seed = args.seed;
  config.workers = args.workers > 0 ? args.workers : env_workers();
  config.audit = args.audit;
  if (args.abundance == "constant") {
    config.abundance = AbundanceKind::kConstant;
  } else if (args.abundance == "log-linear") {
    config.abundance = AbundanceKind::kLogLinear;
  } else {
    throw ConfigError("--abundance must be constant or log-linear");
  }

  const ChainOutput output = run(dataset, variant, config);

  OutputManifest manifest;
  manifest.command = command;
  manifest.seed = config.seed;
  manifest.inputs["dataset"] = digest_hex(dataset_digest(dataset));
  json cfg;
  cfg["variant"] = args.variant;
  cfg["abundance"] = args.abundance;
  cfg["chains"] = config.chains;
  cfg["iterations"] = config.iterations;
  cfg["burn_in"] = config.burn_in;
  cfg["adapt"] = config.adapt;
  cfg["thin"] = config.thin;
  cfg["config_digest"] = digest_hex(output.config_digest);
  manifest.config_json = cfg.dump();

  const fs::path dir(args.out_dir);
  const std::string hex = write_manifest(dir, manifest);
  write_chain_output(dir, output, hex);

  bool all_converged = true;
  for (int s = 0; s < output.num_scalars; ++s) {
    const std::string& name =
        output.parameter_names[static_cast<std::size_t>(s)];
    const PosteriorSummary summary = summarize(output.parameter_chains(name));
    std::printf("%-8s median %12.5g  CI [%12.5g, %12.5g]  rhat %.4f\n",
                name.c_str(), summary.median, summary.ci_lower,
                summary.ci_upper, summary.rhat);
    if (!(summary.rhat < kConvergedRhat)) all_converged = false;
  }
  std::printf("wrote chains to %s\n", dir.string().c_str());
  if (!all_converged && !args.allow_nonconverged)
    throw ConvergenceError(
        "chains did not converge (scalar R-hat >= 1.1); rerun longer or pass "
        "--allow-nonconverged");
  return 0;
}

// ---------------------------------------------------------------------------
// study

struct StudyArgs {
  std::string kind;  // grid | pointcount-sweep
  std::string out_dir;
  int replicates = 25;
  std::string variants = "AV,C,AC,ACV";
  std::string filter;
  std::string scenarios;  // explicit comma list of grid indices
  std::string shard;      // "i/k"
  uint64_t seed = 0;
  int workers = 0;
  bool resume = false;
  bool full_scale = false;
  int chains = 0;
  int iterations = 0;
  int burn_in = -1;
  int adapt = -1;
  int thin = 0;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    if (end > pos) out.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

std::vector<int> scenarios_from_filter(const std::string& filter) {
  struct Criterion {
    std::string key;
    double value;
  };
  std::vector<Criterion> criteria;
  for (const std::string& pair : split_list(filter)) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--filter entries must look like key=value");
    Criterion c;
    c.key = pair.substr(0, eq);
    c.value = std::atof(pair.c_str() + eq + 1);
    criteria.push_back(std::move(c));
  }
  std::vector<int> indices;
  const int grid_size = static_cast<int>(scenario_grid().size());
  for (int idx = 0; idx < grid_size; ++idx) {
    const GridCellLabel label = grid_cell_label(idx);
    bool ok = true;
    for (const Criterion& c : criteria) {
      double actual;
      if (c.key == "sites") actual = label.total_sites;
      else if (c.key == "R") actual = label.num_acoustic;
      else if (c.key == "I") actual = label.num_count;
      else if (c.key == "T") actual = label.count_surveys;
      else if (c.key == "alpha1") actual = label.alpha1;
      else if (c.key == "lambda") actual = label.lambda;
      else throw ConfigError("unknown filter key '" + c.key + "'");
      if (std::abs(actual - c.value) > 1e-9) {
        ok = false;
        break;
      }
    }
    if (ok) indices.push_back(idx);
  }
  if (indices.empty()) throw ConfigError("--filter matches no scenarios");
  return indices;
}

int cmd_study(const StudyArgs& args, const std::string& command) {
  StudyOptions options;
  options.replicates = args.replicates;
  options.master_seed = args.seed;
  options.workers = args.workers > 0 ? args.workers : env_workers();
  options.mcmc = args.full_scale ? full_scale_mcmc() : desk_mcmc();
  if (args.chains > 0) options.mcmc.chains = args.chains;
  if (args.iterations > 0) options.mcmc.iterations = args.iterations;
  if (args.burn_in >= 0) options.mcmc.burn_in = args.burn_in;
  if (args.adapt >= 0) options.mcmc.adapt = args.adapt;
  if (args.thin > 0) options.mcmc.thin = args.thin;
  options.mcmc.validate();

  if (!args.shard.empty()) {
    int index = 0, count = 0;
    if (std::sscanf(args.shard.c_str(), "%d/%d", &index, &count) != 2)
      throw ConfigError("--shard must look like INDEX/COUNT");
    options.shard_index = index;
    options.shard_count = count;
  }

  options.variants.clear();
  for (const std::string& name : split_list(args.variants))
    options.variants.push_back(variant_from_name(name));

  if (!args.filter.empty() && !args.scenarios.empty())
    throw ConfigError("--filter and --scenarios are mutually exclusive");
  if (!args.filter.empty())
    options.scenario_indices = scenarios_from_filter(args.filter);
  if (!args.scenarios.empty())
    for (const std::string& s : split_list(args.scenarios))
      options.scenario_indices.push_back(std::atoi(s.c_str()));

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);

  OutputManifest manifest;
  manifest.command = command;
  manifest.seed = args.seed;
  json cfg;
  cfg["kind"] = args.kind;
  cfg["replicates"] = options.replicates;
  cfg["variants"] = args.variants;
  cfg["chains"] = options.mcmc.chains;
  cfg["iterations"] = options.mcmc.iterations;
  cfg["burn_in"] = options.mcmc.burn_in;
  cfg["adapt"] = options.mcmc.adapt;
  cfg["thin"] = options.mcmc.thin;
  cfg["shard_index"] = options.shard_index;
  cfg["shard_count"] = options.shard_count;
  if (!options.scenario_indices.empty())
    cfg["scenarios"] = options.scenario_indices;
  manifest.config_json = cfg.dump();
  const std::string hex = write_manifest(dir, manifest);

  const fs::path partial_path = dir / "fits.partial.csv";
  const fs::path fits_path = dir / "fits.csv";
  if (args.resume) {
    if (fs::exists(partial_path))
      options.completed = read_fits(partial_path);
    else if (fs::exists(fits_path))
      options.completed = read_fits(fits_path);
    std::printf("resuming with %zu completed fits\n",
                options.completed.size());
  }

  std::vector<FitRecord> partial = options.completed;
  options.on_fit = [&](const FitRecord& rec) {
    partial.push_back(rec);
    write_fits(partial_path, partial, hex);
    std::printf("fit scenario=%d variant=%s replicate=%d %s%s\n",
                rec.scenario, rec.variant.c_str(), rec.replicate,
                rec.failed ? "FAILED"
                           : (rec.converged ? "converged" : "non-converged"),
                rec.failed ? (": " + rec.error).c_str() : "");
    std::fflush(stdout);
  };

  std::vector<FitRecord> fits;
  if (args.kind == "grid") {
    fits = run_grid_study(options);
  } else if (args.kind == "pointcount-sweep") {
    fits = run_pointcount_sweep(options);
  } else {
    throw ConfigError("study kind must be grid or pointcount-sweep");
  }

  write_fits(fits_path, fits, hex);
  write_aggregates(dir / "aggregates.csv", aggregate(fits), hex);
  std::error_code ec;
  fs::remove(partial_path, ec);

  int n_failed = 0, n_converged = 0;
  for (const FitRecord& rec : fits) {
    if (rec.failed) ++n_failed;
    if (rec.converged) ++n_converged;
  }
  std::printf("study complete: %zu fits, %d converged, %d failed -> %s\n",
              fits.size(), n_converged, n_failed, dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integrated acoustic + point-count abundance modeling"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim_cmd->add_option("--scenario", sim.scenario,
                      "Named scenario: grid:INDEX or sweep:SIZE");
  sim_cmd->add_option("--config", sim.config_path,
                      "JSON file with inline-spec fields");
  sim_cmd->add_option("--acoustic-sites", sim.acoustic_sites);
  sim_cmd->add_option("--count-sites", sim.count_sites);
  sim_cmd->add_option("--acoustic-surveys", sim.acoustic_surveys);
  sim_cmd->add_option("--count-visits", sim.count_visits);
  CLI::Option* lambda_opt = sim_cmd->add_option("--lambda", sim.lambda);
  CLI::Option* beta0_opt = sim_cmd->add_option("--beta0", sim.beta0);
  CLI::Option* beta1_opt = sim_cmd->add_option("--beta1", sim.beta1);
  sim_cmd->add_option("--alpha0", sim.alpha0);
  sim_cmd->add_option("--alpha1", sim.alpha1);
  sim_cmd->add_option("--delta", sim.delta);
  sim_cmd->add_option("--omega", sim.omega);
  sim_cmd->add_option("--p", sim.p);
  sim_cmd->add_option("--validation-fraction", sim.validation_fraction);
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_option("--out", sim.out_dir, "Output directory")->required();

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one model to a dataset");
  fit_cmd->add_option("--data", fit.data_dir, "Dataset directory")
      ->required();
  fit_cmd->add_option("--variant", fit.variant, "AV, C, AC, or ACV");
  fit_cmd->add_option("--abundance", fit.abundance,
                      "constant or log-linear");
  fit_cmd->add_option("--chains", fit.chains);
  fit_cmd->add_option("--iters", fit.iterations);
  fit_cmd->add_option("--burn", fit.burn_in);
  fit_cmd->add_option("--adapt", fit.adapt);
  fit_cmd->add_option("--thin", fit.thin);
  fit_cmd->add_option("--seed", fit.seed);
  fit_cmd->add_option("--workers", fit.workers);
  fit_cmd->add_flag("--allow-nonconverged", fit.allow_nonconverged);
  fit_cmd->add_flag("--audit", fit.audit,
                    "Cross-check incremental updates against reference "
                    "kernels (slow)");
  fit_cmd->add_option("--out", fit.out_dir, "Output directory")->required();

  StudyArgs study;
  CLI::App* study_cmd =
      app.add_subcommand("study", "Run a replicated simulation study");
  study_cmd
      ->add_option("kind", study.kind, "grid or pointcount-sweep")
      ->required();
  study_cmd->add_option("--replicates", study.replicates);
  study_cmd->add_option("--variants", study.variants,
                        "Comma list, e.g. AC,ACV (grid only)");
  study_cmd->add_option("--filter", study.filter,
                        "Scenario filter, e.g. sites=50,alpha1=1.2");
  study_cmd->add_option("--scenarios", study.scenarios,
                        "Comma list of grid indices");
  study_cmd->add_option("--shard", study.shard,
                        "Run replicate shard INDEX/COUNT");
  study_cmd->add_option("--seed", study.seed);
  study_cmd->add_option("--workers", study.workers);
  study_cmd->add_flag("--resume", study.resume,
                      "Skip fits already present in the output directory");
  study_cmd->add_flag("--full-scale", study.full_scale,
                      "Publication-scale chain lengths");
  study_cmd->add_option("--chains", study.chains);
  study_cmd->add_option("--iters", study.iterations);
  study_cmd->add_option("--burn", study.burn_in);
  study_cmd->add_option("--adapt", study.adapt);
  study_cmd->add_option("--thin", study.thin);
  study_cmd->add_option("--out", study.out_dir, "Output directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = join_command(argc, argv);
  try {
    if (sim_cmd->parsed()) {
      if (!sim.config_path.empty()) {
        json j;
        try {
          std::ifstream in(sim.config_path);
          if (!in) throw IoError("cannot open " + sim.config_path);
          j = json::parse(in);
        } catch (const json::exception& e) {
          throw ConfigError(sim.config_path + ": " + e.what());
        }
        // File fills anything the command line did not set explicitly.
        auto set_int = [&](const char* key, int& slot, CLI::Option* opt) {
          if (j.contains(key) && (!opt || opt->count() == 0))
            slot = j.at(key).get<int>();
        };
        auto set_double = [&](const char* key, double& slot,
                              CLI::Option* opt) {
          if (j.contains(key) && (!opt || opt->count() == 0))
            slot = j.at(key).get<double>();
        };
        set_int("acoustic_sites", sim.acoustic_sites,
                sim_cmd->get_option("--acoustic-sites"));
        set_int("count_sites", sim.count_sites,
                sim_cmd->get_option("--count-sites"));
        set_int("acoustic_surveys", sim.acoustic_surveys,
                sim_cmd->get_option("--acoustic-surveys"));
        set_int("count_visits", sim.count_visits,
                sim_cmd->get_option("--count-visits"));
        set_double("lambda", sim.lambda, lambda_opt);
        set_double("beta0", sim.beta0, beta0_opt);
        set_double("beta1", sim.beta1, beta1_opt);
        set_double("alpha0", sim.alpha0, sim_cmd->get_option("--alpha0"));
        set_double("alpha1", sim.alpha1, sim_cmd->get_option("--alpha1"));
        set_double("delta", sim.delta, sim_cmd->get_option("--delta"));
        set_double("omega", sim.omega, sim_cmd->get_option("--omega"));
        set_double("p", sim.p, sim_cmd->get_option("--p"));
        set_double("validation_fraction", sim.validation_fraction,
                   sim_cmd->get_option("--validation-fraction"));
        if (j.contains("seed") && sim_cmd->get_option("--seed")->count() == 0)
          sim.seed = j.at("seed").get<uint64_t>();
        if (j.contains("beta0") || j.contains("beta1")) sim.beta_given = true;
      }
      if (beta0_opt->count() > 0 || beta1_opt->count() > 0)
        sim.beta_given = true;
      if (sim.beta_given && lambda_opt->count() > 0)
        throw ConfigError(
            "--lambda conflicts with --beta0/--beta1 (pick constant or "
            "log-linear abundance)");
      return cmd_simulate(sim, command);
    }
    if (fit_cmd->parsed()) return cmd_fit(fit, command);
    if (study_cmd->parsed()) return cmd_study(study, command);
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
