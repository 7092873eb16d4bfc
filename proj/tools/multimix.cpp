// multimix - clustering engine for replicated multinomial count data with
// covariates: EM with ridge-stabilized Newton-Raphson and split/shake/random
// initialization, and an overfitting Bayesian mixture sampled by
// MALA-within-Gibbs under prior parallel tempering.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "multimix/io.hpp"
#include "multimix/metrics.hpp"
#include "multimix/version.hpp"

namespace {

using namespace multimix;
namespace fs = std::filesystem;

struct GlobalOptions {
  std::uint64_t seed = 1;
  int threads = 0;  // 0: MULTIMIX_THREADS env var, else 1
  std::string out_dir;
};

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MULTIMIX_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

struct FitInputs {
  std::string counts;
  std::string covariates;
  bool no_intercept = false;
  bool standardize = false;
  int baseline = 0;
  std::string config_file;
};

void add_fit_inputs(CLI::App* cmd, FitInputs& inputs) {
  cmd->add_option("--counts", inputs.counts, "Counts CSV (header y1..y{J+1})")
      ->required();
  cmd->add_option("--covariates", inputs.covariates,
                  "Covariates CSV (header; intercept added automatically)");
  cmd->add_flag("--no-intercept", inputs.no_intercept,
                "Do not add an intercept column");
  cmd->add_flag("--standardize", inputs.standardize,
                "Scale non-intercept covariates to zero mean, unit variance");
  cmd->add_option("--baseline", inputs.baseline,
                  "1-based category used as the baseline (rotated last)");
  cmd->add_option("--config", inputs.config_file,
                  "Key-value config file ([em_parameters]/[mcmc_parameters])");
}

Dataset load_fit_dataset(const FitInputs& inputs,
                         std::map<std::string, std::string>& digests) {
  io::LoadOptions options;
  options.add_intercept = !inputs.no_intercept;
  options.standardize = inputs.standardize;
  options.baseline = inputs.baseline;
  digests["counts"] = io::fnv1a_digest(inputs.counts);
  if (!inputs.covariates.empty())
    digests["covariates"] = io::fnv1a_digest(inputs.covariates);
  if (!inputs.config_file.empty())
    digests["config"] = io::fnv1a_digest(inputs.config_file);
  return io::load_dataset(inputs.counts,
                          inputs.covariates.empty() ? fs::path()
                                                    : fs::path(inputs.covariates),
                          options);
}

io::FileConfig load_file_config(const FitInputs& inputs) {
  if (inputs.config_file.empty()) return io::FileConfig{};
  return io::parse_config_file(inputs.config_file);
}

void write_em_outputs(const fs::path& out, const Dataset& data,
                      const em::FitPathResult& fit) {
  io::write_selection_csv(out / "selection.csv", fit.scores);
  for (const auto& run : fit.runs)
    io::write_params_json(
        out / ("params_K" + std::to_string(run.params.K()) + ".json"),
        run.params);
  const em::EMRun& best = fit.runs[fit.scores.selected_K - 1];
  io::write_responsibilities_csv(out / "responsibilities.csv", best.resp);
  AllocationVector map = map_classification(best.resp);
  io::write_labels_csv(out / "map_clustering.csv", map);

  std::vector<int> sizes = map.occupancy(best.params.K());
  nlohmann::ordered_json summary;
  summary["selected_K"] = fit.scores.selected_K;
  summary["cluster_sizes"] = sizes;
  summary["loglik"] = best.loglik();
  summary["converged"] = best.converged;
  summary["n_iter"] = best.n_iter;
  summary["diagnostics"] = best.diagnostics;
  std::ofstream out_json(out / "em_summary.json");
  out_json << summary.dump(2) << "\n";

  for (const auto& warning : identifiability_check(data, fit.scores.selected_K))
    std::cerr << "warning: " << warning << "\n";
}

int cmd_simulate(const GlobalOptions& global, const sim::SimConfig& base_config) {
  Stopwatch timer;
  sim::SimConfig config = base_config;
  config.seed = global.seed;
  sim::SimResult result = sim::simulate_dataset(config);
  const fs::path out(global.out_dir);
  fs::create_directories(out);
  io::write_counts_csv(out / "counts.csv", result.data.y);
  if (config.P > 1)
    io::write_covariates_csv(out / "covariates.csv",
                             result.data.x.rightCols(config.P - 1));
  io::write_labels_csv(out / "true_labels.csv", result.labels);
  io::write_true_params_json(out / "true_params.json", result);

  nlohmann::ordered_json snapshot;
  snapshot["simulate"] = {{"n", config.n},         {"K", config.K},
                          {"P", config.P},         {"categories", config.n_categories},
                          {"nb_r", config.nb_r},   {"nb_p", config.nb_p},
                          {"sigma_min", config.sigma_min},
                          {"sigma_max", config.sigma_max},
                          {"spike_prob", config.spike_prob}};
  io::write_manifest(out / "manifest.json", "simulate", global.seed, 1,
                     snapshot.dump(), {}, timer.seconds());
  std::cout << "wrote dataset (n=" << config.n << ", K=" << config.K
            << ") to " << out.string() << "\n";
  return 0;
}

int cmd_fit_em(const GlobalOptions& global, const FitInputs& inputs, int kmax) {
  Stopwatch timer;
  const int threads = resolve_threads(global.threads);
  std::map<std::string, std::string> digests;
  Dataset data = load_fit_dataset(inputs, digests);
  io::FileConfig config = load_file_config(inputs);
  em::FitPathResult fit =
      em::fit_path(data, kmax, config.em, global.seed, threads);
  const fs::path out(global.out_dir);
  fs::create_directories(out);
  write_em_outputs(out, data, fit);
  nlohmann::ordered_json snapshot =
      nlohmann::ordered_json::parse(io::config_snapshot_json(config));
  snapshot["kmax"] = kmax;
  io::write_manifest(out / "manifest.json", "fit-em", global.seed, threads,
                     snapshot.dump(), digests, timer.seconds());
  std::cout << "selected K = " << fit.scores.selected_K << " by ICL\n";
  return 0;
}

int cmd_fit_mcmc(const GlobalOptions& global, const FitInputs& inputs, int kmax,
                 int em_kmax, bool init_from_em, int thin, double level) {
  Stopwatch timer;
  const int threads = resolve_threads(global.threads);
  std::map<std::string, std::string> digests;
  Dataset data = load_fit_dataset(inputs, digests);
  io::FileConfig config = load_file_config(inputs);
  config.mcmc.k_max = kmax;
  config.mcmc.thin = thin;
  mcmc::PriorConfig prior;
  prior.nu2 = config.nu2;
  prior.alphas = config.alphas.empty()
                     ? mcmc::default_alphas(config.mcmc.n_chains)
                     : config.alphas;

  const fs::path out(global.out_dir);
  fs::create_directories(out);
  std::vector<mcmc::ChainState> chains;
  if (init_from_em) {
    em::FitPathResult fit =
        em::fit_path(data, em_kmax, config.em, global.seed, threads);
    write_em_outputs(out / "em_init", data, fit);
    chains = mcmc::init_from_em(fit.runs[fit.scores.selected_K - 1], data,
                                config.mcmc, prior, global.seed);
  } else {
    chains = mcmc::init_random(data, config.mcmc, prior, global.seed);
  }
  mcmc::SamplerTrace trace = mcmc::run_sampler(data, config.mcmc, prior,
                                               std::move(chains), global.seed,
                                               threads);
  io::write_trace_csv(out / "trace_raw.csv", trace.records, trace.k_max,
                      trace.n, trace.J, trace.P);
  AllocationVector pivot = relabel::select_pivot(trace);
  relabel::RelabeledTrace relabeled = relabel::ecr_relabel(trace, pivot);
  io::write_trace_csv(out / "trace_relabeled.csv", relabeled.records,
                      relabeled.k_max, relabeled.n, relabeled.J, relabeled.P);
  io::write_permutations_csv(out / "permutations.csv", relabeled.permutations);
  relabel::PosteriorSummary summary = relabel::summarize(relabeled, level);
  io::write_posterior_summary_json(out / "posterior_summary.json", summary);
  io::write_diagnostics_json(out / "diagnostics.json", trace);

  nlohmann::ordered_json snapshot =
      nlohmann::ordered_json::parse(io::config_snapshot_json(config));
  snapshot["kmax"] = kmax;
  snapshot["init_from_em"] = init_from_em;
  if (init_from_em) snapshot["em_kmax"] = em_kmax;
  snapshot["thin"] = thin;
  snapshot["level"] = level;
  io::write_manifest(out / "manifest.json", "fit-mcmc", global.seed, threads,
                     snapshot.dump(), digests, timer.seconds());
  std::cout << "posterior mode of the number of clusters: " << summary.modal_k0
            << " (probability "
            << io::format_double(summary.k0_distribution.at(summary.modal_k0))
            << ")\n";
  return 0;
}

int cmd_relabel(const GlobalOptions& global, const std::string& trace_dir,
                const std::string& pivot_file) {
  Stopwatch timer;
  const fs::path in(trace_dir);
  std::map<std::string, std::string> digests;
  digests["trace_raw"] = io::fnv1a_digest(in / "trace_raw.csv");
  mcmc::SamplerTrace trace = io::read_trace_csv(in / "trace_raw.csv");
  AllocationVector pivot = pivot_file.empty()
                               ? relabel::select_pivot(trace)
                               : io::read_labels_csv(pivot_file);
  relabel::RelabeledTrace relabeled = relabel::ecr_relabel(trace, pivot);
  const fs::path out(global.out_dir);
  fs::create_directories(out);
  io::write_trace_csv(out / "trace_relabeled.csv", relabeled.records,
                      relabeled.k_max, relabeled.n, relabeled.J, relabeled.P);
  io::write_permutations_csv(out / "permutations.csv", relabeled.permutations);
  nlohmann::ordered_json snapshot;
  snapshot["trace_dir"] = trace_dir;
  snapshot["pivot"] = pivot_file.empty() ? "auto" : pivot_file;
  io::write_manifest(out / "manifest.json", "relabel", global.seed, 1,
                     snapshot.dump(), digests, timer.seconds());
  std::cout << "relabeled " << relabeled.records.size() << " iterations\n";
  return 0;
}

int cmd_summarize(const GlobalOptions& global, const std::string& trace_dir,
                  const std::string& pivot_file, double level) {
  Stopwatch timer;
  const fs::path in(trace_dir);
  std::map<std::string, std::string> digests;
  digests["trace_raw"] = io::fnv1a_digest(in / "trace_raw.csv");
  mcmc::SamplerTrace trace = io::read_trace_csv(in / "trace_raw.csv");
  AllocationVector pivot = pivot_file.empty()
                               ? relabel::select_pivot(trace)
                               : io::read_labels_csv(pivot_file);
  relabel::RelabeledTrace relabeled = relabel::ecr_relabel(trace, pivot);
  relabel::PosteriorSummary summary = relabel::summarize(relabeled, level);
  const fs::path out(global.out_dir);
  fs::create_directories(out);
  io::write_posterior_summary_json(out / "posterior_summary.json", summary);
  nlohmann::ordered_json snapshot;
  snapshot["trace_dir"] = trace_dir;
  snapshot["pivot"] = pivot_file.empty() ? "auto" : pivot_file;
  snapshot["level"] = level;
  io::write_manifest(out / "manifest.json", "summarize", global.seed, 1,
                     snapshot.dump(), digests, timer.seconds());
  std::cout << "posterior mode of the number of clusters: " << summary.modal_k0
            << "\n";
  return 0;
}

int cmd_ari(const std::string& file_a, const std::string& file_b) {
  AllocationVector a = io::read_labels_csv(file_a);
  AllocationVector b = io::read_labels_csv(file_b);
  std::cout << io::format_double(metrics::adjusted_rand_index(a, b)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimix: mixtures of multinomial logit models (EM and MCMC)"};
  app.set_version_flag("--version", std::string(multimix::kVersion));
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Master RNG seed")->capture_default_str();
  app.add_option("--threads", global.threads,
                 "Worker threads (0: MULTIMIX_THREADS env var, else 1)")
      ->capture_default_str();
  app.fallthrough();  // global flags may follow the subcommand

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim::SimConfig sim_config;
  std::string sim_config_file;
  sim_cmd->add_option("--config", sim_config_file,
                      "Config file with a [simulate] section (flags override)");
  auto* opt_n = sim_cmd->add_option("--n", sim_config.n, "Observations")
                    ->capture_default_str();
  auto* opt_k = sim_cmd->add_option("--k", sim_config.K, "Clusters")
                    ->capture_default_str();
  auto* opt_p = sim_cmd->add_option("--p", sim_config.P, "Covariates incl. intercept")
                    ->capture_default_str();
  auto* opt_cat = sim_cmd->add_option("--categories", sim_config.n_categories,
                                      "Categories J+1")
                      ->capture_default_str();
  auto* opt_nbr = sim_cmd->add_option("--nb-r", sim_config.nb_r,
                                      "Negative binomial size")
                      ->capture_default_str();
  auto* opt_nbp = sim_cmd->add_option("--nb-p", sim_config.nb_p,
                                      "Negative binomial probability")
                      ->capture_default_str();
  auto* opt_smin = sim_cmd->add_option("--sigma-min", sim_config.sigma_min,
                                       "Coefficient scale lower bound")
                       ->capture_default_str();
  auto* opt_smax = sim_cmd->add_option("--sigma-max", sim_config.sigma_max,
                                       "Coefficient scale upper bound")
                       ->capture_default_str();
  auto* opt_spike = sim_cmd->add_option("--spike-prob", sim_config.spike_prob,
                                        "Probability of an exactly-zero coefficient")
                        ->capture_default_str();
  sim_cmd->add_option("--out", global.out_dir, "Output directory")->required();

  // fit-em
  auto* em_cmd = app.add_subcommand("fit-em", "Maximum likelihood path K = 1..Kmax");
  FitInputs em_inputs;
  int em_kmax_opt = 10;
  add_fit_inputs(em_cmd, em_inputs);
  em_cmd->add_option("--kmax", em_kmax_opt, "Largest number of components")
      ->capture_default_str();
  em_cmd->add_option("--out", global.out_dir, "Output directory")->required();

  // fit-mcmc
  auto* mcmc_cmd =
      app.add_subcommand("fit-mcmc", "Overfitting Bayesian mixture sampler");
  FitInputs mcmc_inputs;
  int mcmc_kmax = 20;
  int mcmc_em_kmax = 10;
  bool init_from_em = false;
  int thin = 1;
  double mcmc_level = 0.95;
  add_fit_inputs(mcmc_cmd, mcmc_inputs);
  mcmc_cmd->add_option("--kmax", mcmc_kmax, "Overfitting component bound")
      ->capture_default_str();
  mcmc_cmd->add_flag("--init-from-em", init_from_em,
                     "Run the EM path first and seed the chains from it");
  mcmc_cmd->add_option("--em-kmax", mcmc_em_kmax,
                       "Largest K for the initializing EM path")
      ->capture_default_str();
  mcmc_cmd->add_option("--thin", thin, "Keep every thin-th cycle")
      ->capture_default_str();
  mcmc_cmd->add_option("--level", mcmc_level, "Credible level for summaries")
      ->capture_default_str();
  mcmc_cmd->add_option("--out", global.out_dir, "Output directory")->required();

  // relabel
  auto* relabel_cmd =
      app.add_subcommand("relabel", "Undo label switching on a saved trace");
  std::string trace_dir, pivot_file;
  relabel_cmd->add_option("--trace", trace_dir, "Directory with trace_raw.csv")
      ->required();
  relabel_cmd->add_option("--pivot", pivot_file, "Pivot labels CSV (default: auto)");
  relabel_cmd->add_option("--out", global.out_dir, "Output directory")->required();

  // summarize
  auto* summarize_cmd =
      app.add_subcommand("summarize", "Posterior summaries from a saved trace");
  std::string sum_trace_dir, sum_pivot_file;
  double level = 0.95;
  summarize_cmd->add_option("--trace", sum_trace_dir, "Directory with trace_raw.csv")
      ->required();
  summarize_cmd->add_option("--pivot", sum_pivot_file, "Pivot labels CSV");
  summarize_cmd->add_option("--level", level, "Credible level")
      ->capture_default_str();
  summarize_cmd->add_option("--out", global.out_dir, "Output directory")->required();

  // ari
  auto* ari_cmd = app.add_subcommand("ari", "Adjusted Rand index of two label files");
  std::string ari_a, ari_b;
  ari_cmd->add_option("labels-a", ari_a, "First labels CSV")->required();
  ari_cmd->add_option("labels-b", ari_b, "Second labels CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) {
      if (!sim_config_file.empty()) {
        sim::SimConfig from_file = io::parse_sim_config_file(sim_config_file);
        if (opt_n->count() == 0) sim_config.n = from_file.n;
        if (opt_k->count() == 0) sim_config.K = from_file.K;
        if (opt_p->count() == 0) sim_config.P = from_file.P;
        if (opt_cat->count() == 0) sim_config.n_categories = from_file.n_categories;
        if (opt_nbr->count() == 0) sim_config.nb_r = from_file.nb_r;
        if (opt_nbp->count() == 0) sim_config.nb_p = from_file.nb_p;
        if (opt_smin->count() == 0) sim_config.sigma_min = from_file.sigma_min;
        if (opt_smax->count() == 0) sim_config.sigma_max = from_file.sigma_max;
        if (opt_spike->count() == 0) sim_config.spike_prob = from_file.spike_prob;
      }
      return cmd_simulate(global, sim_config);
    }
    if (em_cmd->parsed()) return cmd_fit_em(global, em_inputs, em_kmax_opt);
    if (mcmc_cmd->parsed())
      return cmd_fit_mcmc(global, mcmc_inputs, mcmc_kmax, mcmc_em_kmax,
                          init_from_em, thin, mcmc_level);
    if (relabel_cmd->parsed()) return cmd_relabel(global, trace_dir, pivot_file);
    if (summarize_cmd->parsed())
      return cmd_summarize(global, sum_trace_dir, sum_pivot_file, level);
    if (ari_cmd->parsed()) return cmd_ari(ari_a, ari_b);
    return 2;
  } catch (const multimix::invalid_input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const multimix::degeneracy_error& e) {
    std::cerr << "numerical degeneracy: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
