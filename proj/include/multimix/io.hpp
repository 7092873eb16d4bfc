#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "multimix/em.hpp"
#include "multimix/mcmc.hpp"
#include "multimix/relabel.hpp"
#include "multimix/simulate.hpp"
#include "multimix/types.hpp"

// JSON lives in the implementation; tools that need raw documents include
// vendor/json.hpp themselves.

namespace multimix::io {

namespace fs = std::filesystem;

// Shortest round-trip decimal text for a double; all numeric output goes
// through this so byte-identical reruns are possible.
std::string format_double(double v);

// Counts: header y1..y{J+1}. Covariates: header x1..x{P-1}, intercept not
// stored. Labels: header `label`, 1-based. Responsibilities: header w1..wK.
void write_counts_csv(const fs::path& path, const Matrix& y);
Matrix read_counts_csv(const fs::path& path);
void write_covariates_csv(const fs::path& path, const Matrix& x_without_intercept);
Matrix read_covariates_csv(const fs::path& path);
void write_labels_csv(const fs::path& path, const AllocationVector& labels);
AllocationVector read_labels_csv(const fs::path& path);
void write_responsibilities_csv(const fs::path& path, const Responsibilities& w);
Responsibilities read_responsibilities_csv(const fs::path& path);
void write_selection_csv(const fs::path& path, const em::SelectionScores& scores);

void write_params_json(const fs::path& path, const MixtureParams& params);
MixtureParams read_params_json(const fs::path& path);
void write_true_params_json(const fs::path& path, const sim::SimResult& sim);

// Long-format trace: columns iteration,kind,k,j,p,value with 1-based indices.
// kinds: pi (k), beta (k,j,p), z (k = observation), k0, logtarget.
void write_trace_csv(const fs::path& path, const std::vector<mcmc::TraceRecord>& records,
                     int k_max, int n, int J, int P);
mcmc::SamplerTrace read_trace_csv(const fs::path& path);
void write_permutations_csv(const fs::path& path,
                            const std::vector<std::vector<int>>& permutations);
void write_posterior_summary_json(const fs::path& path,
                                  const relabel::PosteriorSummary& summary);
void write_diagnostics_json(const fs::path& path, const mcmc::SamplerTrace& trace);

// Flat key = value file with [em_parameters] and [mcmc_parameters] sections;
// unknown keys are errors. dirPriorAlphas is a comma-separated list.
struct FileConfig {
  em::EMConfig em;
  mcmc::MCMCConfig mcmc;
  double nu2 = 100.0;
  std::vector<double> alphas;  // empty means "derive from nChains"
};
FileConfig parse_config_file(const fs::path& path);
std::string config_snapshot_json(const FileConfig& config);

// [simulate] section with keys n, K, P, categories, nb_r, nb_p, sigma_min,
// sigma_max, spike_prob; unknown keys are errors.
sim::SimConfig parse_sim_config_file(const fs::path& path);

std::string fnv1a_digest(const fs::path& path);

// manifest.json: command, version, seed, threads, config snapshot, input
// digests and wall-clock duration. Everything except the duration is
// deterministic for a given invocation.
void write_manifest(const fs::path& path, const std::string& command,
                    std::uint64_t seed, int threads,
                    const std::string& config_snapshot,
                    const std::map<std::string, std::string>& input_digests,
                    double duration_seconds);

struct LoadOptions {
  bool add_intercept = true;
  bool standardize = false;
  int baseline = 0;  // 1-based category to rotate to the last position; 0 = keep
};

// Assembles a Dataset from a counts file and an optional covariates file.
Dataset load_dataset(const fs::path& counts_path,
                     const fs::path& covariates_path,  // empty: intercept only
                     const LoadOptions& options);

}  // namespace multimix::io
