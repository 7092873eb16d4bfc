#pragma once

#include <cstdint>
#include <vector>

#include "multimix/em.hpp"
#include "multimix/model.hpp"
#include "multimix/rng.hpp"
#include "multimix/types.hpp"

namespace multimix::mcmc {

struct PriorConfig {
  double nu2 = 100.0;          // variance of the normal prior on coefficients
  std::vector<double> alphas;  // per-chain Dirichlet concentration, chain 1 first
};

// Ladder used for prior tempering: alpha_1 = 1/200 and
// alpha_c = 1/200 + exp(2 + 12 (c-2)/(C-2)) / 4000 for c = 2..C.
std::vector<double> default_alphas(int n_chains);

struct MCMCConfig {
  int k_max = 20;
  int n_chains = 8;            // nChains
  long warm_up = 48000;        // warm_up
  int cycles = 2600;           // mcmc_cycles
  int iter_per_cycle = 20;     // iter_per_cycle
  int check_ar = 500;          // checkAR
  double ar_low = 0.15;        // ar_low
  double ar_high = 0.25;       // ar_up
  int burn_cycles = 100;       // burn
  double tau0 = 0.00035;       // tau
  int thin = 1;
  bool with_random_permutation = true;  // withRandom
};

// One tempered chain. The payload (z, pi, beta and the cached likelihood)
// moves between chains on a swap; tau, the prior concentration and the RNG
// stream stay with the chain.
struct ChainState {
  AllocationVector z;
  Vector pi;                 // k_max weights
  std::vector<Matrix> beta;  // k_max blocks of J x P
  double cached_loglik = 0.0;  // complete-data log-likelihood at (z, beta)
  double log_target = 0.0;     // unnormalized log joint posterior of (z, pi, beta)

  double tau = 0.00035;
  double alpha = 0.005;
  Rng rng;
  long accepts = 0;
  long proposals = 0;
  long nonfinite_proposals = 0;
  long window_accepts = 0;
  long window_count = 0;
};

struct TraceRecord {
  AllocationVector z;
  Vector pi;
  std::vector<Matrix> beta;
  int k0 = 0;
  double log_target = 0.0;
};

struct SamplerTrace {
  std::vector<TraceRecord> records;  // target chain, post-burn-in, thinned
  std::vector<int> k0;               // alive-component counts per record
  int k_max = 0;
  int n = 0;
  int J = 0;
  int P = 0;
  double mala_acceptance = 0.0;  // target chain, main phase
  double swap_acceptance = 0.0;
  long nonfinite_proposals = 0;
  std::vector<double> final_taus;
};

// z_i ~ categorical with log weights log pi_k + log f(y_i | g_ik).
AllocationVector sample_allocations(const ChainState& state,
                                    const Dataset& data, Rng& rng);

// pi ~ Dirichlet(alpha_1 + n_1, ..., alpha_K + n_K) via normalized gammas.
Vector sample_weights(const AllocationVector& z,
                      const std::vector<double>& alphas, Rng& rng);

// Complete-data log-likelihood given the allocations; optionally also the
// gradient of the log full conditional of beta (likelihood part minus
// beta / nu^2), flattened k-major.
double complete_loglik(const std::vector<Matrix>& beta,
                       const AllocationVector& z, const Dataset& data,
                       double nu2, Vector* grad);

// d log f(beta | ...) / d beta_kjp
//   = sum_{i: z_i = k} (y_ij - S_i g_ikj) x_ip - beta_kjp / nu^2.
Vector log_posterior_gradient(const ChainState& state, const Dataset& data,
                              double nu2);

double log_normal_prior(const Vector& beta_flat, double nu2);

// Symmetric Dirichlet log density; weights are clamped at 1e-300 before
// evaluation so boundary values stay finite for alpha < 1.
double log_dirichlet_density(const Vector& pi, double alpha);

// Unnormalized log joint posterior of (z, pi, beta) under concentration
// alpha_c; this is the quantity cached in ChainState::log_target.
double chain_log_target(const ChainState& state, const Dataset& data,
                        const PriorConfig& prior);

// Deterministic MALA core: the proposal is
//   beta~ = beta + tau * grad(beta) + sqrt(2 tau) * eps,
// accepted with the Metropolis-Hastings ratio including both Gaussian
// transition densities (covariance 2 tau I). A non-finite proposal target
// counts as a rejection.
struct MalaOutcome {
  bool accepted = false;
  bool nonfinite = false;
  double log_ratio = 0.0;
};
MalaOutcome mala_step_given(ChainState& state, const Dataset& data,
                            const PriorConfig& prior, const Vector& eps,
                            double u);
bool mala_step(ChainState& state, const Dataset& data,
               const PriorConfig& prior, Rng& rng);

// Warm-up tuning: below ar_low shrink tau by 0.9, above ar_high grow by 1/0.9.
double adapt_tau(double tau, double window_acceptance, double ar_low,
                 double ar_high);

int alive_components(const AllocationVector& z, int k_max);

// One swap attempt between a uniformly chosen adjacent pair (c, c+1):
// accepted with the ratio of the two chains' Dirichlet prior densities
// evaluated at the exchanged weight vectors. On acceptance the payloads are
// exchanged; each chain keeps its tau and concentration.
bool swap_move(std::vector<ChainState>& chains, Rng& swap_rng);

// Runs `iters` sweeps of allocation / weight / MALA updates on one chain;
// during warm-up (adapt = true) tau is retuned every check_ar iterations.
void run_chain_iterations(ChainState& state, const Dataset& data,
                          const PriorConfig& prior, const MCMCConfig& config,
                          long iters, bool adapt);

// Chain initialization from the selected EM fit: components 1..K take the EM
// solution, the rest start at zero coefficients and floor weight; each chain
// optionally applies an independent random permutation of the labels.
std::vector<ChainState> init_from_em(const em::EMRun& em_run,
                                     const Dataset& data,
                                     const MCMCConfig& config,
                                     const PriorConfig& prior,
                                     std::uint64_t master);

// Random initialization: every chain draws (pi, beta, z) from its prior.
std::vector<ChainState> init_random(const Dataset& data,
                                    const MCMCConfig& config,
                                    const PriorConfig& prior,
                                    std::uint64_t master);

// Prior parallel tempering: warm-up with tau adaptation, then `cycles`
// cycles of iter_per_cycle sweeps per chain with one swap attempt per cycle.
// Records the target chain after burn_cycles, thinned by `thin` cycles.
SamplerTrace run_sampler(const Dataset& data, const MCMCConfig& config,
                         const PriorConfig& prior,
                         std::vector<ChainState> chains, std::uint64_t master,
                         int threads);

}  // namespace multimix::mcmc
