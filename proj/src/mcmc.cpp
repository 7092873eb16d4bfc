#include "multimix/mcmc.hpp"

#include <algorithm>
#include <cmath>

#include "multimix/numeric.hpp"
#include "multimix/parallel.hpp"

namespace multimix::mcmc {

namespace {

constexpr double kPiClamp = 1e-300;
constexpr double kLogTwoPi = 1.8378770664093454836;

MixtureParams state_params(const ChainState& st) {
  MixtureParams p;
  p.pi = st.pi;
  p.beta = st.beta;
  return p;
}

int categorical_from_logs(const std::vector<double>& logw, double u,
                          int row_for_error) {
  const int K = static_cast<int>(logw.size());
  double m = kNegInf;
  for (double v : logw) m = std::max(m, v);
  if (!(m > kNegInf))
    throw degeneracy_error(
        "allocation sampling: all components have zero weight for row " +
        std::to_string(row_for_error + 1));
  double total = 0.0;
  for (double v : logw) total += std::exp(v - m);
  double target = u * total;
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    acc += std::exp(logw[k] - m);
    if (target < acc) return k;
  }
  return K - 1;
}

}  // namespace

std::vector<double> default_alphas(int n_chains) {
  if (n_chains < 1) throw invalid_input_error("alphas: need at least one chain");
  std::vector<double> alphas(n_chains);
  alphas[0] = 1.0 / 200.0;
  for (int c = 2; c <= n_chains; ++c) {
    double frac = n_chains > 2
                      ? static_cast<double>(c - 2) / (n_chains - 2)
                      : 0.0;
    alphas[c - 1] = 1.0 / 200.0 + std::exp(2.0 + 12.0 * frac) / 4000.0;
  }
  return alphas;
}

AllocationVector sample_allocations(const ChainState& state,
                                    const Dataset& data, Rng& rng) {
  const int n = data.n();
  const int K = static_cast<int>(state.pi.size());
  Matrix ll = component_loglik_matrix(state_params(state), data);
  std::vector<double> logpi(K);
  for (int k = 0; k < K; ++k)
    logpi[k] = state.pi(k) > 0.0 ? std::log(state.pi(k)) : kNegInf;
  AllocationVector z;
  z.z.resize(n);
  std::vector<double> logw(K);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) logw[k] = logpi[k] + ll(i, k);
    z.z[i] = categorical_from_logs(logw, uniform01(rng), i);
  }
  return z;
}

Vector sample_weights(const AllocationVector& z,
                      const std::vector<double>& alphas, Rng& rng) {
  const int K = static_cast<int>(alphas.size());
  if (K == 1) return Vector::Ones(1);
  std::vector<int> counts = z.occupancy(K);
  Vector g(K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    g(k) = gamma_draw(rng, alphas[k] + counts[k]);
    total += g(k);
  }
  if (!(total > 0.0))
    throw degeneracy_error("weight sampling: all gamma draws underflowed");
  return g / total;
}

double complete_loglik(const std::vector<Matrix>& beta,
                       const AllocationVector& z, const Dataset& data,
                       double nu2, Vector* grad) {
  const int n = data.n();
  const int J = data.J();
  const int P = data.P();
  const int K = static_cast<int>(beta.size());
  double ll = 0.0;
  if (grad) grad->setZero(static_cast<Eigen::Index>(K) * J * P);
  Vector eta(J), g(J);
  for (int i = 0; i < n; ++i) {
    const int k = z.z[i];
    eta.noalias() = beta[k] * data.x.row(i).transpose();
    double m = 0.0;
    for (int j = 0; j < J; ++j) m = std::max(m, eta(j));
    double sum = std::exp(-m);
    for (int j = 0; j < J; ++j) sum += std::exp(eta(j) - m);
    double lse = m + std::log(sum);
    double dot = 0.0;
    for (int j = 0; j < J; ++j) dot += data.y(i, j) * eta(j);
    ll += data.log_coef(i) + dot - data.s(i) * lse;
    if (grad) {
      for (int j = 0; j < J; ++j) g(j) = std::exp(eta(j) - m) / sum;
      auto block = grad->segment(static_cast<Eigen::Index>(k) * J * P, J * P);
      for (int j = 0; j < J; ++j) {
        double r = data.y(i, j) - data.s(i) * g(j);
        for (int p = 0; p < P; ++p) block(j * P + p) += r * data.x(i, p);
      }
    }
  }
  if (grad) {
    Vector flat(static_cast<Eigen::Index>(K) * J * P);
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < J; ++j)
        for (int p = 0; p < P; ++p) flat((k * J + j) * P + p) = beta[k](j, p);
    *grad -= flat / nu2;
  }
  return ll;
}

Vector log_posterior_gradient(const ChainState& state, const Dataset& data,
                              double nu2) {
  Vector grad;
  complete_loglik(state.beta, state.z, data, nu2, &grad);
  return grad;
}

double log_normal_prior(const Vector& beta_flat, double nu2) {
  const double m = static_cast<double>(beta_flat.size());
  return -0.5 * beta_flat.squaredNorm() / nu2 -
         0.5 * m * (kLogTwoPi + std::log(nu2));
}

double log_dirichlet_density(const Vector& pi, double alpha) {
  const int K = static_cast<int>(pi.size());
  double acc = std::lgamma(alpha * K) - K * std::lgamma(alpha);
  for (int k = 0; k < K; ++k)
    acc += (alpha - 1.0) * std::log(std::max(pi(k), kPiClamp));
  return acc;
}

double chain_log_target(const ChainState& state, const Dataset& data,
                        const PriorConfig& prior) {
  double ll = complete_loglik(state.beta, state.z, data, prior.nu2, nullptr);
  double lz = 0.0;
  for (int zi : state.z.z)
    lz += std::log(std::max(state.pi(zi), kPiClamp));
  MixtureParams p = state_params(state);
  return ll + lz + log_dirichlet_density(state.pi, state.alpha) +
         log_normal_prior(p.flatten(), prior.nu2);
}

MalaOutcome mala_step_given(ChainState& state, const Dataset& data,
                            const PriorConfig& prior, const Vector& eps,
                            double u) {
  const int J = data.J();
  const int P = data.P();
  const int K = static_cast<int>(state.beta.size());
  const double tau = state.tau;
  MalaOutcome out;

  Vector g0;
  double ll0 = complete_loglik(state.beta, state.z, data, prior.nu2, &g0);
  MixtureParams cur = state_params(state);
  Vector b0 = cur.flatten();
  double lp0 = ll0 + log_normal_prior(b0, prior.nu2);

  Vector b1 = b0 + tau * g0 + std::sqrt(2.0 * tau) * eps;
  state.proposals += 1;
  if (!b1.allFinite()) {
    state.nonfinite_proposals += 1;
    state.cached_loglik = ll0;
    out.nonfinite = true;
    out.log_ratio = kNegInf;
    return out;
  }
  std::vector<Matrix> beta1 = MixtureParams::unflatten(b1, K, J, P);
  Vector g1;
  double ll1 = complete_loglik(beta1, state.z, data, prior.nu2, &g1);
  double lp1 = ll1 + log_normal_prior(b1, prior.nu2);
  if (!std::isfinite(lp1)) {
    state.nonfinite_proposals += 1;
    state.cached_loglik = ll0;
    out.nonfinite = true;
    out.log_ratio = kNegInf;
    return out;
  }
  double log_fwd = -(b1 - b0 - tau * g0).squaredNorm() / (4.0 * tau);
  double log_rev = -(b0 - b1 - tau * g1).squaredNorm() / (4.0 * tau);
  out.log_ratio = (lp1 - lp0) + (log_rev - log_fwd);
  if (std::log(u) < out.log_ratio) {
    state.beta = std::move(beta1);
    state.cached_loglik = ll1;
    state.accepts += 1;
    state.window_accepts += 1;
    out.accepted = true;
  } else {
    state.cached_loglik = ll0;
  }
  return out;
}

bool mala_step(ChainState& state, const Dataset& data,
               const PriorConfig& prior, Rng& rng) {
  const Eigen::Index m = static_cast<Eigen::Index>(state.beta.size()) *
                         data.J() * data.P();
  Vector eps(m);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < m; ++i) eps(i) = normal(rng);
  double u = uniform01(rng);
  return mala_step_given(state, data, prior, eps, u).accepted;
}

double adapt_tau(double tau, double window_acceptance, double ar_low,
                 double ar_high) {
  if (window_acceptance < ar_low) return tau * 0.9;
  if (window_acceptance > ar_high) return tau / 0.9;
  return tau;
}

int alive_components(const AllocationVector& z, int k_max) {
  std::vector<int> counts = z.occupancy(k_max);
  int alive = 0;
  for (int c : counts)
    if (c > 0) ++alive;
  return alive;
}

bool swap_move(std::vector<ChainState>& chains, Rng& swap_rng) {
  const int C = static_cast<int>(chains.size());
  if (C < 2) throw invalid_input_error("swap: need at least two chains");
  int c1 = uniform_int(swap_rng, 0, C - 2);
  int c2 = c1 + 1;
  double u = uniform01(swap_rng);
  double la = log_dirichlet_density(chains[c2].pi, chains[c1].alpha);
  double lb = log_dirichlet_density(chains[c1].pi, chains[c2].alpha);
  double lc = log_dirichlet_density(chains[c1].pi, chains[c1].alpha);
  double ld = log_dirichlet_density(chains[c2].pi, chains[c2].alpha);
  double log_ratio = (la + lb) - (lc + ld);
  if (!(std::log(u) < log_ratio)) return false;
  std::swap(chains[c1].z, chains[c2].z);
  std::swap(chains[c1].pi, chains[c2].pi);
  std::swap(chains[c1].beta, chains[c2].beta);
  std::swap(chains[c1].cached_loglik, chains[c2].cached_loglik);
  return true;
}

void run_chain_iterations(ChainState& state, const Dataset& data,
                          const PriorConfig& prior, const MCMCConfig& config,
                          long iters, bool adapt) {
  std::vector<double> alphas(state.pi.size(), state.alpha);
  for (long t = 0; t < iters; ++t) {
    state.z = sample_allocations(state, data, state.rng);
    state.pi = sample_weights(state.z, alphas, state.rng);
    mala_step(state, data, prior, state.rng);
    if (adapt) {
      state.window_count += 1;
      if (state.window_count >= config.check_ar) {
        double rate = static_cast<double>(state.window_accepts) /
                      static_cast<double>(state.window_count);
        state.tau = adapt_tau(state.tau, rate, config.ar_low, config.ar_high);
        state.window_accepts = 0;
        state.window_count = 0;
      }
    }
  }
}

namespace {

ChainState blank_chain(const Dataset& data, const MCMCConfig& config,
                       const PriorConfig& prior, std::uint64_t master, int c) {
  ChainState st;
  st.tau = config.tau0;
  st.alpha = prior.alphas.at(c);
  st.rng = make_stream(master, StreamTag::kChain, static_cast<std::uint64_t>(c));
  st.pi = Vector::Constant(config.k_max, 1.0 / config.k_max);
  st.beta.assign(config.k_max, Matrix::Zero(data.J(), data.P()));
  st.z.z.assign(data.n(), 0);
  return st;
}

void apply_label_permutation(ChainState& st, const std::vector<int>& perm) {
  const int K = static_cast<int>(st.pi.size());
  Vector pi(K);
  std::vector<Matrix> beta(K);
  for (int k = 0; k < K; ++k) {
    pi(perm[k]) = st.pi(k);
    beta[perm[k]] = st.beta[k];
  }
  st.pi = pi;
  st.beta = std::move(beta);
  for (int& zi : st.z.z) zi = perm[zi];
}

}  // namespace

std::vector<ChainState> init_from_em(const em::EMRun& em_run,
                                     const Dataset& data,
                                     const MCMCConfig& config,
                                     const PriorConfig& prior,
                                     std::uint64_t master) {
  const int K_hat = em_run.params.K();
  if (K_hat > config.k_max)
    throw invalid_input_error("init: EM components exceed k_max");
  Vector pi = Vector::Constant(config.k_max,
                               std::numeric_limits<double>::min());
  pi.head(K_hat) = em_run.params.pi;
  pi /= pi.sum();
  AllocationVector z = map_classification(em_run.resp);
  std::vector<ChainState> chains;
  for (int c = 0; c < config.n_chains; ++c) {
    ChainState st = blank_chain(data, config, prior, master, c);
    st.pi = pi;
    for (int k = 0; k < K_hat; ++k) st.beta[k] = em_run.params.beta[k];
    st.z = z;
    if (config.with_random_permutation) {
      Rng perm_rng = make_stream(master, StreamTag::kChainPermutation,
                                 static_cast<std::uint64_t>(c));
      apply_label_permutation(st, random_permutation(perm_rng, config.k_max));
    }
    chains.push_back(std::move(st));
  }
  return chains;
}

std::vector<ChainState> init_random(const Dataset& data,
                                    const MCMCConfig& config,
                                    const PriorConfig& prior,
                                    std::uint64_t master) {
  std::vector<ChainState> chains;
  const double nu = std::sqrt(prior.nu2);
  for (int c = 0; c < config.n_chains; ++c) {
    ChainState st = blank_chain(data, config, prior, master, c);
    AllocationVector empty;
    empty.z.assign(0, 0);
    std::vector<double> alphas(config.k_max, st.alpha);
    st.pi = sample_weights(empty, alphas, st.rng);
    std::normal_distribution<double> normal(0.0, nu);
    for (auto& block : st.beta)
      for (int j = 0; j < block.rows(); ++j)
        for (int p = 0; p < block.cols(); ++p) block(j, p) = normal(st.rng);
    std::vector<double> logpi(config.k_max);
    for (int k = 0; k < config.k_max; ++k)
      logpi[k] = st.pi(k) > 0.0 ? std::log(st.pi(k)) : kNegInf;
    for (int i = 0; i < data.n(); ++i)
      st.z.z[i] = categorical_from_logs(logpi, uniform01(st.rng), i);
    chains.push_back(std::move(st));
  }
  return chains;
}

SamplerTrace run_sampler(const Dataset& data, const MCMCConfig& config,
                         const PriorConfig& prior,
                         std::vector<ChainState> chains, std::uint64_t master,
                         int threads) {
  const int C = static_cast<int>(chains.size());
  if (C < 1) throw invalid_input_error("sampler: need at least one chain");
  if (static_cast<int>(prior.alphas.size()) != C)
    throw invalid_input_error("sampler: one Dirichlet concentration per chain required");
  const double d = static_cast<double>(data.J()) * data.P();
  if (!(prior.alphas[0] < d / 2.0))
    throw invalid_input_error(
        "sampler: target-chain concentration must be below d/2 for overfitting "
        "mixtures");
  for (auto& st : chains)
    st.cached_loglik = complete_loglik(st.beta, st.z, data, prior.nu2, nullptr);

  // Step 0: warm up each chain with tau adaptation, no swaps.
  parallel_for(C, threads, [&](int c) {
    run_chain_iterations(chains[c], data, prior, config, config.warm_up, true);
  });
  for (auto& st : chains) {
    st.accepts = 0;
    st.proposals = 0;
    st.window_accepts = 0;
    st.window_count = 0;
  }

  Rng swap_rng = make_stream(master, StreamTag::kSwap);
  SamplerTrace trace;
  trace.k_max = config.k_max;
  trace.n = data.n();
  trace.J = data.J();
  trace.P = data.P();
  long swap_attempts = 0;
  long swap_accepts = 0;
  for (int cycle = 1; cycle <= config.cycles; ++cycle) {
    parallel_for(C, threads, [&](int c) {
      run_chain_iterations(chains[c], data, prior, config,
                           config.iter_per_cycle, false);
    });
    if (C >= 2) {
      swap_attempts += 1;
      if (swap_move(chains, swap_rng)) swap_accepts += 1;
    }
    if (cycle > config.burn_cycles &&
        (cycle - config.burn_cycles) % config.thin == 0) {
      ChainState& target = chains[0];
      target.log_target = chain_log_target(target, data, prior);
      TraceRecord rec;
      rec.z = target.z;
      rec.pi = target.pi;
      rec.beta = target.beta;
      rec.k0 = alive_components(target.z, config.k_max);
      rec.log_target = target.log_target;
      trace.k0.push_back(rec.k0);
      trace.records.push_back(std::move(rec));
    }
  }
  trace.mala_acceptance =
      chains[0].proposals > 0
          ? static_cast<double>(chains[0].accepts) / chains[0].proposals
          : 0.0;
  trace.swap_acceptance =
      swap_attempts > 0 ? static_cast<double>(swap_accepts) / swap_attempts
                        : 0.0;
  for (const auto& st : chains) {
    trace.final_taus.push_back(st.tau);
    trace.nonfinite_proposals += st.nonfinite_proposals;
  }
  return trace;
}

}  // namespace multimix::mcmc
