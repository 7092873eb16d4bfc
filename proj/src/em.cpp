#include "multimix/em.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "multimix/numeric.hpp"
#include "multimix/parallel.hpp"
#include "multimix/rng.hpp"

namespace multimix::em {

namespace {

constexpr double kRFloor = 1e-6;
constexpr double kRCap = 1e6;
constexpr double kGradTol = 1e-10;
constexpr double kCondLimit = 1e14;
constexpr double kEmptyWeight = 1e-10;
constexpr double kThetaFloor = 1e-300;

// beta for the intercept-only model from category probabilities:
// beta_kj = log(theta_kj / theta_k(J+1)), zeros floored to stay finite.
Matrix beta_from_theta_row(const Eigen::Ref<const Vector>& theta) {
  const int J = static_cast<int>(theta.size()) - 1;
  Matrix beta(J, 1);
  double base = std::max(theta(J), kThetaFloor);
  for (int j = 0; j < J; ++j)
    beta(j, 0) = std::log(std::max(theta(j), kThetaFloor) / base);
  return beta;
}

}  // namespace

EMConfig::Partition EMConfig::partition() const {
  if (m_split_count >= 0 && m_shake_count >= 0 && m_random_count >= 0)
    return {m_split_count, m_shake_count, m_random_count};
  if (!use_split_schemes) return {0, 0, t_split};
  int split = (t_split + 2) / 3;
  int rest = t_split - split;
  int shake = (rest + 1) / 2;
  return {split, shake, rest - shake};
}

Vector m_step_weights(const Responsibilities& w) {
  if (w.n() < 1) throw invalid_input_error("m-step weights: empty input");
  return w.w.colwise().mean();
}

NoCovariateMStep m_step_no_covariates(const Responsibilities& w,
                                      const Dataset& data) {
  const int K = w.K();
  const int C = data.categories();
  NoCovariateMStep out;
  out.theta.resize(K, C);
  for (int k = 0; k < K; ++k) {
    double denom = (w.w.col(k).array() * data.s.array()).sum();
    if (denom <= 0.0) {
      out.empty.push_back(k);
      out.theta.row(k).setConstant(1.0 / C);
      continue;
    }
    for (int j = 0; j < C; ++j)
      out.theta(k, j) = (w.w.col(k).array() * data.y.col(j).array()).sum() / denom;
  }
  return out;
}

double largest_eigenvalue(const Matrix& H) {
  const int m = static_cast<int>(H.rows());
  if (m == 0) return 0.0;
  if (m == 1) return H(0, 0);
  // Gershgorin shift makes the target eigenvalue the dominant one.
  double c = H.cwiseAbs().rowwise().sum().maxCoeff();
  if (c == 0.0) return 0.0;
  Vector v = Vector::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
  double mu = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Vector u = H * v + c * v;
    double norm = u.norm();
    if (norm == 0.0) {  // v happens to be a null vector of the shifted matrix
      v.setZero();
      v(it % m) = 1.0;
      continue;
    }
    v = u / norm;
    double mu_new = v.dot(H * v);
    if (std::abs(mu_new - mu) <= 1e-6 * std::max(1.0, std::abs(mu_new))) {
      return mu_new;
    }
    mu = mu_new;
  }
  // Unconverged: return the Gershgorin upper bound, which only increases the
  // ridge shift.
  return c;
}

NewtonState ridge_newton_raphson(NewtonState state,
                                 const Eigen::Ref<const Vector>& w_col,
                                 const Dataset& data, int max_nr) {
  const int J = data.J();
  const int P = data.P();
  state.skipped = false;
  state.q_value = q_component_value(state.beta_k, w_col, data);
  for (int m = 0; m < max_nr; ++m) {
    Vector g = q_gradient_block(state.beta_k, w_col, data);
    double gnorm = g.norm();
    if (gnorm < kGradTol) break;
    Matrix H = q_hessian_block(state.beta_k, w_col, data);
    state.lambda1 = largest_eigenvalue(H);
    bool stepped = false;
    for (int attempt = 0; attempt < 5; ++attempt) {
      state.alpha = state.lambda1 + state.R * gnorm;
      Matrix H_alpha = H;
      if (state.alpha > 0.0)
        H_alpha.diagonal().array() -= state.alpha;
      Eigen::LDLT<Matrix> ldlt(H_alpha);
      bool solvable = ldlt.info() == Eigen::Success;
      if (solvable) {
        Vector d = ldlt.vectorD().cwiseAbs();
        double dmax = d.maxCoeff();
        double dmin = d.minCoeff();
        if (!(dmin > 0.0) || dmax / dmin > kCondLimit) solvable = false;
      }
      Vector step;
      if (solvable) {
        step = -ldlt.solve(g);
        if (!step.allFinite()) solvable = false;
      }
      if (!solvable) {
        state.R = std::min(state.R * 4.0, kRCap);
        continue;
      }
      Matrix beta_new(J, P);
      for (int j = 0; j < J; ++j)
        for (int p = 0; p < P; ++p) beta_new(j, p) = state.beta_k(j, p) + step(j * P + p);
      double q_new = q_component_value(beta_new, w_col, data);
      if (std::isfinite(q_new) && q_new >= state.q_value) {
        double predicted = g.dot(step) + 0.5 * step.dot(H * step);
        if (predicted > 0.0 && q_new - state.q_value >= 0.75 * predicted)
          state.R = std::max(state.R / 2.0, kRFloor);
        state.beta_k = beta_new;
        state.q_value = q_new;
        stepped = true;
        break;
      }
      state.R = std::min(state.R * 4.0, kRCap);
    }
    if (!stepped) {
      // Every ridge escalation failed or decreased Q; keep the current beta.
      if (state.R >= kRCap) state.skipped = true;
      break;
    }
  }
  return state;
}

PlainNewtonResult newton_raphson_plain(Matrix beta_k,
                                       const Eigen::Ref<const Vector>& w_col,
                                       const Dataset& data, int max_nr) {
  const int J = data.J();
  const int P = data.P();
  PlainNewtonResult out;
  out.q_trace.push_back(q_component_value(beta_k, w_col, data));
  for (int m = 0; m < max_nr; ++m) {
    Vector g = q_gradient_block(beta_k, w_col, data);
    Matrix H = q_hessian_block(beta_k, w_col, data);
    Eigen::LDLT<Matrix> ldlt(H);
    if (ldlt.info() != Eigen::Success) break;
    Vector step = -ldlt.solve(g);
    if (!step.allFinite()) break;
    for (int j = 0; j < J; ++j)
      for (int p = 0; p < P; ++p) beta_k(j, p) += step(j * P + p);
    double q = q_component_value(beta_k, w_col, data);
    out.q_trace.push_back(q);
    if (!std::isfinite(q)) break;
  }
  out.beta_k = beta_k;
  return out;
}

EMRun em_fit(const Dataset& data, int K, const Responsibilities& w_init,
             const EMConfig& config) {
  if (K < 1) throw invalid_input_error("em: K must be >= 1");
  if (w_init.K() != K || w_init.n() != data.n())
    throw invalid_input_error("em: starting responsibilities have wrong shape");
  const int J = data.J();
  const int P = data.P();
  const bool analytic =
      config.m_step == MStepMode::kAnalytic ||
      (config.m_step == MStepMode::kAuto && P == 1);
  if (config.m_step == MStepMode::kAnalytic && P != 1)
    throw invalid_input_error("em: analytic M-step requires an intercept-only design");

  EMRun run;
  run.resp = w_init;
  std::vector<NewtonState> states(K);
  for (int k = 0; k < K; ++k) {
    states[k].beta_k = Matrix::Zero(J, P);
    states[k].R = config.r0;
  }
  MixtureParams params;
  params.pi = Vector::Zero(K);
  params.beta.assign(K, Matrix::Zero(J, P));

  double prev_ll = std::numeric_limits<double>::quiet_NaN();
  std::vector<bool> empty_flag(K, false);
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    params.pi = m_step_weights(run.resp);
    if (analytic) {
      NoCovariateMStep ms = m_step_no_covariates(run.resp, data);
      std::vector<bool> is_empty(K, false);
      for (int k : ms.empty) is_empty[k] = true;
      for (int k = 0; k < K; ++k) {
        if (is_empty[k]) {
          empty_flag[k] = true;  // freeze the previous beta
          continue;
        }
        states[k].beta_k = beta_from_theta_row(ms.theta.row(k).transpose());
      }
    } else {
      for (int k = 0; k < K; ++k) {
        if (run.resp.w.col(k).sum() < kEmptyWeight) {
          empty_flag[k] = true;
          continue;
        }
        states[k] = ridge_newton_raphson(states[k], run.resp.w.col(k), data,
                                         config.max_nr);
        if (states[k].skipped)
          run.diagnostics.push_back(
              "iteration " + std::to_string(iter) + ": Newton update skipped for component " +
              std::to_string(k + 1) + " (singular ridge system)");
      }
    }
    for (int k = 0; k < K; ++k) params.beta[k] = states[k].beta_k;

    double ll = observed_log_likelihood(params, data);
    run.loglik_trace.push_back(ll);
    run.n_iter = iter;
    try {
      run.resp = e_step(params, data);
    } catch (const degeneracy_error& e) {
      throw degeneracy_error(std::string(e.what()) + " (EM iteration " +
                             std::to_string(iter) + ")");
    }
    if (iter >= 2 && std::abs(ll - prev_ll) < config.threshold) {
      run.converged = true;
      break;
    }
    prev_ll = ll;
  }
  run.params = params;
  for (int k = 0; k < K; ++k)
    if (empty_flag[k]) run.empty_components.push_back(k);
  if (!run.empty_components.empty())
    run.diagnostics.push_back(
        "fit has " + std::to_string(run.empty_components.size()) +
        " empty component(s); effectively fewer components than K");
  return run;
}

namespace {

// Shared driver: builds `count` starting responsibilities with `make_start`,
// runs T EM iterations on each, and keeps the best final log-likelihood.
// Candidate index order breaks ties, so scheduling cannot change the result.
EMRun best_of_starts(const Dataset& data, int K, int count, int T,
                     const EMConfig& config, std::uint64_t master,
                     int start_offset, int threads,
                     const std::function<Responsibilities(Rng&)>& make_start,
                     std::vector<double>* all_scores,
                     const EMRun* incumbent) {
  EMConfig short_config = config;
  short_config.max_iter = T;
  std::vector<EMRun> candidates(count);
  parallel_for(count, threads, [&](int s) {
    Rng rng = make_stream(master, StreamTag::kSmallEm, static_cast<std::uint64_t>(K),
                          static_cast<std::uint64_t>(start_offset + s));
    Responsibilities w0 = make_start(rng);
    candidates[s] = em_fit(data, K, w0, short_config);
  });
  const EMRun* best = incumbent;
  if (all_scores && incumbent) all_scores->push_back(incumbent->loglik());
  for (int s = 0; s < count; ++s) {
    if (all_scores) all_scores->push_back(candidates[s].loglik());
    if (!best || candidates[s].loglik() > best->loglik()) best = &candidates[s];
  }
  if (!best) throw internal_error("small-EM: no candidates");
  return *best;
}

}  // namespace

EMRun small_em_random(const Dataset& data, int K, int count, int T,
                      const EMConfig& config, std::uint64_t master,
                      int start_offset, int threads,
                      std::vector<double>* all_scores) {
  if (count < 1) throw invalid_input_error("small-EM: count must be >= 1");
  const int n = data.n();
  auto make_start = [&](Rng& rng) {
    Responsibilities w;
    w.w.resize(n, K);
    for (int i = 0; i < n; ++i) {
      double rowsum = 0.0;
      for (int k = 0; k < K; ++k) {
        w.w(i, k) = uniform01(rng);
        rowsum += w.w(i, k);
      }
      w.w.row(i) /= rowsum;
    }
    return w;
  };
  return best_of_starts(data, K, count, T, config, master, start_offset,
                        threads, make_start, all_scores, nullptr);
}

EMRun small_em_split(const Dataset& data, int K, int count, int T,
                     const EMConfig& config, const EMRun& prev_run,
                     std::uint64_t master, int start_offset, int threads,
                     std::vector<double>* all_scores) {
  if (K < 2) throw invalid_input_error("split small-EM: K must be >= 2");
  if (prev_run.params.K() != K - 1)
    throw invalid_input_error("split small-EM: previous run must have K-1 components");
  AllocationVector map = map_classification(prev_run.resp);
  std::vector<int> occupancy = map.occupancy(K - 1);
  std::vector<int> non_empty;
  for (int k = 0; k < K - 1; ++k)
    if (occupancy[k] > 0) non_empty.push_back(k);
  if (non_empty.empty())
    throw internal_error("split small-EM: no non-empty cluster to split");
  const int n = data.n();
  auto make_start = [&](Rng& rng) {
    int g_star = non_empty[uniform_int(rng, 0, static_cast<int>(non_empty.size()) - 1)];
    Responsibilities w;
    w.w.resize(n, K);
    w.w.leftCols(K - 1) = prev_run.resp.w;
    for (int i = 0; i < n; ++i) {
      double u = beta_draw(rng, config.split_beta_a, config.split_beta_b);
      double mass = prev_run.resp.w(i, g_star);
      w.w(i, g_star) = u * mass;
      w.w(i, K - 1) = (1.0 - u) * mass;
    }
    return w;
  };
  return best_of_starts(data, K, count, T, config, master, start_offset,
                        threads, make_start, all_scores, nullptr);
}

EMRun small_em_shake(const Dataset& data, int K, int count, int T,
                     const EMConfig& config, const EMRun& current_run,
                     std::uint64_t master, int start_offset, int threads,
                     std::vector<double>* all_scores) {
  if (K < 2) throw invalid_input_error("shake small-EM: K must be >= 2");
  if (current_run.params.K() != K)
    throw invalid_input_error("shake small-EM: current run must have K components");
  AllocationVector map = map_classification(current_run.resp);
  const int n = data.n();
  auto make_start = [&](Rng& rng) {
    int k1 = uniform_int(rng, 0, K - 1);
    int k2 = uniform_int(rng, 0, K - 2);
    if (k2 >= k1) ++k2;
    Responsibilities w = current_run.resp;
    for (int i = 0; i < n; ++i) {
      if (map.z[i] != k1 && map.z[i] != k2) continue;
      double u = beta_draw(rng, config.split_beta_a, config.split_beta_b);
      double mass = w.w(i, k1) + w.w(i, k2);
      w.w(i, k1) = u * mass;
      w.w(i, k2) = (1.0 - u) * mass;
    }
    return w;
  };
  return best_of_starts(data, K, count, T, config, master, start_offset,
                        threads, make_start, all_scores, &current_run);
}

double responsibility_entropy_term(const Responsibilities& w) {
  double acc = 0.0;
  for (int i = 0; i < w.n(); ++i)
    for (int k = 0; k < w.K(); ++k) acc += xlogy(w.w(i, k), w.w(i, k));
  return -2.0 * acc;  // >= 0
}

SelectionRow score_model(const EMRun& run, const Dataset& data) {
  SelectionRow row;
  row.K = run.params.K();
  row.loglik = run.loglik();
  row.d_K = (row.K - 1) + row.K * data.J() * data.P();
  row.bic = -2.0 * row.loglik + row.d_K * std::log(static_cast<double>(data.n()));
  row.icl = row.bic + responsibility_entropy_term(run.resp);
  return row;
}

FitPathResult fit_path(const Dataset& data, int k_max, const EMConfig& config,
                       std::uint64_t master, int threads) {
  if (k_max < 1) throw invalid_input_error("fit path: k_max must be >= 1");
  FitPathResult result;
  const int n = data.n();
  const int T = config.m_split;
  EMConfig::Partition part = config.partition();
  for (int K = 1; K <= k_max; ++K) {
    EMRun run;
    if (K == 1) {
      Responsibilities w;
      w.w = Matrix::Ones(n, 1);
      run = em_fit(data, 1, w, config);
    } else {
      const EMRun& prev = result.runs[K - 2];
      int offset = 0;
      bool have_best = false;
      EMRun best;
      if (part.split > 0) {
        best = small_em_split(data, K, part.split, T, config, prev, master,
                              offset, threads);
        have_best = true;
        offset += part.split;
      }
      if (part.shake > 0) {
        // Shake perturbs an existing K-component state; without one (no split
        // rounds configured) these rounds fall back to random starts.
        EMRun cand =
            have_best
                ? small_em_shake(data, K, part.shake, T, config, best, master,
                                 offset, threads)
                : small_em_random(data, K, part.shake, T, config, master,
                                  offset, threads);
        if (!have_best || cand.loglik() > best.loglik()) best = cand;
        have_best = true;
        offset += part.shake;
      }
      if (part.random > 0 || !have_best) {
        int count = std::max(part.random, have_best ? 0 : 1);
        EMRun cand = small_em_random(data, K, count, T, config, master, offset,
                                     threads);
        if (!have_best || cand.loglik() > best.loglik()) best = cand;
        have_best = true;
      }
      run = em_fit(data, K, best.resp, config);
    }
    result.scores.rows.push_back(score_model(run, data));
    result.runs.push_back(std::move(run));
  }
  int best_k = 1;
  for (const auto& row : result.scores.rows)
    if (row.icl < result.scores.rows[best_k - 1].icl) best_k = row.K;
  result.scores.selected_K = best_k;
  return result;
}

}  // namespace multimix::em
