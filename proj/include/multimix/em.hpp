#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "multimix/model.hpp"
#include "multimix/types.hpp"

namespace multimix::em {

// Strategy for the beta update in the M-step. Auto picks Analytic for an
// intercept-only design (P = 1) and Newton otherwise.
enum class MStepMode { kAuto, kAnalytic, kNewton };

struct EMConfig {
  int max_iter = 100;        // maxIter
  double threshold = 1e-8;   // emthreshold, on the observed log-likelihood
  int max_nr = 10;           // maxNR
  int t_split = 16;          // tsplit: total small-EM starts
  int m_split = 10;          // msplit: iterations per small-EM start
  bool use_split_schemes = true;  // split
  double r0 = 0.1;           // R0: initial ridge step-control value
  double split_beta_a = 1.0;
  double split_beta_b = 1.0;
  MStepMode m_step = MStepMode::kAuto;
  // Explicit partition of t_split across split/shake/random starts; any
  // negative value means "derive from t_split".
  int m_split_count = -1;
  int m_shake_count = -1;
  int m_random_count = -1;

  // Partition rule: with the split schemes enabled, split gets ceil(t/3),
  // shake ceil of the remainder's half, random the rest - 16 -> (6,5,5),
  // 24 -> (8,8,8). With them disabled everything is random.
  struct Partition {
    int split, shake, random;
  };
  Partition partition() const;
};

// Per-component state of the ridge-stabilized Newton-Raphson update.
struct NewtonState {
  Matrix beta_k;        // J x P
  double R = 0.1;       // step-size control; smaller means larger steps
  double alpha = 0.0;   // last ridge shift lambda1 + R * ||grad||
  double lambda1 = 0.0; // largest eigenvalue of the last Hessian block
  double q_value = 0.0; // component-restricted Q at beta_k
  bool skipped = false; // update skipped (singular ridge system)
};

struct EMRun {
  MixtureParams params;
  Responsibilities resp;
  std::vector<double> loglik_trace;
  bool converged = false;
  int n_iter = 0;
  std::vector<int> empty_components;  // "effectively fewer components"
  std::vector<std::string> diagnostics;

  double loglik() const {
    return loglik_trace.empty() ? -std::numeric_limits<double>::infinity()
                                : loglik_trace.back();
  }
};

struct SelectionRow {
  int K = 0;
  double loglik = 0.0;
  int d_K = 0;
  double bic = 0.0;
  double icl = 0.0;
};

struct SelectionScores {
  std::vector<SelectionRow> rows;
  int selected_K = 0;  // argmin ICL
};

// pi_k = (1/n) sum_i w_ik.
Vector m_step_weights(const Responsibilities& w);

// Analytic M-step for the intercept-only model:
// theta_kj = sum_i w_ik y_ij / sum_i w_ik S_i. A component whose weighted
// replicate total vanishes is reported in `empty` and gets a uniform row.
struct NoCovariateMStep {
  Matrix theta;  // K x (J+1)
  std::vector<int> empty;
};
NoCovariateMStep m_step_no_covariates(const Responsibilities& w,
                                      const Dataset& data);

// Largest eigenvalue of a symmetric matrix by shifted power iteration
// (relative tolerance 1e-6). An overestimate is safe here: it only enlarges
// the ridge shift.
double largest_eigenvalue(const Matrix& H);

// Ridge-stabilized Newton-Raphson on the component-k block:
// beta <- beta - H_alpha^{-1} grad with alpha = lambda1 + R ||grad|| and
// H_alpha = H - alpha I when alpha > 0. Steps that decrease Q are reverted
// with R <- 4R (cap 1e6, at most 5 retries per iteration); steps realizing
// at least 0.75 of the predicted quadratic gain halve R (floor 1e-6).
// A singular ridge system (condition estimate > 1e14) marks the state
// `skipped` and leaves beta unchanged.
NewtonState ridge_newton_raphson(NewtonState state,
                                 const Eigen::Ref<const Vector>& w_col,
                                 const Dataset& data, int max_nr);

// Unsafeguarded Newton updates, kept as the contrast baseline; the Q trace
// may decrease and the iteration stops on a failed solve.
struct PlainNewtonResult {
  Matrix beta_k;
  std::vector<double> q_trace;
};
PlainNewtonResult newton_raphson_plain(Matrix beta_k,
                                       const Eigen::Ref<const Vector>& w_col,
                                       const Dataset& data, int max_nr);

// EM from given starting responsibilities. Alternates the M-steps with the
// E-step until the observed log-likelihood changes by less than `threshold`
// or max_iter is reached. The log-likelihood trace is non-decreasing.
EMRun em_fit(const Dataset& data, int K, const Responsibilities& w_init,
             const EMConfig& config);

// Short multi-start EM runs; each start owns the RNG stream
// (master, kSmallEm, K, start_offset + s). Returns the run with the best
// final log-likelihood; `all_scores` (optional) receives every candidate's
// final log-likelihood in start order.
EMRun small_em_random(const Dataset& data, int K, int count, int T,
                      const EMConfig& config, std::uint64_t master,
                      int start_offset, int threads,
                      std::vector<double>* all_scores = nullptr);

// Splits one non-empty MAP cluster of the (K-1)-component run into two via
// per-row Beta(a, b) fractions.
EMRun small_em_split(const Dataset& data, int K, int count, int T,
                     const EMConfig& config, const EMRun& prev_run,
                     std::uint64_t master, int start_offset, int threads,
                     std::vector<double>* all_scores = nullptr);

// Re-mixes two clusters of an existing K-component run; the incumbent run is
// part of the candidate pool, so the result never loses to it.
EMRun small_em_shake(const Dataset& data, int K, int count, int T,
                     const EMConfig& config, const EMRun& current_run,
                     std::uint64_t master, int start_offset, int threads,
                     std::vector<double>* all_scores = nullptr);

// BIC(K) = -2 loglik + d_K log n;
// ICL(K) = BIC(K) - 2 sum_i sum_k w log w (0 log 0 = 0).
double responsibility_entropy_term(const Responsibilities& w);
SelectionRow score_model(const EMRun& run, const Dataset& data);

struct FitPathResult {
  SelectionScores scores;
  std::vector<EMRun> runs;  // runs[K-1] is the K-component fit
};

// Fits K = 1..k_max sequentially; each K initializes the main EM from the
// best candidate across the configured split/shake/random small-EM rounds.
FitPathResult fit_path(const Dataset& data, int k_max, const EMConfig& config,
                       std::uint64_t master, int threads);

}  // namespace multimix::em
