#pragma once

#include <string>
#include <vector>

#include "multimix/types.hpp"

namespace multimix {

// Linear predictors eta(i, j) = x_i . beta_k(j, :) for the J non-baseline
// categories. The baseline predictor is identically zero.
Matrix linear_predictors(const Matrix& x, const Matrix& beta_k);

// Log category probabilities for one observation under component k:
// log g_j = eta_j - log(1 + sum_l exp(eta_l)), computed with a max shift so
// nothing overflows for any finite eta.
Vector log_category_probabilities(const Matrix& beta_k,
                                  const Eigen::Ref<const Vector>& x_i);
Vector category_probabilities(const Matrix& beta_k,
                              const Eigen::Ref<const Vector>& x_i);

// log f(y_i | theta) = log_coef_i + sum_j y_ij log theta_j, 0*log 0 = 0.
// theta_j = 0 with y_ij > 0 gives -inf (a valid log probability).
double log_multinomial_pmf(const Eigen::Ref<const Vector>& y_i, double s_i,
                           const Eigen::Ref<const Vector>& theta,
                           double log_coef_i);

// n x K matrix of log f(y_i | g_ik). Shared by the likelihood, the E-step and
// the allocation sampler.
Matrix component_loglik_matrix(const MixtureParams& params,
                               const Dataset& data);

// sum_i log sum_k pi_k f(y_i | g_ik), inner sum via log-sum-exp.
double observed_log_likelihood(const MixtureParams& params,
                               const Dataset& data);

// Row-normalizes log(pi_k) + log f(y_i | g_ik) into membership probabilities.
// A row where every component has log weight -inf is a degeneracy error.
Responsibilities responsibilities_from_log_scores(const Matrix& log_scores);
Responsibilities e_step(const MixtureParams& params, const Dataset& data);

// argmax_k w_ik; ties go to the lowest component index.
AllocationVector map_classification(const Responsibilities& w);

// Q = sum_i sum_k w_ik { log pi_k + log c_i + sum_j y_ij log g_ikj },
// with 0 * (-inf) = 0 whenever w_ik = 0.
double expected_complete_loglik(const MixtureParams& params,
                                const Responsibilities& w,
                                const Dataset& data);

// Component-k part of Q that depends on beta_k (up to a beta-free constant):
// sum_i w_ik sum_j y_ij log g_ikj.
double q_component_value(const Matrix& beta_k,
                         const Eigen::Ref<const Vector>& w_col,
                         const Dataset& data);

// d Q / d beta_kjp = sum_i w_ik (y_ij - S_i g_ikj) x_ip.
// Block layout (j, p) -> j*P + p; full gradient is k-major.
Vector q_gradient_block(const Matrix& beta_k,
                        const Eigen::Ref<const Vector>& w_col,
                        const Dataset& data);
Vector q_gradient(const std::vector<Matrix>& beta, const Responsibilities& w,
                  const Dataset& data);

// JP x JP block of the Q Hessian for component k:
// H[(j,p),(j',p')] = -sum_i S_i w_ik x_ip x_ip' g_ikj (delta_jj' - g_ikj').
Matrix q_hessian_block(const Matrix& beta_k,
                       const Eigen::Ref<const Vector>& w_col,
                       const Dataset& data);

// One warning per row with S_i < 2K - 1 plus a summary line; never an error.
std::vector<std::string> identifiability_check(const Dataset& data, int K);

}  // namespace multimix
