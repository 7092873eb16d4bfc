#include "multimix/model.hpp"

#include <algorithm>
#include <cmath>

#include "multimix/numeric.hpp"

namespace multimix {

Matrix linear_predictors(const Matrix& x, const Matrix& beta_k) {
  return x * beta_k.transpose();
}

Vector log_category_probabilities(const Matrix& beta_k,
                                  const Eigen::Ref<const Vector>& x_i) {
  if (!beta_k.allFinite() || !x_i.allFinite())
    throw invalid_input_error("category probabilities: non-finite input");
  if (beta_k.cols() != x_i.size())
    throw invalid_input_error("category probabilities: dimension mismatch");
  const int J = static_cast<int>(beta_k.rows());
  Vector eta = beta_k * x_i;  // J predictors; baseline is 0
  double m = 0.0;
  for (int j = 0; j < J; ++j) m = std::max(m, eta(j));
  double sum = std::exp(-m);
  for (int j = 0; j < J; ++j) sum += std::exp(eta(j) - m);
  const double lse = m + std::log(sum);
  Vector logg(J + 1);
  for (int j = 0; j < J; ++j) logg(j) = eta(j) - lse;
  logg(J) = -lse;
  return logg;
}

Vector category_probabilities(const Matrix& beta_k,
                              const Eigen::Ref<const Vector>& x_i) {
  Vector logg = log_category_probabilities(beta_k, x_i);
  return logg.array().exp();
}

double log_multinomial_pmf(const Eigen::Ref<const Vector>& y_i, double s_i,
                           const Eigen::Ref<const Vector>& theta,
                           double log_coef_i) {
  if (y_i.size() != theta.size())
    throw invalid_input_error("log pmf: dimension mismatch");
  double acc = log_coef_i;
  (void)s_i;
  for (Eigen::Index j = 0; j < y_i.size(); ++j) {
    if (y_i(j) == 0.0) continue;
    double lt = std::log(theta(j));  // -inf when theta_j == 0
    acc += y_i(j) * lt;
  }
  return acc;
}

Matrix component_loglik_matrix(const MixtureParams& params,
                               const Dataset& data) {
  const int n = data.n();
  const int J = data.J();
  const int K = params.K();
  Matrix ll(n, K);
  const auto yJ = data.y.leftCols(J);
  for (int k = 0; k < K; ++k) {
    Matrix eta = linear_predictors(data.x, params.beta[k]);  // n x J
    Vector lse(n);
    for (int i = 0; i < n; ++i) {
      double m = 0.0;
      for (int j = 0; j < J; ++j) m = std::max(m, eta(i, j));
      double sum = std::exp(-m);
      for (int j = 0; j < J; ++j) sum += std::exp(eta(i, j) - m);
      lse(i) = m + std::log(sum);
    }
    ll.col(k) = data.log_coef +
                (yJ.array() * eta.array()).rowwise().sum().matrix() -
                (data.s.array() * lse.array()).matrix();
  }
  return ll;
}

double observed_log_likelihood(const MixtureParams& params,
                               const Dataset& data) {
  if (params.K() < 1) throw invalid_input_error("likelihood: K must be >= 1");
  params.validate(data.J(), data.P());
  Matrix ll = component_loglik_matrix(params, data);
  const int n = data.n();
  const int K = params.K();
  Vector logpi(K);
  for (int k = 0; k < K; ++k)
    logpi(k) = params.pi(k) > 0.0 ? std::log(params.pi(k)) : kNegInf;
  double total = 0.0;
  std::vector<double> row(K);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) row[k] = logpi(k) + ll(i, k);
    total += log_sum_exp(row);
  }
  return total;
}

Responsibilities responsibilities_from_log_scores(const Matrix& log_scores) {
  const int n = static_cast<int>(log_scores.rows());
  const int K = static_cast<int>(log_scores.cols());
  Responsibilities resp;
  resp.w.resize(n, K);
  for (int i = 0; i < n; ++i) {
    double m = kNegInf;
    for (int k = 0; k < K; ++k) m = std::max(m, log_scores(i, k));
    if (!(m > kNegInf))
      throw degeneracy_error(
          "e-step: every component has zero posterior weight for row " +
          std::to_string(i + 1));
    double sum = 0.0;
    for (int k = 0; k < K; ++k) sum += std::exp(log_scores(i, k) - m);
    for (int k = 0; k < K; ++k)
      resp.w(i, k) = std::exp(log_scores(i, k) - m) / sum;
  }
  return resp;
}

Responsibilities e_step(const MixtureParams& params, const Dataset& data) {
  params.validate(data.J(), data.P());
  Matrix scores = component_loglik_matrix(params, data);
  for (int k = 0; k < params.K(); ++k) {
    double lp = params.pi(k) > 0.0 ? std::log(params.pi(k)) : kNegInf;
    for (int i = 0; i < data.n(); ++i) scores(i, k) += lp;
  }
  return responsibilities_from_log_scores(scores);
}

AllocationVector map_classification(const Responsibilities& w) {
  AllocationVector a;
  a.z.resize(w.n());
  for (int i = 0; i < w.n(); ++i) {
    int best = 0;
    for (int k = 1; k < w.K(); ++k)
      if (w.w(i, k) > w.w(i, best)) best = k;
    a.z[i] = best;
  }
  return a;
}

double expected_complete_loglik(const MixtureParams& params,
                                const Responsibilities& w,
                                const Dataset& data) {
  params.validate(data.J(), data.P());
  if (w.n() != data.n() || w.K() != params.K())
    throw invalid_input_error("expected loglik: dimension mismatch");
  Matrix ll = component_loglik_matrix(params, data);
  double total = 0.0;
  for (int k = 0; k < params.K(); ++k) {
    double lp = params.pi(k) > 0.0 ? std::log(params.pi(k)) : kNegInf;
    for (int i = 0; i < data.n(); ++i)
      total += xtimes(w.w(i, k), lp + ll(i, k));
  }
  return total;
}

double q_component_value(const Matrix& beta_k,
                         const Eigen::Ref<const Vector>& w_col,
                         const Dataset& data) {
  const int n = data.n();
  const int J = data.J();
  Matrix eta = linear_predictors(data.x, beta_k);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (w_col(i) == 0.0) continue;
    double m = 0.0;
    for (int j = 0; j < J; ++j) m = std::max(m, eta(i, j));
    double sum = std::exp(-m);
    for (int j = 0; j < J; ++j) sum += std::exp(eta(i, j) - m);
    double lse = m + std::log(sum);
    double dot = 0.0;
    for (int j = 0; j < J; ++j) dot += data.y(i, j) * eta(i, j);
    total += w_col(i) * (dot - data.s(i) * lse);
  }
  return total;
}

Vector q_gradient_block(const Matrix& beta_k,
                        const Eigen::Ref<const Vector>& w_col,
                        const Dataset& data) {
  const int n = data.n();
  const int J = data.J();
  const int P = data.P();
  Matrix eta = linear_predictors(data.x, beta_k);
  // residual r_ij = w_i (y_ij - S_i g_ij) over non-baseline categories
  Matrix r(n, J);
  for (int i = 0; i < n; ++i) {
    double m = 0.0;
    for (int j = 0; j < J; ++j) m = std::max(m, eta(i, j));
    double sum = std::exp(-m);
    for (int j = 0; j < J; ++j) sum += std::exp(eta(i, j) - m);
    for (int j = 0; j < J; ++j) {
      double g = std::exp(eta(i, j) - m) / sum;
      r(i, j) = w_col(i) * (data.y(i, j) - data.s(i) * g);
    }
  }
  Matrix block = r.transpose() * data.x;  // J x P
  Vector out(static_cast<Eigen::Index>(J) * P);
  for (int j = 0; j < J; ++j)
    for (int p = 0; p < P; ++p) out(j * P + p) = block(j, p);
  return out;
}

Vector q_gradient(const std::vector<Matrix>& beta, const Responsibilities& w,
                  const Dataset& data) {
  const int K = static_cast<int>(beta.size());
  const int J = data.J();
  const int P = data.P();
  Vector out(static_cast<Eigen::Index>(K) * J * P);
  for (int k = 0; k < K; ++k)
    out.segment(static_cast<Eigen::Index>(k) * J * P, J * P) =
        q_gradient_block(beta[k], w.w.col(k), data);
  return out;
}

Matrix q_hessian_block(const Matrix& beta_k,
                       const Eigen::Ref<const Vector>& w_col,
                       const Dataset& data) {
  const int n = data.n();
  const int J = data.J();
  const int P = data.P();
  Matrix eta = linear_predictors(data.x, beta_k);
  Matrix H = Matrix::Zero(J * P, J * P);
  Vector g(J);
  Matrix xx(P, P);
  for (int i = 0; i < n; ++i) {
    if (w_col(i) == 0.0) continue;
    double m = 0.0;
    for (int j = 0; j < J; ++j) m = std::max(m, eta(i, j));
    double sum = std::exp(-m);
    for (int j = 0; j < J; ++j) sum += std::exp(eta(i, j) - m);
    for (int j = 0; j < J; ++j) g(j) = std::exp(eta(i, j) - m) / sum;
    xx.noalias() = data.x.row(i).transpose() * data.x.row(i);
    const double c = data.s(i) * w_col(i);
    for (int j = 0; j < J; ++j)
      for (int jp = 0; jp < J; ++jp) {
        double d = g(j) * ((j == jp ? 1.0 : 0.0) - g(jp));
        if (d == 0.0) continue;
        H.block(j * P, jp * P, P, P).noalias() -= (c * d) * xx;
      }
  }
  return H;
}

std::vector<std::string> identifiability_check(const Dataset& data, int K) {
  std::vector<std::string> warnings;
  if (K <= 1) return warnings;
  const double bound = 2.0 * K - 1.0;
  double smin = data.s.minCoeff();
  for (int i = 0; i < data.n(); ++i)
    if (data.s(i) < bound)
      warnings.push_back("row " + std::to_string(i + 1) + ": replicate total " +
                         std::to_string(static_cast<long long>(data.s(i))) +
                         " is below 2K-1 = " +
                         std::to_string(static_cast<long long>(bound)));
  if (smin < bound)
    warnings.push_back(
        "summary: smallest replicate total " +
        std::to_string(static_cast<long long>(smin)) + " is below 2K-1 = " +
        std::to_string(static_cast<long long>(bound)) +
        "; the " + std::to_string(K) +
        "-component mixture may not be identifiable");
  return warnings;
}

}  // namespace multimix
