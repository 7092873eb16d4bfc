#include "multimix/types.hpp"

#include <cmath>

namespace multimix {

double Dataset::row_log_coef(const Eigen::Ref<const Vector>& y_row) {
  double total = y_row.sum();
  double lc = std::lgamma(total + 1.0);
  for (Eigen::Index j = 0; j < y_row.size(); ++j)
    lc -= std::lgamma(y_row(j) + 1.0);
  return lc;
}

Dataset Dataset::build(Matrix counts, Matrix design) {
  Dataset d;
  d.y = std::move(counts);
  d.x = std::move(design);
  const int n = d.n();
  d.s.resize(n);
  d.log_coef.resize(n);
  for (int i = 0; i < n; ++i) {
    d.s(i) = d.y.row(i).sum();
    d.log_coef(i) = row_log_coef(d.y.row(i).transpose());
  }
  d.validate();
  return d;
}

void Dataset::validate() const {
  if (n() < 1 || categories() < 2 || P() < 1)
    throw invalid_input_error("dataset: need n >= 1, J+1 >= 2, P >= 1");
  if (x.rows() != y.rows())
    throw invalid_input_error("dataset: counts and design row counts differ");
  if (s.size() != n() || log_coef.size() != n())
    throw invalid_input_error("dataset: s/log_coef length mismatch");
  if (!x.allFinite())
    throw invalid_input_error("dataset: non-finite covariate");
  for (int i = 0; i < n(); ++i) {
    double rowsum = 0.0;
    for (int j = 0; j < categories(); ++j) {
      double v = y(i, j);
      if (!(v >= 0.0) || v != std::floor(v))
        throw invalid_input_error("dataset: counts must be non-negative integers (row " +
                                  std::to_string(i + 1) + ")");
      rowsum += v;
    }
    if (rowsum != s(i))
      throw invalid_input_error("dataset: row " + std::to_string(i + 1) +
                                " does not sum to its replicate total");
    if (!(s(i) >= 1.0))
      throw invalid_input_error("dataset: replicate total must be positive (row " +
                                std::to_string(i + 1) + ")");
    double lc = row_log_coef(y.row(i).transpose());
    double scale = std::max(1.0, std::abs(lc));
    if (std::abs(lc - log_coef(i)) > 1e-10 * scale)
      throw invalid_input_error("dataset: stored log coefficient for row " +
                                std::to_string(i + 1) + " is inconsistent");
  }
}

Vector MixtureParams::flatten() const {
  if (beta.empty()) return Vector();
  const int K = static_cast<int>(beta.size());
  const int J = static_cast<int>(beta[0].rows());
  const int P = static_cast<int>(beta[0].cols());
  Vector v(static_cast<Eigen::Index>(K) * J * P);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J; ++j)
      for (int p = 0; p < P; ++p) v((k * J + j) * P + p) = beta[k](j, p);
  return v;
}

std::vector<Matrix> MixtureParams::unflatten(const Vector& v, int K, int J,
                                             int P) {
  if (v.size() != static_cast<Eigen::Index>(K) * J * P)
    throw invalid_input_error("unflatten: size mismatch");
  std::vector<Matrix> beta(K, Matrix(J, P));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J; ++j)
      for (int p = 0; p < P; ++p) beta[k](j, p) = v((k * J + j) * P + p);
  return beta;
}

void MixtureParams::validate(int J, int P) const {
  if (K() < 1) throw invalid_input_error("params: K must be >= 1");
  if (static_cast<int>(beta.size()) != K())
    throw invalid_input_error("params: beta block count != K");
  double total = 0.0;
  for (int k = 0; k < K(); ++k) {
    if (!(pi(k) >= 0.0))
      throw invalid_input_error("params: negative mixing proportion");
    total += pi(k);
    if (beta[k].rows() != J || beta[k].cols() != P)
      throw invalid_input_error("params: beta block has wrong shape");
    if (!beta[k].allFinite())
      throw invalid_input_error("params: non-finite coefficient");
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw invalid_input_error("params: mixing proportions do not sum to 1");
}

void Responsibilities::validate(double tol) const {
  for (int i = 0; i < n(); ++i) {
    double rowsum = 0.0;
    for (int k = 0; k < K(); ++k) {
      double v = w(i, k);
      if (!(v >= 0.0 && v <= 1.0 + 1e-12))
        throw invalid_input_error("responsibilities: entry outside [0,1] at row " +
                                  std::to_string(i + 1));
      rowsum += v;
    }
    if (std::abs(rowsum - 1.0) > tol)
      throw invalid_input_error("responsibilities: row " + std::to_string(i + 1) +
                                " does not sum to 1");
  }
}

std::vector<int> AllocationVector::occupancy(int K) const {
  std::vector<int> counts(K, 0);
  for (int zi : z) {
    if (zi < 0 || zi >= K)
      throw invalid_input_error("allocation: label out of range");
    ++counts[zi];
  }
  return counts;
}

}  // namespace multimix
