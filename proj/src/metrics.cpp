#include "multimix/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace multimix::metrics {

namespace {

int label_count(const AllocationVector& a) {
  int m = 0;
  for (int zi : a.z) {
    if (zi < 0) throw invalid_input_error("labels must be non-negative");
    m = std::max(m, zi + 1);
  }
  return m;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(const AllocationVector& a,
                           const AllocationVector& b) {
  if (a.n() != b.n())
    throw invalid_input_error("adjusted Rand index: partitions differ in length");
  if (a.n() == 0) throw invalid_input_error("adjusted Rand index: empty partitions");
  Eigen::MatrixXi table = confusion_matrix(a, b);
  const double n = static_cast<double>(a.n());
  double sum_cells = 0.0;
  for (int i = 0; i < table.rows(); ++i)
    for (int j = 0; j < table.cols(); ++j) sum_cells += comb2(table(i, j));
  double sum_rows = 0.0;
  for (int i = 0; i < table.rows(); ++i)
    sum_rows += comb2(static_cast<double>(table.row(i).sum()));
  double sum_cols = 0.0;
  for (int j = 0; j < table.cols(); ++j)
    sum_cols += comb2(static_cast<double>(table.col(j).sum()));
  const double total = comb2(n);
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (std::abs(denom) < 1e-12) return 1.0;
  return (sum_cells - expected) / denom;
}

Eigen::MatrixXi confusion_matrix(const AllocationVector& a,
                                 const AllocationVector& b) {
  if (a.n() != b.n())
    throw invalid_input_error("confusion matrix: partitions differ in length");
  Eigen::MatrixXi table = Eigen::MatrixXi::Zero(label_count(a), label_count(b));
  for (int i = 0; i < a.n(); ++i) table(a.z[i], b.z[i]) += 1;
  return table;
}

double k_error(int k_hat, int k_true) {
  if (k_true <= 0) throw invalid_input_error("k_error: true K must be positive");
  return std::abs(k_hat - k_true) / static_cast<double>(k_true);
}

}  // namespace multimix::metrics
