#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace multimix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Exit-code mapping: invalid_input -> 2, degeneracy -> 3, internal -> 4.
struct invalid_input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct degeneracy_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct internal_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Replicated multinomial count data with a fixed design matrix.
//   y: n x (J+1) counts, row i sums to s(i)
//   x: n x P design matrix, intercept column included
//   s: per-row replicate totals
//   log_coef: log multinomial coefficients, log s_i! - sum_j log y_ij!
struct Dataset {
  Matrix y;
  Matrix x;
  Vector s;
  Vector log_coef;

  int n() const { return static_cast<int>(y.rows()); }
  int categories() const { return static_cast<int>(y.cols()); }  // J+1
  int J() const { return categories() - 1; }
  int P() const { return static_cast<int>(x.cols()); }

  static double row_log_coef(const Eigen::Ref<const Vector>& y_row);
  // Computes s and log_coef from the counts; validates shapes and contents.
  static Dataset build(Matrix counts, Matrix design);
  void validate() const;
};

// Mixture of multinomial logit components. beta[k] is J x P; the baseline
// category J+1 has all coefficients fixed at zero.
struct MixtureParams {
  Vector pi;                 // K mixing proportions
  std::vector<Matrix> beta;  // K blocks of J x P

  int K() const { return static_cast<int>(pi.size()); }

  // Flat layout is k-major, then j, then p: index = (k*J + j)*P + p.
  Vector flatten() const;
  static std::vector<Matrix> unflatten(const Vector& v, int K, int J, int P);

  void validate(int J, int P) const;
};

// n x K posterior membership probabilities; rows on the simplex.
struct Responsibilities {
  Matrix w;

  int n() const { return static_cast<int>(w.rows()); }
  int K() const { return static_cast<int>(w.cols()); }
  void validate(double tol = 1e-10) const;
};

// Component labels, 0-based in memory. Serialized files use 1-based labels.
struct AllocationVector {
  std::vector<int> z;

  int n() const { return static_cast<int>(z.size()); }
  std::vector<int> occupancy(int K) const;
};

}  // namespace multimix
