#pragma once

#include <vector>

#include "multimix/types.hpp"

namespace multimix::metrics {

// Adjusted Rand index from the contingency table. Degenerate cases with a
// zero denominator (e.g. both partitions put everything in one cluster)
// are defined as 1.
double adjusted_rand_index(const AllocationVector& a, const AllocationVector& b);

// Rows index clusters of `a`, columns clusters of `b`; entries sum to n.
Eigen::MatrixXi confusion_matrix(const AllocationVector& a,
                                 const AllocationVector& b);

// Relative absolute error |k_hat - k_true| / k_true.
double k_error(int k_hat, int k_true);

}  // namespace multimix::metrics
