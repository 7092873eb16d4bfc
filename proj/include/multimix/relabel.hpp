#pragma once

#include <map>
#include <vector>

#include "multimix/mcmc.hpp"
#include "multimix/types.hpp"

namespace multimix::relabel {

// Exact solver for the square min-cost assignment problem (shortest
// augmenting paths with potentials, O(m^3)). Returns the column assigned to
// each row.
std::vector<int> solve_assignment(const Matrix& cost);

// Most frequent alive-component count; frequency ties go to the smaller K0.
int modal_k0(const mcmc::SamplerTrace& trace);

// Allocation draw with the highest stored log target among retained
// iterations whose K0 equals the posterior mode; ties go to the earliest
// iteration.
AllocationVector select_pivot(const mcmc::SamplerTrace& trace);

struct RelabeledTrace {
  // permutations[t][k] is the new label of draw-t component k.
  std::vector<std::vector<int>> permutations;
  std::vector<mcmc::TraceRecord> records;  // reordered draws
  AllocationVector pivot;
  int k_max = 0;
  int n = 0;
  int J = 0;
  int P = 0;
};

// Per iteration, finds the label permutation minimizing disagreements with
// the pivot (an assignment problem on match counts) and applies it to the
// z, pi and beta draws. Components without observations cost nothing to
// move, so their ties are broken toward the identity: any off-diagonal match
// is charged an extra epsilon smaller than one true disagreement.
RelabeledTrace ecr_relabel(const mcmc::SamplerTrace& trace,
                           const AllocationVector& pivot);

struct ParamSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct PosteriorSummary {
  std::map<int, double> k0_distribution;  // sums to 1
  int modal_k0 = 0;
  int n_used_iterations = 0;              // iterations with K0 == modal
  double level = 0.95;
  AllocationVector best_clustering;       // 0-based labels
  std::vector<int> alive_labels;          // sorted labels used by the clustering
  std::vector<ParamSummary> pi_summary;   // aligned with alive_labels
  // beta_summary[a](j, p) for alive label alive_labels[a]
  std::vector<std::vector<std::vector<ParamSummary>>> beta_summary;
  Matrix membership;                      // n x alive empirical frequencies
};

// Summaries over the iterations whose K0 equals the posterior mode:
// per-observation modal allocation, equal-tailed credible intervals for the
// weights and coefficients of the components used by the clustering, and the
// empirical membership-probability matrix.
PosteriorSummary summarize(const RelabeledTrace& relabeled, double level);

}  // namespace multimix::relabel
