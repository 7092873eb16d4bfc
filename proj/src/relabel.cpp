#include "multimix/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace multimix::relabel {

std::vector<int> solve_assignment(const Matrix& cost) {
  const int m = static_cast<int>(cost.rows());
  if (cost.cols() != m) throw invalid_input_error("assignment: matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= m; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(m, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j]) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

int modal_k0(const mcmc::SamplerTrace& trace) {
  if (trace.records.empty())
    throw invalid_input_error(
        "trace is empty; run the sampler longer (no retained iterations)");
  std::map<int, int> counts;
  for (int k0 : trace.k0) ++counts[k0];
  int best = counts.begin()->first;
  for (const auto& [k0, c] : counts)
    if (c > counts[best]) best = k0;
  return best;
}

AllocationVector select_pivot(const mcmc::SamplerTrace& trace) {
  const int mode = modal_k0(trace);
  int best = -1;
  for (int t = 0; t < static_cast<int>(trace.records.size()); ++t) {
    if (trace.records[t].k0 != mode) continue;
    if (best < 0 || trace.records[t].log_target > trace.records[best].log_target)
      best = t;
  }
  if (best < 0) throw internal_error("pivot selection: no candidate iteration");
  return trace.records[best].z;
}

RelabeledTrace ecr_relabel(const mcmc::SamplerTrace& trace,
                           const AllocationVector& pivot) {
  const int K = trace.k_max;
  const int n = trace.n;
  if (pivot.n() != n)
    throw invalid_input_error("relabel: pivot length does not match trace");
  for (int zi : pivot.z)
    if (zi < 0 || zi >= K)
      throw invalid_input_error("relabel: pivot label out of range");
  RelabeledTrace out;
  out.pivot = pivot;
  out.k_max = K;
  out.n = n;
  out.J = trace.J;
  out.P = trace.P;
  out.permutations.resize(trace.records.size());
  out.records.resize(trace.records.size());
  // Base cost of relabeling draw component k as l is n_k - match(k, l), the
  // number of its observations that disagree with the pivot. The epsilon on
  // off-diagonal cells prefers the identity among cost ties; scaled so that
  // K of them stay below one unit of true cost.
  const double eps = 1.0 / (K + 1.0);
  const int T = static_cast<int>(trace.records.size());
  for (int t = 0; t < T; ++t) {
    const mcmc::TraceRecord& rec = trace.records[t];
    Matrix match = Matrix::Zero(K, K);
    std::vector<int> occupancy(K, 0);
    for (int i = 0; i < n; ++i) {
      match(rec.z.z[i], pivot.z[i]) += 1.0;
      occupancy[rec.z.z[i]] += 1;
    }
    Matrix cost(K, K);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < K; ++l)
        cost(k, l) = occupancy[k] - match(k, l) + (k == l ? 0.0 : eps);
    std::vector<int> sigma = solve_assignment(cost);
    mcmc::TraceRecord moved;
    moved.z.z.resize(n);
    for (int i = 0; i < n; ++i) moved.z.z[i] = sigma[rec.z.z[i]];
    moved.pi.resize(K);
    moved.beta.resize(K);
    for (int k = 0; k < K; ++k) {
      moved.pi(sigma[k]) = rec.pi(k);
      moved.beta[sigma[k]] = rec.beta[k];
    }
    moved.k0 = rec.k0;
    moved.log_target = rec.log_target;
    out.permutations[t] = std::move(sigma);
    out.records[t] = std::move(moved);
  }
  return out;
}

namespace {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw internal_error("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - lo;
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

ParamSummary summarize_draws(const std::vector<double>& draws, double level) {
  ParamSummary s;
  double acc = 0.0;
  for (double v : draws) acc += v;
  s.mean = acc / draws.size();
  const double tail = (1.0 - level) / 2.0;
  s.lower = quantile(draws, tail);
  s.upper = quantile(draws, 1.0 - tail);
  return s;
}

}  // namespace

PosteriorSummary summarize(const RelabeledTrace& relabeled, double level) {
  if (relabeled.records.empty())
    throw invalid_input_error(
        "trace is empty; run the sampler longer (no retained iterations)");
  if (!(level > 0.0 && level < 1.0))
    throw invalid_input_error("summary: credible level must be in (0, 1)");
  const int T = static_cast<int>(relabeled.records.size());
  const int K = relabeled.k_max;
  const int n = relabeled.n;

  PosteriorSummary out;
  out.level = level;
  std::map<int, int> k0_counts;
  for (const auto& rec : relabeled.records) ++k0_counts[rec.k0];
  for (const auto& [k0, c] : k0_counts)
    out.k0_distribution[k0] = static_cast<double>(c) / T;
  out.modal_k0 = k0_counts.begin()->first;
  for (const auto& [k0, c] : k0_counts)
    if (c > k0_counts[out.modal_k0]) out.modal_k0 = k0;

  std::vector<int> used;
  for (int t = 0; t < T; ++t)
    if (relabeled.records[t].k0 == out.modal_k0) used.push_back(t);
  out.n_used_iterations = static_cast<int>(used.size());
  if (used.empty())
    throw invalid_input_error(
        "no retained iterations at the modal cluster count; run the sampler longer");

  // Per-observation modal allocation over the modal-K0 iterations.
  Matrix freq = Matrix::Zero(n, K);
  for (int t : used)
    for (int i = 0; i < n; ++i) freq(i, relabeled.records[t].z.z[i]) += 1.0;
  freq /= static_cast<double>(used.size());
  out.best_clustering.z.resize(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (freq(i, k) > freq(i, best)) best = k;
    out.best_clustering.z[i] = best;
  }
  std::vector<char> is_alive(K, 0);
  for (int zi : out.best_clustering.z) is_alive[zi] = 1;
  for (int k = 0; k < K; ++k)
    if (is_alive[k]) out.alive_labels.push_back(k);

  const int A = static_cast<int>(out.alive_labels.size());
  out.membership.resize(n, A);
  for (int a = 0; a < A; ++a) out.membership.col(a) = freq.col(out.alive_labels[a]);

  std::vector<double> draws(used.size());
  for (int a = 0; a < A; ++a) {
    const int k = out.alive_labels[a];
    for (std::size_t s = 0; s < used.size(); ++s)
      draws[s] = relabeled.records[used[s]].pi(k);
    out.pi_summary.push_back(summarize_draws(draws, level));
  }
  out.beta_summary.resize(A);
  for (int a = 0; a < A; ++a) {
    const int k = out.alive_labels[a];
    out.beta_summary[a].resize(relabeled.J);
    for (int j = 0; j < relabeled.J; ++j) {
      out.beta_summary[a][j].resize(relabeled.P);
      for (int p = 0; p < relabeled.P; ++p) {
        for (std::size_t s = 0; s < used.size(); ++s)
          draws[s] = relabeled.records[used[s]].beta[k](j, p);
        out.beta_summary[a][j][p] = summarize_draws(draws, level);
      }
    }
  }
  return out;
}

}  // namespace multimix::relabel
