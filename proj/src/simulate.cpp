#include "multimix/simulate.hpp"

#include <cmath>

#include "multimix/model.hpp"

namespace multimix::sim {

double replicate_total_draw(Rng& rng, double r, double p) {
  // Gamma-Poisson mixture: lambda ~ Gamma(r, (1-p)/p), S ~ Poisson(lambda),
  // so S ~ NegBin(r, p) with mean r(1-p)/p; supports real-valued r.
  double lambda = gamma_draw(rng, r, (1.0 - p) / p);
  long s = std::poisson_distribution<long>(lambda)(rng);
  return s == 0 ? 1.0 : static_cast<double>(s);
}

Vector proportional_weights(int K) {
  Vector pi(K);
  double total = K * (K + 1) / 2.0;
  for (int k = 0; k < K; ++k) pi(k) = (k + 1) / total;
  return pi;
}

namespace {

// Sequential conditional binomials; exact multinomial draw.
Vector multinomial_draw(Rng& rng, long total, const Vector& theta) {
  const int C = static_cast<int>(theta.size());
  Vector out(C);
  long remaining = total;
  double prob_left = 1.0;
  for (int j = 0; j < C - 1; ++j) {
    if (remaining == 0) {
      out(j) = 0.0;
      prob_left -= theta(j);
      continue;
    }
    double pj = prob_left > 0.0 ? std::min(1.0, std::max(0.0, theta(j) / prob_left))
                                : 0.0;
    long draw = std::binomial_distribution<long>(remaining, pj)(rng);
    out(j) = static_cast<double>(draw);
    remaining -= draw;
    prob_left -= theta(j);
  }
  out(C - 1) = static_cast<double>(remaining);
  return out;
}

}  // namespace

SimResult simulate_dataset(const SimConfig& config) {
  if (config.n < 1 || config.K < 1 || config.P < 1 || config.n_categories < 2)
    throw invalid_input_error("simulate: invalid dimensions");
  if (!(config.nb_p > 0.0 && config.nb_p < 1.0) || !(config.nb_r > 0.0))
    throw invalid_input_error("simulate: invalid negative binomial parameters");
  if (!(config.spike_prob >= 0.0 && config.spike_prob <= 1.0))
    throw invalid_input_error("simulate: spike probability outside [0,1]");
  const int n = config.n;
  const int K = config.K;
  const int P = config.P;
  const int J = config.n_categories - 1;
  Rng rng = make_stream(config.seed, StreamTag::kSimulate);

  Vector s(n);
  for (int i = 0; i < n; ++i)
    s(i) = replicate_total_draw(rng, config.nb_r, config.nb_p);

  Matrix x = Matrix::Ones(n, P);
  for (int p = 1; p < P; ++p) {
    for (int i = 0; i < n; ++i) x(i, p) = normal01(rng);
    if (n >= 2) {
      double mean = x.col(p).mean();
      double sd = std::sqrt((x.col(p).array() - mean).square().sum() / n);
      if (sd > 0.0) x.col(p) = (x.col(p).array() - mean) / sd;
    }
  }

  SimResult result;
  result.sigma = config.sigma_min +
                 uniform01(rng) * (config.sigma_max - config.sigma_min);
  result.truth.pi = proportional_weights(K);
  result.truth.beta.assign(K, Matrix::Zero(J, P));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J; ++j)
      for (int p = 0; p < P; ++p) {
        double spike = uniform01(rng);
        double value = normal01(rng) * result.sigma;
        result.truth.beta[k](j, p) = spike < config.spike_prob ? 0.0 : value;
      }

  result.labels.z.resize(n);
  Vector cum(K);
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    acc += result.truth.pi(k);
    cum(k) = acc;
  }
  for (int i = 0; i < n; ++i) {
    double u = uniform01(rng);
    int k = 0;
    while (k < K - 1 && u >= cum(k)) ++k;
    result.labels.z[i] = k;
  }

  Matrix y(n, J + 1);
  for (int i = 0; i < n; ++i) {
    Vector theta = category_probabilities(result.truth.beta[result.labels.z[i]],
                                          x.row(i).transpose());
    y.row(i) = multinomial_draw(rng, static_cast<long>(s(i)), theta).transpose();
  }
  result.data = Dataset::build(std::move(y), std::move(x));
  return result;
}

}  // namespace multimix::sim
