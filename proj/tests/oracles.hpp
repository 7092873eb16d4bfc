#pragma once

// Test-only oracles, kept independent of the library code paths they check:
// direct-space likelihood arithmetic in long double, finite differences,
// gradient ascent with backtracking line search, quadrature, exhaustive
// count enumeration, and Monte Carlo standard errors.

#include <cmath>
#include <functional>
#include <vector>

#include "multimix/rng.hpp"
#include "multimix/types.hpp"

namespace oracles {

using multimix::AllocationVector;
using multimix::Dataset;
using multimix::Matrix;
using multimix::MixtureParams;
using multimix::Responsibilities;
using multimix::Rng;
using multimix::Vector;

// Softmax by the raw formula (no shift); fine for the moderate exponents the
// tests use, and independent of the library's shifted version.
inline std::vector<long double> direct_probs(const Matrix& beta_k,
                                             const Vector& x) {
  const int J = static_cast<int>(beta_k.rows());
  std::vector<long double> g(J + 1);
  long double denom = 1.0L;
  for (int j = 0; j < J; ++j) {
    long double eta = 0.0L;
    for (int p = 0; p < beta_k.cols(); ++p)
      eta += static_cast<long double>(beta_k(j, p)) * x(p);
    g[j] = expl(eta);
    denom += g[j];
  }
  for (int j = 0; j < J; ++j) g[j] /= denom;
  g[J] = 1.0L / denom;
  return g;
}

// Multinomial pmf in direct space (long double), coefficient via lgammal.
inline long double direct_pmf(const Vector& y,
                              const std::vector<long double>& theta) {
  long double total = 0.0L;
  for (Eigen::Index j = 0; j < y.size(); ++j) total += y(j);
  long double logc = lgammal(total + 1.0L);
  for (Eigen::Index j = 0; j < y.size(); ++j) logc -= lgammal(y(j) + 1.0L);
  long double value = expl(logc);
  for (Eigen::Index j = 0; j < y.size(); ++j)
    value *= powl(theta[j], static_cast<long double>(y(j)));
  return value;
}

inline long double direct_mixture_density(const MixtureParams& params,
                                          const Dataset& data, int i) {
  long double mix = 0.0L;
  for (int k = 0; k < params.K(); ++k) {
    auto theta = direct_probs(params.beta[k], data.x.row(i).transpose());
    mix += static_cast<long double>(params.pi(k)) *
           direct_pmf(data.y.row(i).transpose(), theta);
  }
  return mix;
}

inline double brute_observed_loglik(const MixtureParams& params,
                                    const Dataset& data) {
  long double acc = 0.0L;
  for (int i = 0; i < data.n(); ++i)
    acc += logl(direct_mixture_density(params, data, i));
  return static_cast<double>(acc);
}

inline Matrix brute_e_step(const MixtureParams& params, const Dataset& data) {
  Matrix w(data.n(), params.K());
  for (int i = 0; i < data.n(); ++i) {
    long double denom = direct_mixture_density(params, data, i);
    for (int k = 0; k < params.K(); ++k) {
      auto theta = direct_probs(params.beta[k], data.x.row(i).transpose());
      long double num = static_cast<long double>(params.pi(k)) *
                        direct_pmf(data.y.row(i).transpose(), theta);
      w(i, k) = static_cast<double>(num / denom);
    }
  }
  return w;
}

// Triple loop over (i, k, j) with the 0 log 0 convention.
inline double brute_expected_Q(const MixtureParams& params,
                               const Responsibilities& w, const Dataset& data) {
  long double acc = 0.0L;
  for (int i = 0; i < data.n(); ++i)
    for (int k = 0; k < params.K(); ++k) {
      if (w.w(i, k) == 0.0) continue;
      auto theta = direct_probs(params.beta[k], data.x.row(i).transpose());
      long double inner = logl(static_cast<long double>(params.pi(k))) +
                          static_cast<long double>(data.log_coef(i));
      for (int j = 0; j <= data.J(); ++j)
        if (data.y(i, j) > 0.0)
          inner += static_cast<long double>(data.y(i, j)) * logl(theta[j]);
      acc += static_cast<long double>(w.w(i, k)) * inner;
    }
  return static_cast<double>(acc);
}

inline Vector finite_diff_gradient(const std::function<double(const Vector&)>& f,
                                   Vector x, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double keep = x(i);
    x(i) = keep + h;
    double up = f(x);
    x(i) = keep - h;
    double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& f,
                                   Vector x, double h) {
  Vector base = f(x);
  Matrix jac(base.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double keep = x(i);
    x(i) = keep + h;
    Vector up = f(x);
    x(i) = keep - h;
    Vector down = f(x);
    x(i) = keep;
    jac.col(i) = (up - down) / (2.0 * h);
  }
  return jac;
}

// Gradient ascent with Armijo backtracking; for the concave objectives used
// in the tests this converges to the global optimum.
inline Vector gradient_ascent(const std::function<double(const Vector&)>& f,
                              const std::function<Vector(const Vector&)>& grad,
                              Vector x, int max_iter, double grad_tol) {
  double fx = f(x);
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector g = grad(x);
    double gnorm = g.norm();
    if (gnorm < grad_tol) break;
    step *= 4.0;  // allow growth after successful iterations
    for (;;) {
      Vector x_new = x + step * g;
      double f_new = f(x_new);
      if (std::isfinite(f_new) && f_new >= fx + 1e-4 * step * gnorm * gnorm) {
        x = x_new;
        fx = f_new;
        break;
      }
      step *= 0.5;
      if (step < 1e-18) return x;
    }
  }
  return x;
}

// Enumerates all count vectors of length C with the given sum.
inline void enumerate_counts(int C, int total,
                             const std::function<void(const Vector&)>& cb) {
  Vector y = Vector::Zero(C);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == C - 1) {
      y(pos) = left;
      cb(y);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      y(pos) = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, total);
}

// Composite Simpson rule; m must be even.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int m) {
  double h = (b - a) / m;
  double acc = f(a) + f(b);
  for (int i = 1; i < m; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Monte Carlo standard error of the mean by batch means; handles
// autocorrelated chains.
inline double batch_se(const std::vector<double>& draws, int n_batches = 50) {
  const int m = static_cast<int>(draws.size()) / n_batches;
  std::vector<double> means(n_batches, 0.0);
  for (int b = 0; b < n_batches; ++b) {
    for (int i = 0; i < m; ++i) means[b] += draws[b * m + i];
    means[b] /= m;
  }
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= n_batches;
  double var = 0.0;
  for (double v : means) var += (v - grand) * (v - grand);
  var /= (n_batches - 1);
  return std::sqrt(var / n_batches);
}

inline double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / v.size();
}

// Small dense test datasets: counts drawn from a smooth multinomial so every
// category shows up, covariates standard normal with an intercept.
inline Dataset random_dataset(Rng& rng, int n, int categories, int P,
                              int s_min, int s_max) {
  Matrix x = Matrix::Ones(n, P);
  for (int p = 1; p < P; ++p)
    for (int i = 0; i < n; ++i) x(i, p) = multimix::normal01(rng);
  Matrix y(n, categories);
  for (int i = 0; i < n; ++i) {
    int s = multimix::uniform_int(rng, s_min, s_max);
    Vector weights(categories);
    for (int j = 0; j < categories; ++j)
      weights(j) = 0.2 + multimix::uniform01(rng);
    weights /= weights.sum();
    // sequential binomials
    long remaining = s;
    double prob_left = 1.0;
    for (int j = 0; j < categories - 1; ++j) {
      double pj = std::min(1.0, std::max(0.0, weights(j) / prob_left));
      long draw = remaining > 0
                      ? std::binomial_distribution<long>(remaining, pj)(rng)
                      : 0;
      y(i, j) = static_cast<double>(draw);
      remaining -= draw;
      prob_left -= weights(j);
    }
    y(i, categories - 1) = static_cast<double>(remaining);
  }
  return Dataset::build(std::move(y), std::move(x));
}

inline MixtureParams random_params(Rng& rng, int K, int J, int P,
                                   double scale) {
  MixtureParams params;
  params.pi.resize(K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    params.pi(k) = 0.2 + multimix::uniform01(rng);
    total += params.pi(k);
  }
  params.pi /= total;
  params.beta.assign(K, Matrix::Zero(J, P));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J; ++j)
      for (int p = 0; p < P; ++p)
        params.beta[k](j, p) = scale * multimix::normal01(rng);
  return params;
}

inline Responsibilities random_resp(Rng& rng, int n, int K) {
  Responsibilities w;
  w.w.resize(n, K);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      w.w(i, k) = multimix::uniform01(rng) + 1e-3;
      total += w.w(i, k);
    }
    w.w.row(i) /= total;
  }
  return w;
}

}  // namespace oracles
