#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace multimix {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(v_i)) with max shift. -inf entries drop out; all -inf -> -inf.
inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v)
    if (x > m) m = x;
  if (!(m > kNegInf)) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_sum_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (!(a > kNegInf)) return kNegInf;
  return a + std::log1p(std::exp(b - a));
}

// x * log(y) with the 0 * log 0 = 0 convention.
inline double xlogy(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * std::log(y);
}

// x * y with the 0 * (-inf) = 0 convention.
inline double xtimes(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * y;
}

}  // namespace multimix
