#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace somfdr::numeric {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// boost's lgamma is reentrant; std::lgamma writes the global signgam.
inline double log_gamma(double x) { return boost::math::lgamma(x); }

inline double log_factorial(std::int64_t n) {
  static const auto table = [] {
    std::vector<double> t(256);
    t[0] = 0.0;
    for (int k = 1; k < 256; ++k) t[k] = t[k - 1] + std::log(static_cast<double>(k));
    return t;
  }();
  if (n < 256) return table[static_cast<std::size_t>(n)];
  return log_gamma(static_cast<double>(n) + 1.0);
}

inline double log_choose(std::int64_t n, std::int64_t k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// log P(X = k) for X ~ Poisson(mu); mu == 0 is the point mass at zero.
inline double log_poisson_pmf(std::int64_t k, double mu) {
  if (mu == 0.0) return k == 0 ? 0.0 : kNegInf;
  return static_cast<double>(k) * std::log(mu) - mu - log_factorial(k);
}

inline double poisson_pmf(std::int64_t k, double mu) { return std::exp(log_poisson_pmf(k, mu)); }

/// P(X >= n) for X ~ Poisson(mu).
inline double poisson_tail_ge(std::int64_t n, double mu) {
  if (n <= 0) return 1.0;
  if (mu == 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(n), mu);
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

/// Linear-interpolation quantile of an already sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, q);
}

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace somfdr::numeric
