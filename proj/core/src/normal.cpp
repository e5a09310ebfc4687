#include "shiftdiag/normal.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace shiftdiag::normal {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Asymptotic series for log Phi(x), x << 0.
double log_cdf_asymptotic(double x) {
  const double x2 = x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) / x2;
    sum += term;
  }
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(sum);
}

}  // namespace

double cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double quantile(double p) {
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

double log_cdf(double x) {
  if (x > -1.0) return std::log1p(-sf(x));
  if (x > -30.0) return std::log(cdf(x));
  return log_cdf_asymptotic(x);
}

double log_sf(double x) { return log_cdf(-x); }

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_interval(double lo, double hi) {
  if (!(lo < hi)) return -std::numeric_limits<double>::infinity();
  if (lo > 0.0) {
    // Both in the upper tail: Phi(hi) - Phi(lo) = sf(lo) - sf(hi).
    const double a = log_sf(lo);
    const double b = log_sf(hi);
    return a + std::log1p(-std::exp(b - a));
  }
  if (hi < 0.0) {
    const double a = log_cdf(hi);
    const double b = log_cdf(lo);
    return a + std::log1p(-std::exp(b - a));
  }
  // Interval straddles zero: mass is at least min(Phi(hi)-1/2, 1/2-Phi(lo)).
  return std::log(cdf(hi) - cdf(lo));
}

}  // namespace shiftdiag::normal
