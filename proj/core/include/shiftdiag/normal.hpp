#pragma once

// Standard normal distribution helpers with tail-stable log variants.

namespace shiftdiag::normal {

double cdf(double x);
double sf(double x);  // 1 - cdf(x), accurate in the upper tail
double quantile(double p);

// log Phi(x); finite for every finite x.
double log_cdf(double x);
double log_sf(double x);

// log(Phi(hi) - Phi(lo)) for lo < hi, evaluated in whichever tail keeps
// precision. Returns -inf when lo >= hi.
double log_interval(double lo, double hi);

// log(exp(a) + exp(b)) without overflow.
double log_add(double a, double b);

}  // namespace shiftdiag::normal
