#pragma once

#include <cmath>
#include <limits>

#include "bbmlab/common.hpp"

namespace bbm {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }
inline double normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }
inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}

// log of the standard normal survival function, stable out to z ~ 1e7.
// erfc underflows near z = 38; beyond z = 34 the asymptotic expansion is
// accurate to ~1e-10 in the log.
inline double log_normal_sf(double z) {
  if (z < 34.0) {
    const double s = normal_sf(z);
    if (s > 0.0) return std::log(s);
  }
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) -
                        15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
  return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * kPi) +
         std::log(series);
}

namespace detail {

// Regularized lower incomplete gamma by series.
inline double gamma_p_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 1; n < 600; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma by Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 600; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw Error("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

// Survival function of the chi-squared distribution with k dof.
inline double chi_squared_sf(double stat, double dof) {
  return gamma_q(0.5 * dof, 0.5 * stat);
}

}  // namespace bbm
