#pragma once

// Distribution functions used by the ANOVA and Tukey code: the regularized
// incomplete beta function, the F upper tail, and the studentized range.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "wildsurvey/errors.hpp"

namespace wildsurvey::special {

namespace detail {

// Continued fraction for I_x(a, b) by the modified Lentz method.
inline double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw NumericError("incomplete beta: continued fraction did not converge (a=" +
                     std::to_string(a) + ", b=" + std::to_string(b) +
                     ", x=" + std::to_string(x) + ")");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double ibeta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw NumericError("incomplete beta: argument out of domain");
  }
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// P(F > f) for an F(d1, d2) variate.
inline double f_upper_tail(double f, double d1, double d2) {
  if (!(d1 > 0.0 && d2 > 0.0)) throw NumericError("F distribution: df must be > 0");
  if (std::isnan(f)) throw NumericError("F distribution: statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return ibeta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

namespace detail {

constexpr double kQuadTol = 1e-10;
constexpr unsigned kQuadDepth = 18;

/// P(range of k standard normals <= w).
inline double normal_range_cdf(double w, int k, double* err) {
  if (w <= 0.0) return 0.0;
  auto f = [&](double z) {
    const double inner = normal_cdf(z + w) - normal_cdf(z);
    return inner <= 0.0 ? 0.0 : normal_pdf(z) * std::pow(inner, k - 1);
  };
  double e = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, -9.0, 9.0, kQuadDepth, kQuadTol, &e);
  *err = std::max(*err, k * e);
  return std::min(1.0, k * v);
}

}  // namespace detail

/// Studentized range distribution function P(Q <= q) for k means and df
/// degrees of freedom, integrating the normal-range probability against the
/// density of the scale s = sqrt(chi2_df / df).
inline double studentized_range_cdf(double q, int k, double df) {
  if (k < 2) throw NumericError("studentized range: k must be >= 2");
  if (!(df >= 1.0)) throw NumericError("studentized range: df must be >= 1");
  if (std::isnan(q)) throw NumericError("studentized range: q is NaN");
  if (q <= 0.0) return 0.0;
  if (std::isinf(q)) return 1.0;

  double err = 0.0;
  // Scale window holding all but ~1e-15 of the chi mass on each side.
  const double half = df / 2.0;
  const double s_lo = std::sqrt(2.0 * boost::math::gamma_p_inv(half, 1e-15) / df);
  const double s_hi = std::sqrt(2.0 * boost::math::gamma_q_inv(half, 1e-15) / df);
  const double log_norm = std::log(2.0) + half * std::log(half) - std::lgamma(half);
  auto outer = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double log_density = log_norm + (df - 1.0) * std::log(s) - half * s * s;
    return std::exp(log_density) * detail::normal_range_cdf(q * s, k, &err);
  };
  double outer_err = 0.0;
  const double p = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      outer, s_lo, s_hi, detail::kQuadDepth, detail::kQuadTol, &outer_err);
  const double total_err = outer_err + err;
  if (!std::isfinite(p) || total_err > 1e-7) {
    throw NumericError("studentized range: quadrature did not converge (q=" +
                       std::to_string(q) + ", k=" + std::to_string(k) +
                       ", df=" + std::to_string(df) +
                       ", error estimate=" + std::to_string(total_err) + ")");
  }
  return std::clamp(p, 0.0, 1.0);
}

/// Inverse of studentized_range_cdf in q, by bisection to 1e-9.
inline double studentized_range_quantile(double p, int k, double df) {
  if (!(p > 0.0 && p < 1.0)) throw NumericError("studentized range quantile: p must lie in (0, 1)");
  double lo = 0.0, hi = 8.0;
  while (studentized_range_cdf(hi, k, df) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw NumericError("studentized range quantile: no upper bracket");
  }
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (studentized_range_cdf(mid, k, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace wildsurvey::special
