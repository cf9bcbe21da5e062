#pragma once

#include <cmath>
#include <limits>

#include "entropyspc/error.hpp"

namespace entropyspc::fdist {

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz.
inline double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const int m2 = 2 * m;
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
    if (std::abs(del - 1.0) < 1e-16) return h;
  }
  return h;
}

/// lgamma(x) minus its Stirling approximation, for x >= 15.
inline double stirling_tail(double x) {
  const double r = 1.0 / x, r2 = r * r;
  return r * (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 * (1.0 / 1680 - r2 / 1188))));
}

/// log B(a, b). For a large argument, lgamma(b) - lgamma(a + b) is formed
/// from Stirling terms so the two large values never cancel.
inline double log_beta(double a, double b) {
  if (a > b) std::swap(a, b);
  if (b < 15) return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double diff = -(b - 0.5) * std::log1p(a / b) - a * std::log(a + b) + a + stirling_tail(b) - stirling_tail(a + b);
  return std::lgamma(a) + diff;
}

}  // namespace detail

/// Regularised incomplete beta I_x(a, b), with y = 1 - x supplied by a
/// caller that can form it without cancellation.
inline double incomplete_beta(double a, double b, double x, double y) {
  if (!(a > 0) || !(b > 0)) fail(ErrorKind::InvalidDof, "beta parameters must be positive");
  if (!(x >= 0 && x <= 1)) fail(ErrorKind::InvalidArgument, "incomplete beta needs x in [0, 1]");
  if (x == 0) return 0.0;
  if (y == 0) return 1.0;
  // log of whichever argument is near 1 goes through log1p of the other
  const double lx = x <= y ? std::log(x) : std::log1p(-y);
  const double ly = x <= y ? std::log1p(-x) : std::log(y);
  const double front = std::exp(a * lx + b * ly - detail::log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, y) / b;
}

inline double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

/// x with I_x(a, b) = p. Newton steps, kept inside a shrinking bisection
/// bracket so the iteration cannot escape [0, 1].
inline double inverse_incomplete_beta(double a, double b, double p, double tol = 1e-14) {
  if (!(p >= 0 && p <= 1)) fail(ErrorKind::InvalidArgument, "probability must be in [0, 1]");
  if (p == 0) return 0.0;
  if (p == 1) return 1.0;
  double lo = 0.0, hi = 1.0, x = 0.5;
  const double lb = detail::log_beta(a, b);
  for (int it = 0; it < 500; ++it) {
    const double f = incomplete_beta(a, b, x) - p;
    if (f == 0) return x;
    (f < 0 ? lo : hi) = x;
    const double dens = std::exp((a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - lb);
    double next = x - f / dens;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= tol * x || hi - lo <= tol * lo) return next;
    x = next;
  }
  return x;
}

/// Upper-alpha point of the F(d1, d2) distribution: P(F > q) = alpha.
inline double f_upper_quantile(double alpha, double d1, double d2) {
  if (!(d1 > 0) || !(d2 > 0)) fail(ErrorKind::InvalidDof, "F degrees of freedom must be positive");
  if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
  // F = (d2 / d1) * B / C with B ~ Beta(d1/2, d2/2) and C = 1 - B. Solve
  // for whichever of B, C is small so that 1 - root keeps full precision.
  const double c = inverse_incomplete_beta(0.5 * d2, 0.5 * d1, alpha);
  if (c <= 0.5) return d2 / d1 * (1.0 - c) / c;
  const double b = inverse_incomplete_beta(0.5 * d1, 0.5 * d2, 1.0 - alpha);
  return d2 / d1 * b / (1.0 - b);
}

inline double f_cdf(double q, double d1, double d2) {
  if (!(q > 0)) return 0.0;
  const double denom = d1 * q + d2;
  return incomplete_beta(0.5 * d1, 0.5 * d2, d1 * q / denom, d2 / denom);
}

}  // namespace entropyspc::fdist
