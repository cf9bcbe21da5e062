#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "entropyspc/error.hpp"
#include "entropyspc/estimators.hpp"
#include "entropyspc/fdist.hpp"

namespace entropyspc {

/// Phase-I covariance of the coefficient vectors. Pooled is the usual sample
/// covariance (divisor k - 1). SuccessiveDifferences estimates it from
/// consecutive differences, S = sum d d^T / (2 (k - 1)), which is robust to
/// drift during phase I.
enum class CovarianceEstimator { Pooled, SuccessiveDifferences };

inline std::string_view to_string(CovarianceEstimator e) {
  return e == CovarianceEstimator::Pooled ? "pooled" : "successive";
}

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

struct HotellingBaseline {
  Vec2 mean{};
  Mat2 cov{};
  Mat2 cov_inv{};
  std::size_t k = 0;
  Method method = Method::LR;
  CovarianceEstimator estimator = CovarianceEstimator::Pooled;
};

inline HotellingBaseline build_baseline(std::span<const CoefficientVector> coeffs,
                                        CovarianceEstimator estimator = CovarianceEstimator::Pooled) {
  const std::size_t k = coeffs.size();
  if (k < 3) fail(ErrorKind::TooFewSamples, "a baseline needs at least 3 samples, got " + std::to_string(k));
  for (const auto& c : coeffs) {
    if (c.method != coeffs.front().method) fail(ErrorKind::InvalidArgument, "baseline mixes ME and LR coefficients");
    if (!std::isfinite(c.intercept) || !std::isfinite(c.slope)) {
      fail(ErrorKind::InvalidArgument, "non-finite coefficients for sample " + std::to_string(c.sample_id));
    }
  }
  HotellingBaseline b;
  b.k = k;
  b.method = coeffs.front().method;
  b.estimator = estimator;
  for (const auto& c : coeffs) {
    b.mean[0] += c.intercept;
    b.mean[1] += c.slope;
  }
  b.mean[0] /= static_cast<double>(k);
  b.mean[1] /= static_cast<double>(k);

  Mat2 s{};
  auto add = [&](double d0, double d1) {
    s[0][0] += d0 * d0;
    s[0][1] += d0 * d1;
    s[1][1] += d1 * d1;
  };
  double divisor = static_cast<double>(k - 1);
  if (estimator == CovarianceEstimator::Pooled) {
    for (const auto& c : coeffs) add(c.intercept - b.mean[0], c.slope - b.mean[1]);
  } else {
    for (std::size_t j = 1; j < k; ++j) {
      add(coeffs[j].intercept - coeffs[j - 1].intercept, coeffs[j].slope - coeffs[j - 1].slope);
    }
    divisor *= 2.0;
  }
  s[0][0] /= divisor;
  s[0][1] /= divisor;
  s[1][1] /= divisor;
  s[1][0] = s[0][1];
  b.cov = s;

  const double det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
  const double scale = std::abs(s[0][0] * s[1][1]);
  if (!(det > 1e-14 * scale) || !(scale > 0)) {
    fail(ErrorKind::SingularCovariance, "coefficient covariance is singular (det " + std::to_string(det) + ")");
  }
  b.cov_inv = {{{s[1][1] / det, -s[0][1] / det}, {-s[1][0] / det, s[0][0] / det}}};
  return b;
}

inline double t2_statistic(const HotellingBaseline& b, const CoefficientVector& c) {
  const double d0 = c.intercept - b.mean[0];
  const double d1 = c.slope - b.mean[1];
  const double q = d0 * (b.cov_inv[0][0] * d0 + b.cov_inv[0][1] * d1) + d1 * (b.cov_inv[1][0] * d0 + b.cov_inv[1][1] * d1);
  return std::max(q, 0.0);
}

/// Which UCL_F formula to use. Auto switches at k = 100.
enum class FisherRegime { Auto, SmallSample, LargeSample };

/// UCL from the F distribution for a p-variate T^2 chart with k phase-I samples:
///   k <= 100: p (k + 1)(k - 1) / (k^2 - p k) * F(alpha; p, k - p)
///   k >  100: p (k - 1) / (k - p) * F(alpha; p, k - p)
inline double fisher_ucl(int p, std::int64_t k, double alpha, FisherRegime regime = FisherRegime::Auto) {
  if (p < 1 || k <= p) fail(ErrorKind::InvalidDof, "fisher_ucl needs k > p >= 1");
  if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
  const double pd = p, kd = static_cast<double>(k);
  const double f = fdist::f_upper_quantile(alpha, pd, kd - pd);
  const bool small = regime == FisherRegime::SmallSample || (regime == FisherRegime::Auto && k <= 100);
  if (small) return pd * (kd + 1) * (kd - 1) / (kd * kd - pd * kd) * f;
  return pd * (kd - 1) / (kd - pd) * f;
}

/// Empirical (1 - alpha) quantile, linear interpolation between order
/// statistics (h = (m - 1)(1 - alpha) + 1, 1-based).
inline double quantile_ucl(std::span<const double> t2, double alpha) {
  if (t2.empty()) fail(ErrorKind::EmptyInput, "quantile of an empty list");
  if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
  std::vector<double> v(t2.begin(), t2.end());
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * (1.0 - alpha);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

struct ControlLimitSet {
  double ucl_f = 0;
  double ucl_quantile = 0;
  double lcl = 0;
  double alpha = 0.05;
  int p = 2;
  std::size_t k = 0;
};

struct ChartPoint {
  std::int64_t sample_id = 0;
  double t2 = 0;
  bool signal_fisher = false;
  bool signal_quantile = false;

  bool any_signal() const noexcept { return signal_fisher || signal_quantile; }
};

inline std::vector<double> t2_values(const HotellingBaseline& b, std::span<const CoefficientVector> coeffs) {
  std::vector<double> out;
  out.reserve(coeffs.size());
  for (const auto& c : coeffs) out.push_back(t2_statistic(b, c));
  return out;
}

/// Limits for a baseline: UCL_F from (p, k, alpha), quantile UCL from the
/// phase-I T^2 values.
inline ControlLimitSet make_limits(const HotellingBaseline& b, std::span<const double> phase1_t2, double alpha,
                                   FisherRegime regime = FisherRegime::Auto) {
  ControlLimitSet l;
  l.alpha = alpha;
  l.k = b.k;
  l.ucl_f = fisher_ucl(l.p, static_cast<std::int64_t>(b.k), alpha, regime);
  l.ucl_quantile = quantile_ucl(phase1_t2, alpha);
  return l;
}

/// Charts coefficient vectors against frozen limits. A point on the limit is
/// in control (strict t2 > UCL signals).
inline std::vector<ChartPoint> evaluate_chart(const HotellingBaseline& b, const ControlLimitSet& limits,
                                              std::span<const CoefficientVector> coeffs) {
  std::vector<ChartPoint> out;
  out.reserve(coeffs.size());
  for (const auto& c : coeffs) {
    const double t2 = t2_statistic(b, c);
    out.push_back({c.sample_id, t2, t2 > limits.ucl_f, t2 > limits.ucl_quantile});
  }
  return out;
}

}  // namespace entropyspc
