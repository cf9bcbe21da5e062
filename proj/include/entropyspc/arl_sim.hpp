#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "entropyspc/error.hpp"
#include "entropyspc/estimators.hpp"
#include "entropyspc/monitoring.hpp"
#include "entropyspc/profile_data.hpp"
#include "entropyspc/rng.hpp"

namespace entropyspc {

/// y = intercept + slope * x + e, e ~ N(0, noise_variance).
struct TrueModel {
  double intercept = 2.0;
  double slope = 3.0;
  double noise_variance = 0.01;
  DesignVector design{std::vector<double>{2.0, 2.2, 2.4, 2.1, 2.7}};

  void validate() const {
    if (!(noise_variance > 0) || !std::isfinite(noise_variance)) {
      fail(ErrorKind::InvalidArgument, "noise variance must be positive");
    }
    if (!std::isfinite(intercept) || !std::isfinite(slope)) fail(ErrorKind::InvalidArgument, "model must be finite");
  }
};

/// Models I, II, III: shift of the intercept, of the slope, or of both by s.
enum class ShiftModel { Intercept, Slope, Mixed };

inline std::string_view to_string(ShiftModel m) {
  switch (m) {
    case ShiftModel::Intercept: return "I";
    case ShiftModel::Slope: return "II";
    case ShiftModel::Mixed: return "III";
  }
  return "?";
}

struct ShiftScenario {
  ShiftModel model = ShiftModel::Intercept;
  double s = 0;
  TrueModel base;

  TrueModel shifted() const {
    TrueModel m = base;
    if (model != ShiftModel::Slope) m.intercept += s;
    if (model != ShiftModel::Intercept) m.slope += s;
    return m;
  }
};

enum class LimitScheme { Fisher, Quantile };

inline std::string_view to_string(LimitScheme s) { return s == LimitScheme::Fisher ? "ucl_f" : "quantile"; }

inline ProfileDataset simulate_phase1(const TrueModel& model, std::size_t k, std::uint64_t seed,
                                      std::uint64_t draw = 0) {
  model.validate();
  if (k < 3) fail(ErrorKind::TooFewSamples, "phase I needs k >= 3");
  rng::NormalStream noise(seed, rng::Domain::PhaseOne, draw, std::sqrt(model.noise_variance));
  const auto x = model.design.values();
  std::vector<ProfileSample> samples;
  samples.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    ProfileSample s{static_cast<std::int64_t>(j + 1), std::vector<double>(x.size())};
    for (std::size_t i = 0; i < x.size(); ++i) s.y[i] = model.intercept + model.slope * x[i] + noise();
    samples.push_back(std::move(s));
  }
  return ProfileDataset(model.design, std::move(samples), Phase::PhaseI);
}

/// Noise vector of monitoring replicate `r`. Shared by every shift, model and
/// scheme, so comparisons between them are paired.
inline std::vector<double> replicate_noise(const TrueModel& model, std::uint64_t seed, std::uint64_t r) {
  rng::NormalStream noise(seed, rng::Domain::Replicate, r, std::sqrt(model.noise_variance));
  std::vector<double> e(model.design.size());
  for (double& v : e) v = noise();
  return e;
}

struct BetaEstimate {
  double fisher = 0;    // fraction with T^2 <= UCL_F
  double quantile = 0;  // fraction with T^2 <= quantile UCL
};

inline CoefficientVector fit_one(Method method, std::span<const double> x, std::span<const double> y,
                                 const FitSettings& fit, std::int64_t id) {
  return method == Method::LR ? lr_fit(x, y, id) : me_fit(x, y, fit, id);
}

/// Probability that a sample from the scenario's model stays in control,
/// estimated over `replicates` fresh samples.
inline BetaEstimate estimate_beta(const ShiftScenario& scenario, const HotellingBaseline& baseline,
                                  const ControlLimitSet& limits, Method method, std::size_t replicates,
                                  std::uint64_t seed, const FitSettings& fit = {}) {
  if (replicates < 1) fail(ErrorKind::InvalidArgument, "replicates must be >= 1");
  const TrueModel m = scenario.shifted();
  const auto x = m.design.values();
  std::vector<double> y(x.size());
  std::size_t in_f = 0, in_q = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto e = replicate_noise(scenario.base, seed, r);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = m.intercept + m.slope * x[i] + e[i];
    const double t2 = t2_statistic(baseline, fit_one(method, x, y, fit, static_cast<std::int64_t>(r + 1)));
    in_f += t2 <= limits.ucl_f;
    in_q += t2 <= limits.ucl_quantile;
  }
  const double n = static_cast<double>(replicates);
  return {static_cast<double>(in_f) / n, static_cast<double>(in_q) / n};
}

struct ShiftGrid {
  double start = 0.01, stop = 0.32, step = 0.01;

  /// Grid values; rounded to 12 decimals so 0.1 + 0.2 style drift never
  /// reaches the report.
  std::vector<double> values() const {
    if (!(step > 0) || !std::isfinite(start) || !std::isfinite(stop) || stop < start) {
      fail(ErrorKind::InvalidArgument, "grid needs start <= stop and step > 0");
    }
    std::vector<double> out;
    for (std::size_t i = 0;; ++i) {
      const double s = std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12;
      if (s > stop + 1e-9 * step) break;
      out.push_back(s);
      if (out.size() > 100000) fail(ErrorKind::InvalidArgument, "grid has too many points");
    }
    return out;
  }
};

inline ShiftGrid default_grid(ShiftModel m) {
  switch (m) {
    case ShiftModel::Intercept: return {0.01, 0.32, 0.01};
    case ShiftModel::Slope: return {0.01, 0.14, 0.01};
    case ShiftModel::Mixed: return {0.01, 0.11, 0.01};
  }
  return {};
}

struct SimulationConfig {
  TrueModel model;
  std::size_t phase1_k = 100;
  std::size_t phase1_draws = 1;
  double alpha = 0.05;
  std::size_t replicates = 5000;
  std::uint64_t seed = 12345;
  std::vector<ShiftModel> models{ShiftModel::Intercept, ShiftModel::Slope, ShiftModel::Mixed};
  std::optional<ShiftGrid> grid;  // per-model defaults when empty
  std::vector<Method> methods{Method::LR, Method::ME};
  FitSettings fit;
  CovarianceEstimator covariance = CovarianceEstimator::Pooled;
};

struct ArlRow {
  ShiftModel model = ShiftModel::Intercept;
  double s = 0;
  Method method = Method::LR;
  LimitScheme scheme = LimitScheme::Fisher;
  double beta = 0;
  double arl = 0;  // 1 / (1 - beta); at s = 0 this is ARL0 = 1 / alpha-hat
};

struct PhaseOneSummary {
  std::size_t draw = 0;
  Method method = Method::LR;
  HotellingBaseline baseline;
  ControlLimitSet limits;
};

struct ArlReport {
  SimulationConfig config;
  std::vector<PhaseOneSummary> phase1;
  std::vector<ArlRow> rows;
};

inline double arl_from_beta(double beta) {
  return beta >= 1.0 ? std::numeric_limits<double>::infinity() : 1.0 / (1.0 - beta);
}

/// Calibrates on phase1_draws simulated phase-I datasets, then for every model
/// and shift (s = 0 first) charts `replicates` monitoring samples against each
/// method's baseline under both limits. With several draws, beta pools the
/// in-control counts over draws.
inline ArlReport arl_table(const SimulationConfig& cfg) {
  cfg.model.validate();
  if (cfg.replicates < 1 || cfg.phase1_draws < 1) fail(ErrorKind::InvalidArgument, "replicates and draws must be >= 1");
  if (cfg.methods.empty() || cfg.models.empty()) fail(ErrorKind::InvalidArgument, "no methods or models selected");

  ArlReport report;
  report.config = cfg;
  const auto x = cfg.model.design.values();

  for (std::size_t d = 0; d < cfg.phase1_draws; ++d) {
    const ProfileDataset ds = simulate_phase1(cfg.model, cfg.phase1_k, cfg.seed, d);
    for (Method method : cfg.methods) {
      const auto coeffs = fit_all(ds, method, cfg.fit);
      PhaseOneSummary s{d, method, build_baseline(coeffs, cfg.covariance), {}};
      s.limits = make_limits(s.baseline, t2_values(s.baseline, coeffs), cfg.alpha);
      report.phase1.push_back(s);
    }
  }

  std::vector<std::vector<double>> noise(cfg.replicates);
  for (std::size_t r = 0; r < cfg.replicates; ++r) noise[r] = replicate_noise(cfg.model, cfg.seed, r);

  std::vector<double> y(x.size());
  for (ShiftModel model : cfg.models) {
    std::vector<double> shifts{0.0};
    for (double s : (cfg.grid ? *cfg.grid : default_grid(model)).values()) {
      if (s != 0.0) shifts.push_back(s);
    }
    for (double s : shifts) {
      const TrueModel m = ShiftScenario{model, s, cfg.model}.shifted();
      // in-control counts per (method, scheme), pooled over draws
      std::vector<std::size_t> in_f(cfg.methods.size(), 0), in_q(cfg.methods.size(), 0);
      for (std::size_t r = 0; r < cfg.replicates; ++r) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = m.intercept + m.slope * x[i] + noise[r][i];
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
          const auto c = fit_one(cfg.methods[mi], x, y, cfg.fit, static_cast<std::int64_t>(r + 1));
          for (const auto& p1 : report.phase1) {
            if (p1.method != cfg.methods[mi]) continue;
            const double t2 = t2_statistic(p1.baseline, c);
            in_f[mi] += t2 <= p1.limits.ucl_f;
            in_q[mi] += t2 <= p1.limits.ucl_quantile;
          }
        }
      }
      const double total = static_cast<double>(cfg.replicates * cfg.phase1_draws);
      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        for (LimitScheme scheme : {LimitScheme::Fisher, LimitScheme::Quantile}) {
          const double beta = static_cast<double>(scheme == LimitScheme::Fisher ? in_f[mi] : in_q[mi]) / total;
          report.rows.push_back({model, s, cfg.methods[mi], scheme, beta, arl_from_beta(beta)});
        }
      }
    }
  }
  return report;
}

}  // namespace entropyspc
