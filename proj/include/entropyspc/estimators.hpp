#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "entropyspc/error.hpp"
#include "entropyspc/maxent.hpp"
#include "entropyspc/profile_data.hpp"

namespace entropyspc {

enum class Method { ME, LR };

inline std::string_view to_string(Method m) { return m == Method::ME ? "me" : "lr"; }

struct CoefficientVector {
  double intercept = 0;
  double slope = 0;
  Method method = Method::LR;
  std::int64_t sample_id = 0;
};

/// Least-squares line through (x, y).
inline CoefficientVector lr_fit(std::span<const double> x, std::span<const double> y, std::int64_t sample_id = 0) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::InvalidArgument, "lr_fit needs matching x and y, n >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) fail(ErrorKind::DegenerateDesign, "all x values are equal; slope is unidentifiable");
  const double b = sxy / sxx;
  return {my - b * mx, b, Method::LR, sample_id};
}

inline CoefficientVector lr_fit(const ProfileDataset& dataset, std::int64_t sample_id) {
  return lr_fit(dataset.design().values(), dataset.sample(sample_id).y, sample_id);
}

/// Coefficients read off a fitted density: b = Cov(X, Y) / Var X,
/// a = E[Y] - b E[X].
inline CoefficientVector me_fit(const MaxEntDensity& density, std::int64_t sample_id = 0) {
  const DensityMoments m = density_moments(density);
  if (!(m.var_x > 1e-12 * std::max(1.0, m.e_x * m.e_x))) {
    fail(ErrorKind::ZeroVariance, "fitted density has no spread in x");
  }
  const double b = m.cov_xy / m.var_x;
  return {m.e_y - b * m.e_x, b, Method::ME, sample_id};
}

struct FitSettings {
  ConstraintPreset preset = ConstraintPreset::FullSecondOrder;
  std::optional<SupportRegion> support;  // preset default when empty
  SolverOptions solver;

  SupportRegion effective_support() const { return support ? *support : default_support(preset); }
};

/// ME route for one sample: moment targets from the data, one maxent solve.
inline CoefficientVector me_fit(std::span<const double> x, std::span<const double> y, const FitSettings& settings,
                                std::int64_t sample_id = 0) {
  const auto constraints = ConstraintSet::from_moments(settings.preset, sample_moments(x, y));
  return me_fit(solve_maxent(constraints, settings.effective_support(), settings.solver), sample_id);
}

/// One coefficient vector per sample, in sample order. Any failure aborts the
/// batch with the sample id prepended to the message.
inline std::vector<CoefficientVector> fit_all(const ProfileDataset& dataset, Method method,
                                              const FitSettings& settings = {}) {
  std::vector<CoefficientVector> out;
  out.reserve(dataset.k());
  const auto x = dataset.design().values();
  for (const auto& s : dataset.samples()) {
    try {
      out.push_back(method == Method::LR ? lr_fit(x, s.y, s.sample_id) : me_fit(x, s.y, settings, s.sample_id));
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + std::to_string(s.sample_id) + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace entropyspc
