#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "entropyspc/error.hpp"
#include "entropyspc/profile_data.hpp"
#include "entropyspc/quadrature.hpp"

namespace entropyspc {

/// Moment-constraint families. FirstOrderCross constrains {x, y, xy};
/// FullSecondOrder constrains {x, y, x^2, y^2, xy}. NormalizationOnly is the
/// r = 0 case (maximum entropy over the support alone).
enum class ConstraintPreset { NormalizationOnly, FirstOrderCross, FullSecondOrder };

/// Basis function x^px * y^py.
struct Monomial {
  int px = 0;
  int py = 0;
  friend bool operator==(const Monomial&, const Monomial&) = default;
};

inline std::span<const Monomial> preset_basis(ConstraintPreset preset) {
  static constexpr std::array<Monomial, 3> cross{{{1, 0}, {0, 1}, {1, 1}}};
  static constexpr std::array<Monomial, 5> full{{{1, 0}, {0, 1}, {2, 0}, {0, 2}, {1, 1}}};
  switch (preset) {
    case ConstraintPreset::NormalizationOnly: return {};
    case ConstraintPreset::FirstOrderCross: return cross;
    case ConstraintPreset::FullSecondOrder: return full;
  }
  return {};
}

inline std::string_view to_string(ConstraintPreset preset) {
  switch (preset) {
    case ConstraintPreset::NormalizationOnly: return "normalization-only";
    case ConstraintPreset::FirstOrderCross: return "first-cross";
    case ConstraintPreset::FullSecondOrder: return "full-second";
  }
  return "?";
}

/// Targets m_i for E[h_i] = m_i. The normalisation target (1) is implicit.
class ConstraintSet {
 public:
  static ConstraintSet normalization_only() { return ConstraintSet(ConstraintPreset::NormalizationOnly, {}); }

  static ConstraintSet first_order_cross(double mean_x, double mean_y, double mean_xy) {
    return ConstraintSet(ConstraintPreset::FirstOrderCross, {mean_x, mean_y, mean_xy});
  }

  static ConstraintSet full_second_order(double mean_x, double mean_y, double mean_x2, double mean_y2,
                                         double mean_xy) {
    const double var_x = mean_x2 - mean_x * mean_x;
    const double var_y = mean_y2 - mean_y * mean_y;
    const double cov = mean_xy - mean_x * mean_y;
    const double rel = 1e-12;
    if (!(var_x > rel * mean_x2) || !(var_y > rel * mean_y2)) {
      fail(ErrorKind::InvalidConstraints, "second-moment targets leave no variance (need E[x^2] > E[x]^2, E[y^2] > E[y]^2)");
    }
    if (!(var_x * var_y - cov * cov > rel * var_x * var_y)) {
      fail(ErrorKind::InvalidConstraints, "targets are perfectly correlated; no density attains them");
    }
    return ConstraintSet(ConstraintPreset::FullSecondOrder, {mean_x, mean_y, mean_x2, mean_y2, mean_xy});
  }

  static ConstraintSet from_moments(ConstraintPreset preset, const SampleMoments& m) {
    switch (preset) {
      case ConstraintPreset::NormalizationOnly: return normalization_only();
      case ConstraintPreset::FirstOrderCross: return first_order_cross(m.mean_x, m.mean_y, m.mean_xy);
      case ConstraintPreset::FullSecondOrder:
        return full_second_order(m.mean_x, m.mean_y, m.mean_x2, m.mean_y2, m.mean_xy);
    }
    fail(ErrorKind::InvalidArgument, "unknown preset");
  }

  ConstraintPreset preset() const noexcept { return preset_; }
  std::span<const Monomial> basis() const noexcept { return preset_basis(preset_); }
  std::span<const double> targets() const noexcept { return targets_; }
  std::size_t size() const noexcept { return targets_.size(); }

  /// Target for a basis monomial, if constrained.
  std::optional<double> target(Monomial mono) const {
    const auto b = basis();
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b[i] == mono) return targets_[i];
    }
    return std::nullopt;
  }

 private:
  ConstraintSet(ConstraintPreset preset, std::vector<double> targets) : preset_(preset), targets_(std::move(targets)) {
    for (double t : targets_) {
      if (!std::isfinite(t)) fail(ErrorKind::InvalidConstraints, "constraint targets must be finite");
    }
  }

  ConstraintPreset preset_;
  std::vector<double> targets_;
};

/// Product support [x_lo, x_hi] x [y_lo, y_hi]; infinite bounds allowed.
struct SupportRegion {
  double x_lo = -std::numeric_limits<double>::infinity();
  double x_hi = std::numeric_limits<double>::infinity();
  double y_lo = -std::numeric_limits<double>::infinity();
  double y_hi = std::numeric_limits<double>::infinity();

  static SupportRegion plane() { return {}; }
  static SupportRegion quadrant() {
    return {0.0, std::numeric_limits<double>::infinity(), 0.0, std::numeric_limits<double>::infinity()};
  }
  static SupportRegion box(double x_lo, double x_hi, double y_lo, double y_hi) { return {x_lo, x_hi, y_lo, y_hi}; }

  void validate() const {
    if (std::isnan(x_lo) || std::isnan(x_hi) || std::isnan(y_lo) || std::isnan(y_hi) || !(x_lo < x_hi) ||
        !(y_lo < y_hi) || x_lo == std::numeric_limits<double>::infinity() ||
        y_lo == std::numeric_limits<double>::infinity() || x_hi == -std::numeric_limits<double>::infinity() ||
        y_hi == -std::numeric_limits<double>::infinity()) {
      fail(ErrorKind::InvalidArgument, "support needs x_lo < x_hi and y_lo < y_hi");
    }
  }

  friend bool operator==(const SupportRegion&, const SupportRegion&) = default;
};

/// Default supports: the plane for FullSecondOrder (the solution is then the
/// moment-matched Gaussian), the positive quadrant otherwise.
inline SupportRegion default_support(ConstraintPreset preset) {
  return preset == ConstraintPreset::FullSecondOrder ? SupportRegion::plane() : SupportRegion::quadrant();
}

struct QuadratureSettings {
  int order = 96;
  int panels = 1;
};

/// Affine change of variables used for integration:
///   x = cx + sx * u,   y = cy + shear * u + sy * v.
/// Half-infinite axes are mapped onto [0, inf) (sx or sy negative for an
/// upper-bounded axis); bounded axes onto a finite interval in u or v.
struct Frame {
  double cx = 0, sx = 1, cy = 0, sy = 1, shear = 0;
};

struct MaxEntDensity {
  std::vector<double> lambdas;  // lambda_0 .. lambda_r, density = exp(-1 - lambda_0 - sum lambda_i h_i)
  ConstraintSet constraints = ConstraintSet::normalization_only();
  SupportRegion support;
  double residual_norm = 0;  // max |E_f[h_i] - m_i| over constraints, including normalisation
  int iterations = 0;
  QuadratureSettings quadrature;
  Frame frame;

  ConstraintPreset preset() const noexcept { return constraints.preset(); }
};

struct DensityMoments {
  double e_x = 0;
  double e_y = 0;
  double var_x = 0;
  double var_y = 0;
  double cov_xy = 0;
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 100;
  int quad_order = 96;
  int max_panels = 16;
  double normalization_rtol = 1e-10;
  /// Decorrelate the integration frame when y has full-line support and
  /// second moments are constrained.
  bool allow_shear = true;
  /// Optional starting multipliers lambda_1..lambda_r in the stored convention.
  std::optional<std::vector<double>> initial;
  /// Called with (iteration, dual objective) before each Newton step.
  std::function<void(int, double)> on_iteration;
};

namespace detail {

using quadrature::Axis;
using quadrature::AxisKind;
using quadrature::Quadratic;

/// c + a * p + b * q in two generic variables (p, q).
struct Linear {
  double c = 0, a = 0, b = 0;
};

inline Quadratic times(const Linear& l, const Linear& r) {
  return {l.c * r.c, l.c * r.a + l.a * r.c, l.c * r.b + l.b * r.c, l.a * r.a, l.b * r.b, l.a * r.b + l.b * r.a};
}

inline Quadratic as_quadratic(const Linear& l) { return {l.c, l.a, l.b, 0, 0, 0}; }

inline Quadratic& accumulate(Quadratic& acc, const Quadratic& q, double w) {
  acc.c0 += w * q.c0;
  acc.cu += w * q.cu;
  acc.cv += w * q.cv;
  acc.cuu += w * q.cuu;
  acc.cvv += w * q.cvv;
  acc.cuv += w * q.cuv;
  return acc;
}

/// p^px q^py for px + py <= 2 as a quadratic in the underlying variables.
inline Quadratic monomial(const Linear& p, const Linear& q, Monomial m) {
  if (m.px == 0 && m.py == 0) return {1, 0, 0, 0, 0, 0};
  if (m.px == 1 && m.py == 0) return as_quadratic(p);
  if (m.px == 0 && m.py == 1) return as_quadratic(q);
  if (m.px == 2 && m.py == 0) return times(p, p);
  if (m.px == 0 && m.py == 2) return times(q, q);
  if (m.px == 1 && m.py == 1) return times(p, q);
  fail(ErrorKind::InvalidArgument, "monomial degree above 2");
}

inline double expect(const Quadratic& q, const quadrature::MomentTable& t) {
  return q.c0 + q.cu * t(1, 0) + q.cv * t(0, 1) + q.cuu * t(2, 0) + q.cvv * t(0, 2) + q.cuv * t(1, 1);
}

// x and y as functions of the frame variables (u, v).
inline Linear x_of(const Frame& f) { return {f.cx, f.sx, 0}; }
inline Linear y_of(const Frame& f) { return {f.cy, f.shear, f.sy}; }
// u and v as functions of (x, y).
inline Linear u_of(const Frame& f) { return {-f.cx / f.sx, 1.0 / f.sx, 0}; }
inline Linear v_of(const Frame& f) {
  const Linear u = u_of(f);
  return {(-f.cy - f.shear * u.c) / f.sy, -f.shear * u.a / f.sy, 1.0 / f.sy};
}

/// sum_i lambda_i h_i expressed in the other coordinate system; h_i are the
/// preset monomials in the source coordinates, p and q the source variables
/// written in the destination ones.
inline Quadratic exponent_in(std::span<const Monomial> basis, std::span<const double> lambdas, const Linear& p,
                             const Linear& q) {
  Quadratic out;
  for (std::size_t i = 0; i < basis.size(); ++i) accumulate(out, monomial(p, q, basis[i]), lambdas[i]);
  return out;
}

/// Reads preset coefficients off a quadratic; returns the constant term.
inline double coefficients_of(const Quadratic& q, std::span<const Monomial> basis, std::span<double> out) {
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto m = basis[i];
    if (m.px == 1 && m.py == 0) out[i] = q.cu;
    else if (m.px == 0 && m.py == 1) out[i] = q.cv;
    else if (m.px == 2 && m.py == 0) out[i] = q.cuu;
    else if (m.px == 0 && m.py == 2) out[i] = q.cvv;
    else if (m.px == 1 && m.py == 1) out[i] = q.cuv;
  }
  return q.c0;
}

struct AxisFrame {
  double center = 0, scale = 1;
  Axis axis;
};

/// Normalises one support interval. `mean` and `spread` describe where the
/// mass is expected; they set the scale of half-line and full-line axes.
inline AxisFrame frame_axis(double lo, double hi, double mean, double spread) {
  const bool lo_finite = std::isfinite(lo);
  const bool hi_finite = std::isfinite(hi);
  AxisFrame f;
  if (lo_finite && hi_finite) {
    f.center = 0.5 * (lo + hi);
    f.scale = 0.5 * (hi - lo);
    f.axis = {AxisKind::Bounded, -1.0, 1.0};
  } else if (lo_finite) {
    f.center = lo;
    f.scale = spread > 0 && std::isfinite(spread) ? spread : 1.0;
    f.axis = {AxisKind::HalfLine, 0.0, 0.0};
  } else if (hi_finite) {
    f.center = hi;
    f.scale = -(spread > 0 && std::isfinite(spread) ? spread : 1.0);
    f.axis = {AxisKind::HalfLine, 0.0, 0.0};
  } else {
    f.center = std::isfinite(mean) ? mean : 0.0;
    f.scale = spread > 0 && std::isfinite(spread) ? spread : 1.0;
    f.axis = {AxisKind::Line, 0.0, 0.0};
  }
  return f;
}

/// Spread to use for a half-line axis: root mean square distance from the
/// finite bound when available, else the mean distance.
inline double half_line_spread(double bound, double mean, std::optional<double> second) {
  if (second) {
    const double rms2 = *second - 2.0 * bound * mean + bound * bound;
    if (rms2 > 0) return std::sqrt(rms2);
  }
  return std::abs(mean - bound);
}

struct Layout {
  Frame frame;
  Axis u_axis;
  Axis v_axis;
};

/// Frame built from the location/scale summary (mean, second moment, cross
/// moment) of the target or of a reference density.
inline Layout make_layout(const SupportRegion& s, double mean_x, double mean_y, std::optional<double> mean_x2,
                          std::optional<double> mean_y2, std::optional<double> mean_xy, bool allow_shear) {
  auto spread = [](double lo, double hi, double mean, std::optional<double> second) {
    if (std::isfinite(lo) && !std::isfinite(hi)) return half_line_spread(lo, mean, second);
    if (!std::isfinite(lo) && std::isfinite(hi)) return half_line_spread(hi, mean, second);
    if (second) {
      const double var = *second - mean * mean;
      if (var > 0) return std::sqrt(var);
    }
    return 1.0;
  };
  const AxisFrame fx = frame_axis(s.x_lo, s.x_hi, mean_x, spread(s.x_lo, s.x_hi, mean_x, mean_x2));
  Layout out;
  out.frame.cx = fx.center;
  out.frame.sx = fx.scale;
  out.u_axis = fx.axis;

  const bool y_line = !std::isfinite(s.y_lo) && !std::isfinite(s.y_hi);
  if (allow_shear && y_line && mean_x2 && mean_y2 && mean_xy) {
    const double var_x = *mean_x2 - mean_x * mean_x;
    const double var_y = *mean_y2 - mean_y * mean_y;
    const double cov = *mean_xy - mean_x * mean_y;
    if (var_x > 0 && var_y > 0) {
      const double slope = cov / var_x;  // regression of y on x
      const double resid = var_y - slope * cov;
      if (resid > 0) {
        const double mean_u = (mean_x - fx.center) / fx.scale;
        out.frame.shear = slope * fx.scale;
        out.frame.cy = mean_y - out.frame.shear * mean_u;
        out.frame.sy = std::sqrt(resid);
        out.v_axis = {AxisKind::Line, 0.0, 0.0};
        return out;
      }
    }
  }
  const AxisFrame fy = frame_axis(s.y_lo, s.y_hi, mean_y, spread(s.y_lo, s.y_hi, mean_y, mean_y2));
  out.frame.cy = fy.center;
  out.frame.sy = fy.scale;
  out.v_axis = fy.axis;
  return out;
}

inline double log_abs_jacobian(const Frame& f) { return std::log(std::abs(f.sx * f.sy)); }

}  // namespace detail

/// Fits the maximum-entropy density with the given moment targets by damped
/// Newton on the convex dual
///   D(lambda) = log Z(lambda) + sum_i lambda_i m_i,
/// whose gradient is the vector of moment residuals and whose Hessian is the
/// covariance of the basis functions. lambda_0 is recovered as log Z - 1.
/// Integrals use a tensor Gauss-Legendre grid in a normalised frame; the panel
/// count doubles until the normalisation integral is stable.
inline MaxEntDensity solve_maxent(const ConstraintSet& constraints, const SupportRegion& support,
                                  const SolverOptions& opts = {}) {
  using namespace detail;
  support.validate();
  if (!(opts.tol > 0) || opts.max_iter < 1) fail(ErrorKind::InvalidArgument, "tol must be > 0 and max_iter >= 1");

  const auto basis = constraints.basis();
  const auto targets = constraints.targets();
  const std::size_t r = basis.size();
  const auto preset = constraints.preset();

  // Attainability of the first moments and integrability of the family.
  const auto tx = constraints.target({1, 0});
  const auto ty = constraints.target({0, 1});
  if (tx && !(*tx > support.x_lo && *tx < support.x_hi)) {
    fail(ErrorKind::Infeasible, "target E[x] lies outside the x support");
  }
  if (ty && !(*ty > support.y_lo && *ty < support.y_hi)) {
    fail(ErrorKind::Infeasible, "target E[y] lies outside the y support");
  }
  const bool x_line = !std::isfinite(support.x_lo) && !std::isfinite(support.x_hi);
  const bool y_line = !std::isfinite(support.y_lo) && !std::isfinite(support.y_hi);
  const bool x_open = !std::isfinite(support.x_lo) || !std::isfinite(support.x_hi);
  const bool y_open = !std::isfinite(support.y_lo) || !std::isfinite(support.y_hi);
  if (preset == ConstraintPreset::NormalizationOnly && (x_open || y_open)) {
    fail(ErrorKind::DivergentIntegral, "an unconstrained density has no finite normaliser on an unbounded support");
  }
  if (preset == ConstraintPreset::FirstOrderCross && (x_line || y_line)) {
    fail(ErrorKind::DivergentIntegral, "first-order exponent cannot decay in both directions of a full-line axis");
  }

  const double mean_x = tx ? *tx : 0.5 * (support.x_lo + support.x_hi);
  const double mean_y = ty ? *ty : 0.5 * (support.y_lo + support.y_hi);
  const Layout layout = make_layout(support, mean_x, mean_y, constraints.target({2, 0}), constraints.target({0, 2}),
                                    constraints.target({1, 1}), opts.allow_shear);
  const Frame& frame = layout.frame;
  const Linear U = u_of(frame), V = v_of(frame), X = x_of(frame), Y = y_of(frame);

  // Frame targets: E[h_i(u, v)] is a linear combination of the original
  // targets; closure of each preset basis under the frame map guarantees only
  // constrained monomials appear.
  auto original_moment = [&](Monomial m) -> double {
    if (m.px == 0 && m.py == 0) return 1.0;
    const auto t = constraints.target(m);
    return t ? *t : 0.0;
  };
  auto expect_original = [&](const Quadratic& q) {
    return q.c0 + q.cu * original_moment({1, 0}) + q.cv * original_moment({0, 1}) + q.cuu * original_moment({2, 0}) +
           q.cvv * original_moment({0, 2}) + q.cuv * original_moment({1, 1});
  };
  Eigen::VectorXd frame_target(r);
  for (std::size_t i = 0; i < r; ++i) frame_target[i] = expect_original(monomial(U, V, basis[i]));

  // Original basis functions written in frame variables, for residuals on the original scale.
  std::vector<Quadratic> h_in_frame(r);
  for (std::size_t i = 0; i < r; ++i) h_in_frame[i] = monomial(X, Y, basis[i]);

  // Starting point: zero on bounded axes; on open axes, a separable density
  // matching the frame means (exponential on a half line, Gaussian when the
  // second moment is constrained).
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r));
  if (opts.initial) {
    if (opts.initial->size() != r) fail(ErrorKind::InvalidArgument, "initial multipliers have the wrong length");
    const Quadratic q = exponent_in(basis, *opts.initial, X, Y);
    std::vector<double> tmp(r);
    coefficients_of(q, basis, tmp);
    for (std::size_t i = 0; i < r; ++i) lam[i] = tmp[i];
  } else {
    auto seed_axis = [&](const quadrature::Axis& axis, Monomial lin, Monomial sq) {
      if (axis.kind == AxisKind::Bounded) return;
      std::optional<std::size_t> i_lin, i_sq;
      for (std::size_t i = 0; i < r; ++i) {
        if (basis[i] == lin) i_lin = i;
        if (basis[i] == sq) i_sq = i;
      }
      const double mu = i_lin ? frame_target[*i_lin] : 0.0;
      if (i_sq) {
        const double var = frame_target[*i_sq] - mu * mu;
        if (var > 0) {
          lam[*i_sq] = 0.5 / var;
          if (i_lin) lam[*i_lin] = -mu / var;
        }
      } else if (i_lin && mu > 0) {
        lam[*i_lin] = 1.0 / mu;
      }
    };
    seed_axis(layout.u_axis, {1, 0}, {2, 0});
    seed_axis(layout.v_axis, {0, 1}, {0, 2});
  }

  auto exponent = [&](const Eigen::VectorXd& l) {
    Quadratic q;
    for (std::size_t i = 0; i < r; ++i) {
      const auto m = basis[i];
      accumulate(q, monomial(Linear{0, 1, 0}, Linear{0, 0, 1}, m), l[static_cast<Eigen::Index>(i)]);
    }
    return q;
  };

  if (!quadrature::integrable(exponent(lam), layout.u_axis, layout.v_axis)) {
    fail(ErrorKind::DivergentIntegral, "starting multipliers give a non-integrable density on this support");
  }

  int panels = 1;
  int iterations = 0;
  bool hit_boundary = false;
  quadrature::MomentTable table;
  double residual = std::numeric_limits<double>::infinity();

  while (true) {
    quadrature::Integrator grid(layout.u_axis, layout.v_axis, opts.quad_order, panels);
    auto dual = [&](const Eigen::VectorXd& l) {
      const Quadratic q = exponent(l);
      if (!quadrature::integrable(q, layout.u_axis, layout.v_axis)) return std::numeric_limits<double>::infinity();
      return grid.log_partition(q) + l.dot(frame_target);
    };

    bool converged = false;
    for (; iterations < opts.max_iter; ++iterations) {
      table = grid.moments(exponent(lam));
      Eigen::VectorXd expected(r);
      residual = 0;
      for (std::size_t i = 0; i < r; ++i) {
        const auto m = basis[i];
        expected[i] = table(m.px, m.py);
        residual = std::max(residual, std::abs(expect(h_in_frame[i], table) - targets[i]));
      }
      if (r == 0) residual = 0;
      const Eigen::VectorXd grad = frame_target - expected;  // gradient of the dual
      if (opts.on_iteration) opts.on_iteration(iterations, dual(lam));
      if (residual <= opts.tol) {
        converged = true;
        break;
      }

      Eigen::MatrixXd hess(r, r);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
          hess(i, j) = table(basis[i].px + basis[j].px, basis[i].py + basis[j].py) - expected[i] * expected[j];
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
      const auto& ev = eig.eigenvalues();
      const double ev_max = ev.maxCoeff();
      const double ev_min = ev.minCoeff();
      Eigen::VectorXd step;
      if (ev_min > 0 && ev_max / ev_min <= 1e12) {
        step = -(eig.eigenvectors() * (eig.eigenvectors().transpose() * grad).cwiseQuotient(ev));
      } else {
        step = -grad;  // ill-conditioned: steepest descent
      }

      const double d0 = dual(lam);
      const double slope = grad.dot(step);
      double alpha = 1.0;
      bool accepted = false;
      for (int k = 0; k < 60; ++k, alpha *= 0.5) {
        const Eigen::VectorXd trial = lam + alpha * step;
        const double d1 = dual(trial);
        if (!std::isfinite(d1)) {
          hit_boundary = true;
          continue;
        }
        // Near the optimum the decrease falls below rounding in the dual; a
        // full Newton step that does not raise it is then accepted.
        const bool roundoff = k == 0 && d1 - d0 <= 16 * std::numeric_limits<double>::epsilon() * std::abs(d0);
        if (d1 <= d0 + 1e-4 * alpha * slope || roundoff) {
          lam = trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // No descent possible: either the optimum sits on the integrability
        // boundary (targets unattainable) or rounding has taken over.
        if (hit_boundary || residual > 1e3 * opts.tol) {
          fail(ErrorKind::Infeasible, "moment residual " + std::to_string(residual) +
                                          " cannot be reduced; targets are not attainable on this support");
        }
        fail(ErrorKind::NoConvergence, "line search stalled at residual " + std::to_string(residual));
      }
      if (lam.cwiseAbs().maxCoeff() > 1e8) {
        fail(ErrorKind::Infeasible, "multipliers diverge; targets are not attainable on this support");
      }
    }
    if (!converged) {
      if (hit_boundary) {
        fail(ErrorKind::Infeasible, "solver pressed against the integrability boundary; residual " +
                                        std::to_string(residual));
      }
      fail(ErrorKind::NoConvergence, "no convergence after " + std::to_string(opts.max_iter) + " iterations, residual " +
                                         std::to_string(residual));
    }

    // Quadrature refinement: accept once doubling the panels leaves the
    // normaliser unchanged.
    quadrature::Integrator finer(layout.u_axis, layout.v_axis, opts.quad_order, panels * 2);
    const double log_z_fine = finer.log_partition(exponent(lam));
    if (std::abs(std::expm1(log_z_fine - table.log_z)) <= opts.normalization_rtol) break;
    panels *= 2;
    if (panels > opts.max_panels) {
      fail(ErrorKind::QuadratureError, "normalisation integral did not stabilise within " +
                                           std::to_string(opts.max_panels) + " panels");
    }
  }

  // Back to the stored convention on (x, y).
  std::vector<double> frame_lambdas(lam.data(), lam.data() + r);
  const Quadratic in_xy = exponent_in(basis, frame_lambdas, U, V);
  MaxEntDensity out;
  out.lambdas.assign(r + 1, 0.0);
  const double constant = coefficients_of(in_xy, basis, std::span<double>(out.lambdas).subspan(1));
  // sum lambda'_i h_i(u, v) = constant + sum lambda_i h_i(x, y)
  out.lambdas[0] = table.log_z + constant + log_abs_jacobian(frame) - 1.0;
  out.constraints = constraints;
  out.support = support;
  out.residual_norm = residual;
  out.iterations = iterations;
  out.quadrature = {opts.quad_order, panels};
  out.frame = frame;
  return out;
}

namespace detail {

inline Layout layout_for(const MaxEntDensity& d) {
  const Frame& f = d.frame;
  Layout l;
  l.frame = f;
  auto axis_of = [](double lo, double hi, double c, double s) -> Axis {
    const bool lf = std::isfinite(lo), hf = std::isfinite(hi);
    if (lf && hf) {
      const double a = (lo - c) / s, b = (hi - c) / s;
      return {AxisKind::Bounded, std::min(a, b), std::max(a, b)};
    }
    if (lf || hf) return {AxisKind::HalfLine, 0, 0};
    return {AxisKind::Line, 0, 0};
  };
  l.u_axis = axis_of(d.support.x_lo, d.support.x_hi, f.cx, f.sx);
  l.v_axis = f.shear != 0 ? Axis{AxisKind::Line, 0, 0} : axis_of(d.support.y_lo, d.support.y_hi, f.cy, f.sy);
  return l;
}

/// Exponent sum_i lambda_i h_i in frame variables (without lambda_0).
inline Quadratic frame_exponent(const MaxEntDensity& d, std::span<const double> lambdas_1r) {
  return exponent_in(d.constraints.basis(), lambdas_1r, x_of(d.frame), y_of(d.frame));
}

inline quadrature::MomentTable frame_moments(const MaxEntDensity& d) {
  const Layout l = layout_for(d);
  quadrature::Integrator grid(l.u_axis, l.v_axis, d.quadrature.order, d.quadrature.panels);
  return grid.moments(frame_exponent(d, std::span<const double>(d.lambdas).subspan(1)));
}

}  // namespace detail

/// Wraps externally supplied multipliers (e.g. published tables) as a density.
/// lambda_0 is kept as given; residual_norm reports |integral of f - 1| and the
/// recorded targets are the density's own normalised moments.
inline MaxEntDensity density_from_multipliers(ConstraintPreset preset, std::vector<double> lambdas,
                                              const SupportRegion& support, const SolverOptions& opts = {}) {
  using namespace detail;
  support.validate();
  const auto basis = preset_basis(preset);
  if (lambdas.size() != basis.size() + 1) fail(ErrorKind::InvalidArgument, "expected r + 1 multipliers");
  for (double l : lambdas) {
    if (!std::isfinite(l)) fail(ErrorKind::InvalidArgument, "multipliers must be finite");
  }

  // A frame from the shape of the exponent itself.
  const auto coef = [&](Monomial m) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if (basis[i] == m) return lambdas[i + 1];
    }
    return 0.0;
  };
  const double a = coef({1, 0}), b = coef({0, 1}), axx = coef({2, 0}), ayy = coef({0, 2}), axy = coef({1, 1});
  std::optional<double> mx2, my2, mxy;
  double mx = 0, my = 0;
  const double det = 4 * axx * ayy - axy * axy;
  if (axx > 0 && ayy > 0 && det > 0) {
    // Gaussian reading of the exponent: precision [[2axx, axy], [axy, 2ayy]].
    const double vx = 2 * ayy / det, vy = 2 * axx / det, c = -axy / det;
    mx = -(vx * a + c * b);
    my = -(c * a + vy * b);
    mx2 = vx + mx * mx;
    my2 = vy + my * my;
    mxy = c + mx * my;
  } else {
    auto anchor = [](double lo, double hi) { return std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0); };
    const double x0 = anchor(support.x_lo, support.x_hi), y0 = anchor(support.y_lo, support.y_hi);
    const double rate_x = std::abs(a + axy * y0), rate_y = std::abs(b + axy * x0);
    mx = x0 + (std::isfinite(support.x_lo) ? 1 : -1) * (rate_x > 0 ? 1 / rate_x : 1.0);
    my = y0 + (std::isfinite(support.y_lo) ? 1 : -1) * (rate_y > 0 ? 1 / rate_y : 1.0);
  }
  const Layout layout = make_layout(support, mx, my, mx2, my2, mxy, opts.allow_shear);

  MaxEntDensity out;
  out.lambdas = std::move(lambdas);
  out.support = support;
  out.frame = layout.frame;
  const Quadratic q = exponent_in(basis, std::span<const double>(out.lambdas).subspan(1), x_of(layout.frame),
                                  y_of(layout.frame));
  if (!quadrature::integrable(q, layout.u_axis, layout.v_axis)) {
    fail(ErrorKind::DivergentIntegral, "exponent is unbounded above on the support");
  }

  int panels = 1;
  double log_z = 0;
  while (true) {
    quadrature::Integrator grid(layout.u_axis, layout.v_axis, opts.quad_order, panels);
    quadrature::Integrator finer(layout.u_axis, layout.v_axis, opts.quad_order, 2 * panels);
    log_z = grid.log_partition(q);
    if (std::abs(std::expm1(finer.log_partition(q) - log_z)) <= opts.normalization_rtol) break;
    panels *= 2;
    if (panels > opts.max_panels) fail(ErrorKind::QuadratureError, "normalisation integral did not stabilise");
  }
  out.quadrature = {opts.quad_order, panels};

  // Own moments as the recorded targets.
  quadrature::Integrator grid(layout.u_axis, layout.v_axis, opts.quad_order, panels);
  const auto mt = grid.moments(q);
  std::vector<double> own(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) own[i] = expect(monomial(x_of(layout.frame), y_of(layout.frame), basis[i]), mt);
  switch (preset) {
    case ConstraintPreset::NormalizationOnly: out.constraints = ConstraintSet::normalization_only(); break;
    case ConstraintPreset::FirstOrderCross: out.constraints = ConstraintSet::first_order_cross(own[0], own[1], own[2]); break;
    case ConstraintPreset::FullSecondOrder:
      out.constraints = ConstraintSet::full_second_order(own[0], own[1], own[2], own[3], own[4]);
      break;
  }
  const double log_z_xy = mt.log_z + log_abs_jacobian(layout.frame);
  out.residual_norm = std::abs(std::expm1(log_z_xy - 1.0 - out.lambdas[0]));
  return out;
}

/// Integral of f over the support (1 for a converged fit).
inline double normalization(const MaxEntDensity& d) {
  const auto t = detail::frame_moments(d);
  return std::exp(t.log_z + detail::log_abs_jacobian(d.frame) - 1.0 - d.lambdas[0]);
}

/// Moments of the normalised density, on the solver's quadrature grid.
inline DensityMoments density_moments(const MaxEntDensity& d) {
  const auto t = detail::frame_moments(d);
  const Frame& f = d.frame;
  const double eu = t(1, 0), ev = t(0, 1);
  const double vu = t(2, 0) - eu * eu, vv = t(0, 2) - ev * ev, cuv = t(1, 1) - eu * ev;
  DensityMoments m;
  m.e_x = f.cx + f.sx * eu;
  m.e_y = f.cy + f.shear * eu + f.sy * ev;
  m.var_x = f.sx * f.sx * vu;
  m.var_y = f.shear * f.shear * vu + 2 * f.shear * f.sy * cuv + f.sy * f.sy * vv;
  m.cov_xy = f.sx * (f.shear * vu + f.sy * cuv);
  return m;
}

/// Expectations E_f[h_i] of the preset basis under the normalised density.
inline std::vector<double> basis_expectations(const MaxEntDensity& d) {
  const auto t = detail::frame_moments(d);
  const auto basis = d.constraints.basis();
  std::vector<double> out(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    out[i] = detail::expect(detail::monomial(detail::x_of(d.frame), detail::y_of(d.frame), basis[i]), t);
  }
  return out;
}

/// -integral f log f, evaluated directly by quadrature of the stored density.
inline double shannon_entropy(const MaxEntDensity& d) {
  const detail::Layout l = detail::layout_for(d);
  quadrature::Integrator grid(l.u_axis, l.v_axis, d.quadrature.order, d.quadrature.panels);
  const auto lam = std::span<const double>(d.lambdas).subspan(1);
  const auto q = detail::frame_exponent(d, lam);
  const double log_jac = detail::log_abs_jacobian(d.frame);
  // f(x, y) = exp(-1 - lambda_0 - q); the frame density is f * |J|.
  const double log_norm = -1.0 - d.lambdas[0] + log_jac;
  const double h = -grid.expectation(q, -log_norm, [&](double u, double v, double) {
    const double log_f = -1.0 - d.lambdas[0] - q(u, v);
    return log_f;
  });
  return h;
}

/// Dual objective log Z(lambda) + sum lambda_i m_i at arbitrary multipliers
/// lambda_1..lambda_r, on the density's grid and with its targets.
inline double dual_objective(const MaxEntDensity& d, std::span<const double> lambdas_1r) {
  const detail::Layout l = detail::layout_for(d);
  const auto q = detail::frame_exponent(d, lambdas_1r);
  if (!quadrature::integrable(q, l.u_axis, l.v_axis)) return std::numeric_limits<double>::infinity();
  quadrature::Integrator grid(l.u_axis, l.v_axis, d.quadrature.order, d.quadrature.panels);
  double value = grid.log_partition(q) + detail::log_abs_jacobian(d.frame);
  const auto targets = d.constraints.targets();
  for (std::size_t i = 0; i < lambdas_1r.size(); ++i) value += lambdas_1r[i] * targets[i];
  return value;
}

/// Generic expectation of fn(x, y) under the density (test and diagnostics hook).
template <class Fn>
double expectation(const MaxEntDensity& d, Fn&& fn) {
  const detail::Layout l = detail::layout_for(d);
  quadrature::Integrator grid(l.u_axis, l.v_axis, d.quadrature.order, d.quadrature.panels);
  const auto q = detail::frame_exponent(d, std::span<const double>(d.lambdas).subspan(1));
  const auto t = grid.moments(q);
  const Frame f = d.frame;
  return grid.expectation(q, t.log_z, [&](double u, double v, double) {
    return fn(f.cx + f.sx * u, f.cy + f.shear * u + f.sy * v);
  });
}

}  // namespace entropyspc
