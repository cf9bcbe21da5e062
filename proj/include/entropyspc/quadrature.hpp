#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "entropyspc/error.hpp"

namespace entropyspc::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// three-term Legendre recurrence.
inline Rule gauss_legendre(int order) {
  if (order < 1) fail(ErrorKind::InvalidArgument, "quadrature order must be positive");
  Rule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = order * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[order - 1 - i] = z;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  return rule;
}

inline const Rule& cached_gauss_legendre(int order) {
  static std::mutex mutex;
  static std::map<int, Rule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, gauss_legendre(order)).first;
  return it->second;  // map nodes are stable
}

/// Composite rule on (0, 1): `panels` equal subintervals with `order` nodes each.
inline Rule unit_interval(int order, int panels) {
  if (panels < 1) fail(ErrorKind::InvalidArgument, "panel count must be positive");
  const Rule& base = cached_gauss_legendre(order);
  Rule rule;
  rule.nodes.reserve(static_cast<std::size_t>(order) * panels);
  rule.weights.reserve(rule.nodes.capacity());
  const double h = 1.0 / panels;
  for (int p = 0; p < panels; ++p) {
    for (int i = 0; i < order; ++i) {
      rule.nodes.push_back(h * (p + 0.5 * (base.nodes[i] + 1.0)));
      rule.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return rule;
}

/// Shape of one integration axis after the caller's affine normalisation.
enum class AxisKind {
  Bounded,   // [lo, hi]
  HalfLine,  // [0, +inf)
  Line,      // (-inf, +inf)
};

struct Axis {
  AxisKind kind = AxisKind::Bounded;
  double lo = 0.0;
  double hi = 1.0;
};

/// Nodes on the real axis with weights that already include the Jacobian of
/// the map from (0, 1): affine for bounded axes, t/(1-t) for the half line,
/// tan(pi(t-1/2)) for the full line.
struct MappedAxis {
  std::vector<double> points;
  std::vector<double> weights;
};

inline MappedAxis map_axis(const Axis& axis, int order, int panels) {
  const Rule r = unit_interval(order, panels);
  MappedAxis m;
  m.points.resize(r.nodes.size());
  m.weights.resize(r.nodes.size());
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const double t = r.nodes[i];
    switch (axis.kind) {
      case AxisKind::Bounded:
        m.points[i] = axis.lo + (axis.hi - axis.lo) * t;
        m.weights[i] = r.weights[i] * (axis.hi - axis.lo);
        break;
      case AxisKind::HalfLine: {
        const double s = 1.0 - t;
        m.points[i] = t / s;
        m.weights[i] = r.weights[i] / (s * s);
        break;
      }
      case AxisKind::Line: {
        const double a = std::numbers::pi * (t - 0.5);
        const double c = std::cos(a);
        m.points[i] = std::tan(a);
        m.weights[i] = r.weights[i] * std::numbers::pi / (c * c);
        break;
      }
    }
  }
  return m;
}

/// Quadratic exponent c0 + cu u + cv v + cuu u^2 + cvv v^2 + cuv u v.
struct Quadratic {
  double c0 = 0, cu = 0, cv = 0, cuu = 0, cvv = 0, cuv = 0;

  double operator()(double u, double v) const { return c0 + cu * u + cv * v + cuu * u * u + cvv * v * v + cuv * u * v; }
};

/// Raw moments E[u^i v^j] for i + j <= 4 of the normalised density
/// exp(-q) / Z, together with log Z.
struct MomentTable {
  double log_z = 0;
  std::array<std::array<double, 5>, 5> m{};  // m[i][j] = E[u^i v^j], valid for i + j <= 4

  double operator()(int i, int j) const { return m[i][j]; }
};

/// Integrates exp(-q) over a product of two mapped axes. The exponent is
/// shifted by its maximum over the grid so large |q| does not overflow.
class Integrator {
 public:
  Integrator(const Axis& u_axis, const Axis& v_axis, int order, int panels)
      : u_(map_axis(u_axis, order, panels)), v_(map_axis(v_axis, order, panels)), buffer_(u_.points.size() * v_.points.size()) {}

  std::size_t node_count() const noexcept { return buffer_.size(); }
  const MappedAxis& u_axis() const noexcept { return u_; }
  const MappedAxis& v_axis() const noexcept { return v_; }

  /// log of the integral of exp(-q); +inf when the grid sum is not finite.
  double log_partition(const Quadratic& q) {
    if (q.cuv == 0) return separable(q).log_z;
    const double shift = fill_exponents(q);
    if (!std::isfinite(shift)) return std::numeric_limits<double>::infinity();
    double total = 0;
    const std::size_t nv = v_.points.size();
    for (std::size_t i = 0; i < u_.points.size(); ++i) {
      double row = 0;
      const double* e = &buffer_[i * nv];
      for (std::size_t j = 0; j < nv; ++j) row += v_.weights[j] * std::exp(e[j]);
      total += u_.weights[i] * row;
    }
    if (!(total > 0) || !std::isfinite(total)) return std::numeric_limits<double>::infinity();
    return shift + std::log(total);
  }

  MomentTable moments(const Quadratic& q) {
    if (q.cuv == 0) {
      const MomentTable t = separable(q);
      if (!std::isfinite(t.log_z)) fail(ErrorKind::QuadratureError, "partition function is not finite");
      return t;
    }
    const double shift = fill_exponents(q);
    if (!std::isfinite(shift)) fail(ErrorKind::QuadratureError, "exponent is not finite on the grid");
    MomentTable out;
    std::array<std::array<double, 5>, 5> acc{};
    const std::size_t nv = v_.points.size();
    for (std::size_t i = 0; i < u_.points.size(); ++i) {
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
      const double* e = &buffer_[i * nv];
      for (std::size_t j = 0; j < nv; ++j) {
        const double g = v_.weights[j] * std::exp(e[j]);
        const double v = v_.points[j];
        const double v2 = v * v;
        s0 += g;
        s1 += g * v;
        s2 += g * v2;
        s3 += g * v2 * v;
        s4 += g * v2 * v2;
      }
      const std::array<double, 5> row{s0, s1, s2, s3, s4};
      const double u = u_.points[i];
      double up = u_.weights[i];
      for (int a = 0; a <= 4; ++a) {
        for (int b = 0; a + b <= 4; ++b) acc[a][b] += up * row[b];
        up *= u;
      }
    }
    const double z = acc[0][0];
    if (!(z > 0) || !std::isfinite(z)) fail(ErrorKind::QuadratureError, "partition function is not finite");
    out.log_z = shift + std::log(z);
    for (int a = 0; a <= 4; ++a) {
      for (int b = 0; a + b <= 4; ++b) out.m[a][b] = acc[a][b] / z;
    }
    return out;
  }

  /// Integral of fn(u, v, w) summed over nodes, where w = exp(-q - log Z) times
  /// the quadrature weight; i.e. the expectation of fn under the normalised density.
  template <class Fn>
  double expectation(const Quadratic& q, double log_z, Fn&& fn) const {
    double total = 0;
    for (std::size_t i = 0; i < u_.points.size(); ++i) {
      double row = 0;
      for (std::size_t j = 0; j < v_.points.size(); ++j) {
        const double u = u_.points[i], v = v_.points[j];
        const double e = -q(u, v) - log_z;
        row += v_.weights[j] * std::exp(e) * fn(u, v, e);
      }
      total += u_.weights[i] * row;
    }
    return total;
  }

 private:
  // exp(-q) factorises when there is no cross term: O(n) exponentials, and
  // the mixed moments are products of one-dimensional ones.
  MomentTable separable(const Quadratic& q) const {
    MomentTable out;
    const auto side = [](const MappedAxis& ax, double c1, double c2, std::array<double, 5>& mom) {
      double shift = -std::numeric_limits<double>::infinity();
      std::vector<double> e(ax.points.size());
      for (std::size_t i = 0; i < e.size(); ++i) {
        const double x = ax.points[i];
        e[i] = -(c1 * x + c2 * x * x);
        if (std::isnan(e[i])) return std::numeric_limits<double>::quiet_NaN();
        shift = std::max(shift, e[i]);
      }
      if (!std::isfinite(shift)) return std::numeric_limits<double>::quiet_NaN();
      mom.fill(0.0);
      for (std::size_t i = 0; i < e.size(); ++i) {
        const double x = ax.points[i];
        double g = ax.weights[i] * std::exp(e[i] - shift);
        for (int a = 0; a <= 4; ++a, g *= x) mom[a] += g;
      }
      return shift;
    };
    std::array<double, 5> mu{}, mv{};
    const double su = side(u_, q.cu, q.cuu, mu);
    const double sv = side(v_, q.cv, q.cvv, mv);
    const double z = mu[0] * mv[0];
    if (!std::isfinite(su) || !std::isfinite(sv) || !(z > 0) || !std::isfinite(z)) {
      out.log_z = std::numeric_limits<double>::infinity();
      return out;
    }
    out.log_z = -q.c0 + su + sv + std::log(z);
    for (int a = 0; a <= 4; ++a) {
      for (int b = 0; a + b <= 4; ++b) out.m[a][b] = (mu[a] / mu[0]) * (mv[b] / mv[0]);
    }
    return out;
  }

  double fill_exponents(const Quadratic& q) {
    double shift = -std::numeric_limits<double>::infinity();
    const std::size_t nv = v_.points.size();
    for (std::size_t i = 0; i < u_.points.size(); ++i) {
      const double u = u_.points[i];
      const double base = q.c0 + q.cu * u + q.cuu * u * u;
      const double slope = q.cv + q.cuv * u;
      double* e = &buffer_[i * nv];
      for (std::size_t j = 0; j < nv; ++j) {
        const double v = v_.points[j];
        e[j] = -(base + slope * v + q.cvv * v * v);
        if (std::isnan(e[j])) return std::numeric_limits<double>::quiet_NaN();
        shift = std::max(shift, e[j]);
      }
    }
    if (!std::isfinite(shift)) return shift;
    for (double& e : buffer_) e -= shift;
    return shift;
  }

  MappedAxis u_;
  MappedAxis v_;
  std::vector<double> buffer_;
};

/// Whether exp(-q) is integrable over the product of the two axes. Half-line
/// axes are [0, inf); boundary cases with a semidefinite quadratic part are
/// decided by the linear terms only where the reduction is exact.
inline bool integrable(const Quadratic& q, const Axis& u_axis, const Axis& v_axis) {
  const bool u_open = u_axis.kind != AxisKind::Bounded;
  const bool v_open = v_axis.kind != AxisKind::Bounded;
  if (!u_open && !v_open) return true;

  // One unbounded axis: for every value of the bounded coordinate the 1-d
  // exponent must grow along the open direction(s).
  auto one_open = [](double quad, double lin_at_lo, double lin_at_hi, AxisKind kind) {
    if (quad > 0) return true;
    if (quad < 0 || kind == AxisKind::Line) return false;
    return lin_at_lo > 0 && lin_at_hi > 0;
  };
  if (u_open && !v_open) {
    return one_open(q.cuu, q.cu + q.cuv * v_axis.lo, q.cu + q.cuv * v_axis.hi, u_axis.kind);
  }
  if (!u_open && v_open) {
    return one_open(q.cvv, q.cv + q.cuv * u_axis.lo, q.cv + q.cuv * u_axis.hi, v_axis.kind);
  }

  const bool u_line = u_axis.kind == AxisKind::Line;
  const bool v_line = v_axis.kind == AxisKind::Line;
  const double det4 = 4.0 * q.cuu * q.cvv - q.cuv * q.cuv;
  if (u_line && v_line) return q.cuu > 0 && q.cvv > 0 && det4 > 0;
  if (u_line || v_line) {
    // Minimise over the line coordinate; what remains is a 1-d problem on [0, inf).
    const double a_line = u_line ? q.cuu : q.cvv;
    if (!(a_line > 0)) return false;
    const double a_half = u_line ? q.cvv : q.cuu;
    const double lin_line = u_line ? q.cu : q.cv;
    const double lin_half = u_line ? q.cv : q.cu;
    const double reduced_quad = a_half - q.cuv * q.cuv / (4.0 * a_line);
    if (reduced_quad > 0) return true;
    if (reduced_quad < 0) return false;
    return lin_half - q.cuv * lin_line / (2.0 * a_line) > 0;
  }
  // Quadrant: both boundary rays must decay, and the interior cone must not
  // open a direction of growth.
  const bool u_ray = q.cuu > 0 || (q.cuu == 0 && q.cu > 0);
  const bool v_ray = q.cvv > 0 || (q.cvv == 0 && q.cv > 0);
  if (!u_ray || !v_ray) return false;
  if (q.cuv >= 0) return true;
  return q.cuu > 0 && q.cvv > 0 && det4 > 0;
}

}  // namespace entropyspc::quadrature
