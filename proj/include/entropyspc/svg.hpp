#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "entropyspc/arl_sim.hpp"
#include "entropyspc/monitoring.hpp"

namespace entropyspc::svg {

namespace detail {

inline std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Plot {
  double width = 720, height = 420, left = 64, right = 150, top = 40, bottom = 52;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

/// Roughly five round tick values covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {2.0, 5.0, 10.0}) {
    if (raw > step) step = m * mag;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

inline void frame(std::ostringstream& o, const Plot& p, const std::string& title, const std::string& xlabel,
                  const std::string& ylabel, int xdigits, int ydigits) {
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(p.width, 0) << "\" height=\"" << fmt(p.height, 0)
    << "\" viewBox=\"0 0 " << fmt(p.width, 0) << ' ' << fmt(p.height, 0)
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << fmt(p.width, 0) << "\" height=\"" << fmt(p.height, 0)
    << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(p.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  const double xa = p.px(p.x0), xb = p.px(p.x1), ya = p.py(p.y0), yb = p.py(p.y1);
  o << "<path d=\"M" << fmt(xa) << ' ' << fmt(yb) << " V" << fmt(ya) << " H" << fmt(xb)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(p.x0, p.x1)) {
    o << "<line x1=\"" << fmt(p.px(t)) << "\" y1=\"" << fmt(ya) << "\" x2=\"" << fmt(p.px(t)) << "\" y2=\""
      << fmt(ya + 5) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(p.px(t)) << "\" y=\"" << fmt(ya + 18) << "\" text-anchor=\"middle\">" << fmt(t, xdigits)
      << "</text>\n";
  }
  for (double t : ticks(p.y0, p.y1)) {
    o << "<line x1=\"" << fmt(xa - 5) << "\" y1=\"" << fmt(p.py(t)) << "\" x2=\"" << fmt(xa) << "\" y2=\""
      << fmt(p.py(t)) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(xa - 8) << "\" y=\"" << fmt(p.py(t) + 4) << "\" text-anchor=\"end\">" << fmt(t, ydigits)
      << "</text>\n";
  }
  o << "<text x=\"" << fmt((xa + xb) / 2) << "\" y=\"" << fmt(p.height - 12) << "\" text-anchor=\"middle\">"
    << escape(xlabel) << "</text>\n";
  o << "<text transform=\"translate(16 " << fmt((ya + yb) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(ylabel) << "</text>\n";
}

}  // namespace detail

/// T^2 control chart: points joined in sample order, UCL_F and quantile UCL
/// as labelled horizontal rules, signalling points drawn red.
inline std::string control_chart(std::span<const ChartPoint> points, const ControlLimitSet& limits,
                                 const std::string& title) {
  using detail::fmt;
  detail::Plot p;
  p.x0 = 0;
  p.x1 = static_cast<double>(std::max<std::size_t>(points.size(), 1)) + 1;
  double ymax = std::max(limits.ucl_f, limits.ucl_quantile);
  for (const auto& c : points) ymax = std::max(ymax, c.t2);
  p.y1 = ymax > 0 && std::isfinite(ymax) ? ymax * 1.1 : 1.0;

  std::ostringstream o;
  detail::frame(o, p, title, "sample", "T²", 0, 2);
  auto rule = [&](double y, const char* color, const std::string& label) {
    if (!std::isfinite(y)) return;
    o << "<line x1=\"" << fmt(p.px(p.x0)) << "\" y1=\"" << fmt(p.py(y)) << "\" x2=\"" << fmt(p.px(p.x1)) << "\" y2=\""
      << fmt(p.py(y)) << "\" stroke=\"" << color << "\" stroke-dasharray=\"6 4\"/>\n";
    o << "<text x=\"" << fmt(p.px(p.x1) + 6) << "\" y=\"" << fmt(p.py(y) + 4) << "\" fill=\"" << color << "\">"
      << detail::escape(label) << "</text>\n";
  };
  rule(limits.ucl_f, "#555555", "UCL_F = " + fmt(limits.ucl_f, 4));
  rule(limits.ucl_quantile, "#1f77b4", "UCL_q = " + fmt(limits.ucl_quantile, 4));
  rule(limits.lcl, "#999999", "LCL = 0");

  if (!points.empty()) {
    o << "<polyline fill=\"none\" stroke=\"#333333\" points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
      o << (i ? " " : "") << fmt(p.px(static_cast<double>(i + 1))) << ',' << fmt(p.py(points[i].t2));
    }
    o << "\"/>\n";
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool sig = points[i].any_signal();
    o << "<circle cx=\"" << fmt(p.px(static_cast<double>(i + 1))) << "\" cy=\"" << fmt(p.py(points[i].t2))
      << "\" r=\"" << (sig ? "5" : "3.5") << "\" fill=\"" << (sig ? "#d62728" : "#1f77b4") << "\"><title>sample "
      << points[i].sample_id << ": " << fmt(points[i].t2, 6) << "</title></circle>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// beta against s for each method x limit scheme present in the rows of one model.
inline std::string beta_curves(std::span<const ArlRow> rows, ShiftModel model) {
  using detail::fmt;
  detail::Plot p;
  p.x0 = 0;
  double smax = 0;
  for (const auto& r : rows) {
    if (r.model == model) smax = std::max(smax, r.s);
  }
  p.x1 = smax > 0 ? smax : 1.0;
  p.y0 = 0;
  p.y1 = 1;

  std::ostringstream o;
  detail::frame(o, p, "Model " + std::string(to_string(model)) + ": beta against shift", "s", "β", 2, 1);
  struct Series {
    Method method;
    LimitScheme scheme;
    const char* color;
    const char* dash;
  };
  const Series series[] = {{Method::LR, LimitScheme::Fisher, "#ff7f0e", "6 3"},
                           {Method::LR, LimitScheme::Quantile, "#2ca02c", "none"},
                           {Method::ME, LimitScheme::Fisher, "#9467bd", "2 3"},
                           {Method::ME, LimitScheme::Quantile, "#d62728", "none"}};
  int legend = 0;
  for (const auto& s : series) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
      if (r.model == model && r.method == s.method && r.scheme == s.scheme) pts.emplace_back(r.s, r.beta);
    }
    if (pts.empty()) continue;
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" stroke-dasharray=\"" << s.dash
      << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      o << (i ? " " : "") << fmt(p.px(pts[i].first)) << ',' << fmt(p.py(pts[i].second));
    }
    o << "\"/>\n";
    for (const auto& [x, y] : pts) {
      o << "<circle cx=\"" << fmt(p.px(x)) << "\" cy=\"" << fmt(p.py(y)) << "\" r=\"2\" fill=\"" << s.color << "\"/>\n";
    }
    const double ly = p.top + 14 + 18 * legend++;
    const double lx = p.px(p.x1) + 12;
    o << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 24) << "\" y2=\"" << fmt(ly)
      << "\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" stroke-dasharray=\"" << s.dash << "\"/>";
    o << "<text x=\"" << fmt(lx + 30) << "\" y=\"" << fmt(ly + 4) << "\">" << to_string(s.method) << ' '
      << to_string(s.scheme) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace entropyspc::svg
