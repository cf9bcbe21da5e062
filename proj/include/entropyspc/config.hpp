#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "entropyspc/arl_sim.hpp"
#include "entropyspc/error.hpp"
#include "entropyspc/io.hpp"

namespace entropyspc {

/// Settings shared by the three commands. Every key can come from a JSON
/// file; command-line flags override the file.
struct RunConfig {
  double alpha = 0.05;
  std::vector<Method> methods{Method::LR, Method::ME};
  ConstraintPreset preset = ConstraintPreset::FullSecondOrder;
  std::optional<SupportRegion> support;
  double tol = 1e-8;
  int max_iter = 100;
  int quad_order = 96;
  std::uint64_t seed = 12345;
  std::size_t replicates = 5000;
  std::optional<ShiftGrid> grid;
  CovarianceEstimator covariance = CovarianceEstimator::Pooled;
  // simulation model
  double intercept = 2.0;
  double slope = 3.0;
  double noise_variance = 0.01;
  std::vector<double> design{2.0, 2.2, 2.4, 2.1, 2.7};
  std::size_t phase1_k = 100;
  std::size_t phase1_draws = 1;
  std::vector<ShiftModel> models{ShiftModel::Intercept, ShiftModel::Slope, ShiftModel::Mixed};

  FitSettings fit_settings() const {
    FitSettings f;
    f.preset = preset;
    f.support = support;
    f.solver.tol = tol;
    f.solver.max_iter = max_iter;
    f.solver.quad_order = quad_order;
    return f;
  }

  SimulationConfig simulation() const {
    SimulationConfig s;
    s.model = TrueModel{intercept, slope, noise_variance, DesignVector(design)};
    s.phase1_k = phase1_k;
    s.phase1_draws = phase1_draws;
    s.alpha = alpha;
    s.replicates = replicates;
    s.seed = seed;
    s.models = models;
    s.grid = grid;
    s.methods = methods;
    s.fit = fit_settings();
    s.covariance = covariance;
    return s;
  }

  void validate() const {
    if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
    if (!(tol > 0)) fail(ErrorKind::InvalidArgument, "tol must be > 0");
    if (max_iter < 1) fail(ErrorKind::InvalidArgument, "max_iter must be >= 1");
    if (quad_order < 8 || quad_order > 1024) fail(ErrorKind::InvalidArgument, "quad_order must be in [8, 1024]");
    if (replicates < 1) fail(ErrorKind::InvalidArgument, "replicates must be >= 1");
    if (phase1_k < 3) fail(ErrorKind::InvalidArgument, "phase1_k must be >= 3");
    if (phase1_draws < 1) fail(ErrorKind::InvalidArgument, "phase1_draws must be >= 1");
    if (!(noise_variance > 0)) fail(ErrorKind::InvalidArgument, "noise_variance must be > 0");
    if (methods.empty()) fail(ErrorKind::InvalidArgument, "no method selected");
    if (models.empty()) fail(ErrorKind::InvalidArgument, "no shift model selected");
    if (support) support->validate();
    if (grid) grid->values();
    DesignVector{design};
  }
};

inline std::string method_label(std::span<const Method> methods) {
  if (methods.size() == 2) return "both";
  return std::string(to_string(methods.front()));
}

inline std::vector<Method> parse_methods(std::string_view s) {
  if (s == "both") return {Method::LR, Method::ME};
  return {io::parse_method(s)};
}

inline ConstraintPreset parse_preset(std::string_view s) {
  if (s == "first-cross") return ConstraintPreset::FirstOrderCross;
  if (s == "full-second") return ConstraintPreset::FullSecondOrder;
  fail(ErrorKind::InvalidArgument, "unknown preset '" + std::string(s) + "' (expected first-cross or full-second)");
}

inline CovarianceEstimator parse_covariance(std::string_view s) {
  if (s == "pooled") return CovarianceEstimator::Pooled;
  if (s == "successive") return CovarianceEstimator::SuccessiveDifferences;
  fail(ErrorKind::InvalidArgument, "unknown covariance estimator '" + std::string(s) + "'");
}

inline ShiftModel parse_model(std::string_view s) {
  if (s == "I") return ShiftModel::Intercept;
  if (s == "II") return ShiftModel::Slope;
  if (s == "III") return ShiftModel::Mixed;
  fail(ErrorKind::InvalidArgument, "unknown shift model '" + std::string(s) + "' (expected I, II or III)");
}

/// XLO,XHI,YLO,YHI with inf / -inf allowed.
inline SupportRegion parse_support(std::string_view s) {
  const auto cells = detail::split_commas(s);
  if (cells.size() != 4) fail(ErrorKind::InvalidArgument, "support needs four comma-separated bounds");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    if (!io::parse_extended(cells[i], v[i])) {
      fail(ErrorKind::InvalidArgument, "bad support bound '" + std::string(cells[i]) + "'");
    }
  }
  SupportRegion r{v[0], v[1], v[2], v[3]};
  r.validate();
  return r;
}

/// START:STOP:STEP
inline ShiftGrid parse_grid(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(':', start);
    parts.push_back(detail::trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  ShiftGrid g;
  if (parts.size() != 3 || !detail::parse_double(parts[0], g.start) || !detail::parse_double(parts[1], g.stop) ||
      !detail::parse_double(parts[2], g.step)) {
    fail(ErrorKind::InvalidArgument, "grid must look like START:STOP:STEP");
  }
  g.values();
  return g;
}

inline std::string grid_text(const ShiftGrid& g) {
  return io::number(g.start) + ":" + io::number(g.stop) + ":" + io::number(g.step);
}

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json j;
  j["alpha"] = c.alpha;
  j["method"] = method_label(c.methods);
  j["preset"] = c.preset == ConstraintPreset::FirstOrderCross ? "first-cross" : "full-second";
  const SupportRegion s = c.support ? *c.support : default_support(c.preset);
  j["support"] = {io::number(s.x_lo), io::number(s.x_hi), io::number(s.y_lo), io::number(s.y_hi)};
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["quad_order"] = c.quad_order;
  j["seed"] = c.seed;
  j["replicates"] = c.replicates;
  j["grid"] = c.grid ? json(grid_text(*c.grid)) : json(nullptr);
  j["covariance"] = to_string(c.covariance);
  j["intercept"] = c.intercept;
  j["slope"] = c.slope;
  j["noise_variance"] = c.noise_variance;
  j["design"] = c.design;
  j["phase1_k"] = c.phase1_k;
  j["phase1_draws"] = c.phase1_draws;
  j["models"] = json::array();
  for (auto m : c.models) j["models"].push_back(to_string(m));
  return j;
}

/// Applies the keys present in `j` on top of `c`. Unknown keys are errors so
/// typos do not pass silently.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::InvalidArgument, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "method") c.methods = parse_methods(v.get<std::string>());
      else if (key == "preset") c.preset = parse_preset(v.get<std::string>());
      else if (key == "support") {
        if (v.is_null()) {
          c.support.reset();
          continue;
        }
        if (v.is_string()) {
          c.support = parse_support(v.get<std::string>());
          continue;
        }
        if (!v.is_array() || v.size() != 4) fail(ErrorKind::InvalidArgument, "support must have four bounds");
        double b[4];
        for (int i = 0; i < 4; ++i) {
          if (v[i].is_number()) b[i] = v[i].get<double>();
          else if (!v[i].is_string() || !io::parse_extended(v[i].get<std::string>(), b[i])) {
            fail(ErrorKind::InvalidArgument, "bad support bound");
          }
        }
        c.support = SupportRegion{b[0], b[1], b[2], b[3]};
      } else if (key == "tol") c.tol = v.get<double>();
      else if (key == "max_iter") c.max_iter = v.get<int>();
      else if (key == "quad_order") c.quad_order = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "replicates") c.replicates = v.get<std::size_t>();
      else if (key == "grid") {
        if (v.is_null()) c.grid.reset();
        else c.grid = parse_grid(v.get<std::string>());
      } else if (key == "covariance") c.covariance = parse_covariance(v.get<std::string>());
      else if (key == "intercept") c.intercept = v.get<double>();
      else if (key == "slope") c.slope = v.get<double>();
      else if (key == "noise_variance") c.noise_variance = v.get<double>();
      else if (key == "design") c.design = v.get<std::vector<double>>();
      else if (key == "phase1_k") c.phase1_k = v.get<std::size_t>();
      else if (key == "phase1_draws") c.phase1_draws = v.get<std::size_t>();
      else if (key == "models") {
        c.models.clear();
        for (const auto& m : v) c.models.push_back(parse_model(m.get<std::string>()));
      } else fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("config value has the wrong type: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  RunConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::slurp(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, path + ": not valid JSON (" + e.what() + ")");
  }
  try {
    apply_json(c, j);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.detail());
  }
  return c;
}

}  // namespace entropyspc
