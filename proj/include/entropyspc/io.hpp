#pragma once

#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "entropyspc/arl_sim.hpp"
#include "entropyspc/error.hpp"
#include "entropyspc/estimators.hpp"
#include "entropyspc/monitoring.hpp"
#include "entropyspc/profile_data.hpp"

namespace entropyspc::io {

using nlohmann::json;

inline std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return detail::format_double(v);
}

/// Parses numbers and the spellings inf / -inf / +inf.
inline bool parse_extended(std::string_view s, double& out) {
  if (s == "inf" || s == "+inf" || s == "Infinity") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (s == "-inf" || s == "-Infinity") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  return detail::parse_double(s, out) && !std::isnan(out);
}

inline Method parse_method(std::string_view s) {
  if (s == "me") return Method::ME;
  if (s == "lr") return Method::LR;
  fail(ErrorKind::InvalidArgument, "unknown method '" + std::string(s) + "' (expected me or lr)");
}

// ---- coefficient files: sample_id,a,b ----

inline std::vector<CoefficientVector> parse_coefficients(const std::string& text, Method method,
                                                         const std::string& origin = "<input>") {
  std::vector<std::string> storage;
  const auto rows = detail::read_rows(text, "sample_id,a,b", 3, origin, storage);
  if (rows.empty()) fail(ErrorKind::EmptyDataset, origin + ": no coefficient rows");
  std::vector<CoefficientVector> out;
  for (const auto& [line, cells] : rows) {
    const auto where = origin + ":" + std::to_string(line);
    CoefficientVector c;
    c.method = method;
    if (!detail::parse_int(cells[0], c.sample_id) || c.sample_id <= 0) {
      fail(ErrorKind::MalformedCsv, where + ": sample_id must be a positive integer");
    }
    if (!detail::parse_double(cells[1], c.intercept) || !std::isfinite(c.intercept) ||
        !detail::parse_double(cells[2], c.slope) || !std::isfinite(c.slope)) {
      fail(ErrorKind::MalformedCsv, where + ": bad coefficient value");
    }
    if (!out.empty() && c.sample_id <= out.back().sample_id) {
      fail(ErrorKind::MalformedCsv, where + ": sample ids must be increasing");
    }
    out.push_back(c);
  }
  return out;
}

inline std::vector<CoefficientVector> load_coefficients(const std::string& path, Method method) {
  return parse_coefficients(detail::slurp(path), method, path);
}

inline void write_coefficients(std::ostream& out, std::span<const CoefficientVector> coeffs) {
  out << "sample_id,a,b\n";
  for (const auto& c : coeffs) out << c.sample_id << ',' << number(c.intercept) << ',' << number(c.slope) << '\n';
}

// ---- chart points ----

struct ChartRow {
  Method method = Method::LR;
  CoefficientVector coeff;
  ChartPoint point;
};

inline constexpr std::string_view chart_header = "method,sample_id,a,b,t2,signal_ucl_f,signal_quantile";

inline void write_chart(std::ostream& out, std::span<const ChartRow> rows, const std::string& provenance = {}) {
  if (!provenance.empty()) out << "# config " << provenance << '\n';
  out << chart_header << '\n';
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.point.sample_id << ',' << number(r.coeff.intercept) << ','
        << number(r.coeff.slope) << ',' << number(r.point.t2) << ',' << int(r.point.signal_fisher) << ','
        << int(r.point.signal_quantile) << '\n';
  }
}

inline std::vector<ChartRow> parse_chart(const std::string& text, const std::string& origin = "<input>") {
  std::vector<std::string> storage;
  const auto rows = detail::read_rows(text, chart_header, 7, origin, storage);
  std::vector<ChartRow> out;
  for (const auto& [line, cells] : rows) {
    const auto where = origin + ":" + std::to_string(line);
    ChartRow r;
    try {
      r.method = parse_method(cells[0]);
    } catch (const Error&) {
      fail(ErrorKind::MalformedCsv, where + ": bad method");
    }
    std::int64_t sf = 0, sq = 0;
    if (!detail::parse_int(cells[1], r.point.sample_id) || !detail::parse_double(cells[2], r.coeff.intercept) ||
        !detail::parse_double(cells[3], r.coeff.slope) || !detail::parse_double(cells[4], r.point.t2) ||
        !detail::parse_int(cells[5], sf) || !detail::parse_int(cells[6], sq)) {
      fail(ErrorKind::MalformedCsv, where + ": bad field");
    }
    r.coeff.method = r.method;
    r.coeff.sample_id = r.point.sample_id;
    r.point.signal_fisher = sf != 0;
    r.point.signal_quantile = sq != 0;
    out.push_back(r);
  }
  return out;
}

// ---- baseline file ----

/// Per-method phase-I chart as stored in the baseline file.
struct BaselineChart {
  HotellingBaseline baseline;
  ControlLimitSet limits;
  std::vector<CoefficientVector> coeffs;
  std::vector<double> t2;
};

struct BaselineFile {
  std::optional<DesignVector> design;  // absent when built from coefficient files
  json config = json::object();
  std::vector<BaselineChart> charts;

  const BaselineChart* chart(Method m) const {
    for (const auto& c : charts) {
      if (c.baseline.method == m) return &c;
    }
    return nullptr;
  }
};

inline json to_json(const Mat2& m) { return json::array({json::array({m[0][0], m[0][1]}), json::array({m[1][0], m[1][1]})}); }

inline json to_json(const BaselineFile& b) {
  json j;
  j["format"] = "entropyspc-baseline/1";
  j["design"] = b.design ? json(std::vector<double>(b.design->values().begin(), b.design->values().end())) : json(nullptr);
  j["config"] = b.config;
  j["charts"] = json::array();
  for (const auto& c : b.charts) {
    json cj;
    cj["method"] = to_string(c.baseline.method);
    cj["covariance"] = to_string(c.baseline.estimator);
    cj["k"] = c.baseline.k;
    cj["mean"] = {c.baseline.mean[0], c.baseline.mean[1]};
    cj["cov"] = to_json(c.baseline.cov);
    cj["cov_inv"] = to_json(c.baseline.cov_inv);
    cj["alpha"] = c.limits.alpha;
    cj["p"] = c.limits.p;
    cj["lcl"] = c.limits.lcl;
    cj["ucl_f"] = c.limits.ucl_f;
    cj["ucl_quantile"] = c.limits.ucl_quantile;
    cj["samples"] = json::array();
    for (std::size_t i = 0; i < c.coeffs.size(); ++i) {
      cj["samples"].push_back(
          {{"sample_id", c.coeffs[i].sample_id}, {"a", c.coeffs[i].intercept}, {"b", c.coeffs[i].slope}, {"t2", c.t2[i]}});
    }
    j["charts"].push_back(cj);
  }
  return j;
}

inline BaselineFile baseline_from_json(const json& j, const std::string& origin = "<baseline>") {
  try {
    if (j.at("format") != "entropyspc-baseline/1") fail(ErrorKind::BaselineMismatch, origin + ": unknown baseline format");
    BaselineFile b;
    if (!j.at("design").is_null()) b.design = DesignVector(j.at("design").get<std::vector<double>>());
    b.config = j.value("config", json::object());
    auto mat = [](const json& m) {
      Mat2 out{};
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) out[r][c] = m.at(r).at(c).get<double>();
      return out;
    };
    for (const auto& cj : j.at("charts")) {
      BaselineChart c;
      c.baseline.method = parse_method(cj.at("method").get<std::string>());
      const auto cov_name = cj.at("covariance").get<std::string>();
      if (cov_name != "pooled" && cov_name != "successive") fail(ErrorKind::BaselineMismatch, origin + ": bad covariance");
      c.baseline.estimator = cov_name == "pooled" ? CovarianceEstimator::Pooled : CovarianceEstimator::SuccessiveDifferences;
      c.baseline.k = cj.at("k").get<std::size_t>();
      c.baseline.mean = {cj.at("mean").at(0).get<double>(), cj.at("mean").at(1).get<double>()};
      c.baseline.cov = mat(cj.at("cov"));
      c.baseline.cov_inv = mat(cj.at("cov_inv"));
      c.limits.alpha = cj.at("alpha").get<double>();
      c.limits.p = cj.at("p").get<int>();
      c.limits.lcl = cj.at("lcl").get<double>();
      c.limits.ucl_f = cj.at("ucl_f").get<double>();
      c.limits.ucl_quantile = cj.at("ucl_quantile").get<double>();
      c.limits.k = c.baseline.k;
      for (const auto& s : cj.at("samples")) {
        c.coeffs.push_back({s.at("a").get<double>(), s.at("b").get<double>(), c.baseline.method,
                            s.at("sample_id").get<std::int64_t>()});
        c.t2.push_back(s.at("t2").get<double>());
      }
      b.charts.push_back(std::move(c));
    }
    if (b.charts.empty()) fail(ErrorKind::BaselineMismatch, origin + ": baseline has no charts");
    return b;
  } catch (const json::exception& e) {
    fail(ErrorKind::BaselineMismatch, origin + ": malformed baseline (" + e.what() + ")");
  }
}

inline BaselineFile load_baseline(const std::string& path) {
  const std::string text = detail::slurp(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::BaselineMismatch, path + ": not valid JSON (" + e.what() + ")");
  }
  return baseline_from_json(j, path);
}

// ---- ARL report ----

inline void write_arl_csv(std::ostream& out, const ArlReport& report, const std::string& provenance = {}) {
  if (!provenance.empty()) out << "# config " << provenance << '\n';
  out << "model,s,method,limit_scheme,beta,arl\n";
  for (const auto& r : report.rows) {
    out << to_string(r.model) << ',' << number(r.s) << ',' << to_string(r.method) << ',' << to_string(r.scheme) << ','
        << number(r.beta) << ',' << number(r.arl) << '\n';
  }
}

inline std::vector<ArlRow> parse_arl_csv(const std::string& text, const std::string& origin = "<input>") {
  std::vector<std::string> storage;
  const auto rows = detail::read_rows(text, "model,s,method,limit_scheme,beta,arl", 6, origin, storage);
  std::vector<ArlRow> out;
  for (const auto& [line, cells] : rows) {
    const auto where = origin + ":" + std::to_string(line);
    ArlRow r;
    if (cells[0] == "I") r.model = ShiftModel::Intercept;
    else if (cells[0] == "II") r.model = ShiftModel::Slope;
    else if (cells[0] == "III") r.model = ShiftModel::Mixed;
    else fail(ErrorKind::MalformedCsv, where + ": bad model");
    if (cells[2] != "me" && cells[2] != "lr") fail(ErrorKind::MalformedCsv, where + ": bad method");
    r.method = cells[2] == "me" ? Method::ME : Method::LR;
    if (cells[3] != "ucl_f" && cells[3] != "quantile") fail(ErrorKind::MalformedCsv, where + ": bad limit scheme");
    r.scheme = cells[3] == "ucl_f" ? LimitScheme::Fisher : LimitScheme::Quantile;
    if (!parse_extended(cells[1], r.s) || !parse_extended(cells[4], r.beta) || !parse_extended(cells[5], r.arl)) {
      fail(ErrorKind::MalformedCsv, where + ": bad number");
    }
    out.push_back(r);
  }
  return out;
}

/// 64-bit FNV-1a, used to fingerprint the effective configuration.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json arl_metadata(const ArlReport& report, const json& config) {
  json j;
  j["seed"] = report.config.seed;
  j["replicates"] = report.config.replicates;
  j["config_hash"] = fnv1a_hex(config.dump());
  j["generator"] = rng::generator_name;
  j["config"] = config;
  j["phase1"] = json::array();
  for (const auto& p : report.phase1) {
    j["phase1"].push_back({{"draw", p.draw},
                           {"method", to_string(p.method)},
                           {"k", p.baseline.k},
                           {"covariance", to_string(p.baseline.estimator)},
                           {"mean", {p.baseline.mean[0], p.baseline.mean[1]}},
                           {"cov", to_json(p.baseline.cov)},
                           {"ucl_f", p.limits.ucl_f},
                           {"ucl_quantile", p.limits.ucl_quantile}});
  }
  return j;
}

}  // namespace entropyspc::io
