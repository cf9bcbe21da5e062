// entropyspc: profile monitoring with ME and LR coefficient charts.
//
//   entropyspc phase1 DATA.csv [--coeffs-csv COEFS.csv] ...
//   entropyspc phase2 BASELINE.json [DATA.csv] [--coeffs-csv COEFS.csv] ...
//   entropyspc simulate ...
//
// Exit status: 0 clean, 1 signal (or phase-I calibration warning), 2 usage or data error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "entropyspc/entropyspc.hpp"

namespace fs = std::filesystem;
using namespace entropyspc;

namespace {

constexpr int kClean = 0;
constexpr int kSignal = 1;
constexpr int kError = 2;

struct Flags {
  std::string config;
  std::optional<std::string> method, preset, support, grid, covariance, models;
  std::optional<double> alpha, noise_variance;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates, phase1_draws, phase1_k;
  std::optional<int> quad_order;
  std::string out = ".";
  std::string coeffs_csv;
  bool force = false;
  std::vector<std::string> positional;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file");
  sub->add_option("--method", f.method, "me, lr or both")->check(CLI::IsMember({"me", "lr", "both"}));
  sub->add_option("--alpha", f.alpha, "false-alarm rate for the limits");
  sub->add_option("--seed", f.seed, "master seed (falls back to ENTROPYSPC_SEED)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--support", f.support, "ME support XLO,XHI,YLO,YHI; inf and -inf allowed");
  sub->add_option("--preset", f.preset, "ME constraints")->check(CLI::IsMember({"first-cross", "full-second"}));
  sub->add_option("--replicates", f.replicates, "monitoring replicates per shift");
  sub->add_option("--grid", f.grid, "shift grid START:STOP:STEP");
  sub->add_option("--coeffs-csv", f.coeffs_csv, "precomputed coefficients (sample_id,a,b) instead of raw profiles");
  sub->add_flag("--force", f.force, "do not fail on the phase-I calibration warning");
  sub->add_option("--covariance", f.covariance, "phase-I covariance estimator")
      ->check(CLI::IsMember({"pooled", "successive"}));
  sub->add_option("--noise-variance", f.noise_variance, "simulation noise variance");
  sub->add_option("--models", f.models, "shift models, e.g. I,II,III");
  sub->add_option("--phase1-draws", f.phase1_draws, "independent phase-I calibrations to pool");
  sub->add_option("--phase1-k", f.phase1_k, "simulated phase-I sample count");
  sub->add_option("--quad-order", f.quad_order, "Gauss-Legendre nodes per axis and panel");
}

/// Precedence: flag, then config file, then ENTROPYSPC_SEED, then the default.
RunConfig effective_config(const Flags& f) {
  RunConfig c;
  bool seed_in_file = false;
  if (!f.config.empty()) {
    c = load_config(f.config);
    const auto j = nlohmann::json::parse(detail::slurp(f.config));
    seed_in_file = j.contains("seed");
  }
  if (!seed_in_file) {
    if (const char* env = std::getenv("ENTROPYSPC_SEED"); env && *env) {
      std::int64_t v = 0;
      if (!detail::parse_int(detail::trim(env), v) || v < 0) {
        fail(ErrorKind::InvalidArgument, "ENTROPYSPC_SEED must be a non-negative integer");
      }
      c.seed = static_cast<std::uint64_t>(v);
    }
  }
  if (f.seed) c.seed = *f.seed;
  if (f.method) c.methods = parse_methods(*f.method);
  if (f.alpha) c.alpha = *f.alpha;
  if (f.preset) c.preset = parse_preset(*f.preset);
  if (f.support) c.support = parse_support(*f.support);
  if (f.replicates) c.replicates = *f.replicates;
  if (f.grid) c.grid = parse_grid(*f.grid);
  if (f.covariance) c.covariance = parse_covariance(*f.covariance);
  if (f.noise_variance) c.noise_variance = *f.noise_variance;
  if (f.phase1_draws) c.phase1_draws = *f.phase1_draws;
  if (f.phase1_k) c.phase1_k = *f.phase1_k;
  if (f.quad_order) c.quad_order = *f.quad_order;
  if (f.models) {
    c.models.clear();
    for (auto m : detail::split_commas(*f.models)) c.models.push_back(parse_model(m));
  }
  c.validate();
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

std::string title_for(std::string_view phase, Method m) {
  return std::string(phase) + " T² chart (" + (m == Method::ME ? "maximum entropy" : "least squares") + ")";
}

int cmd_phase1(const Flags& f) {
  RunConfig cfg = effective_config(f);
  const bool fixture = !f.coeffs_csv.empty();
  if (fixture && cfg.methods.size() != 1) {
    fail(ErrorKind::InvalidArgument, "--coeffs-csv needs a single --method (me or lr)");
  }
  if (fixture == !f.positional.empty()) {
    fail(ErrorKind::InvalidArgument, "phase1 takes either a profile CSV or --coeffs-csv");
  }
  const auto out_dir = prepare_out(f.out);
  const auto provenance = to_json(cfg);

  io::BaselineFile file;
  file.config = provenance;
  std::optional<ProfileDataset> data;
  if (!fixture) {
    data = load_dataset(f.positional.front(), Phase::PhaseI);
    file.design = data->design();
  }

  std::vector<io::ChartRow> rows;
  bool warning = false;
  for (Method m : cfg.methods) {
    io::BaselineChart chart;
    chart.coeffs = fixture ? io::load_coefficients(f.coeffs_csv, m) : fit_all(*data, m, cfg.fit_settings());
    chart.baseline = build_baseline(chart.coeffs, cfg.covariance);
    chart.t2 = t2_values(chart.baseline, chart.coeffs);
    chart.limits = make_limits(chart.baseline, chart.t2, cfg.alpha);
    const auto points = evaluate_chart(chart.baseline, chart.limits, chart.coeffs);
    for (std::size_t i = 0; i < points.size(); ++i) {
      rows.push_back({m, chart.coeffs[i], points[i]});
      if (points[i].signal_quantile) {
        warning = true;
        std::cerr << "calibration: method=" << to_string(m) << " sample=" << points[i].sample_id
                  << " t2=" << io::number(points[i].t2) << " exceeds ucl_quantile=" << io::number(chart.limits.ucl_quantile)
                  << '\n';
      }
    }
    write_file(out_dir / ("chart_phase1_" + std::string(to_string(m)) + ".svg"),
               svg::control_chart(points, chart.limits, title_for("Phase I", m)));
    std::cout << to_string(m) << ": k=" << chart.baseline.k << " ucl_f=" << io::number(chart.limits.ucl_f)
              << " ucl_quantile=" << io::number(chart.limits.ucl_quantile) << '\n';
    file.charts.push_back(std::move(chart));
  }
  write_file(out_dir / "baseline.json", io::to_json(file).dump(2) + "\n");
  std::ostringstream csv;
  io::write_chart(csv, rows, provenance.dump());
  write_file(out_dir / "phase1_points.csv", csv.str());
  if (warning && !f.force) {
    std::cerr << "phase I points exceed their own quantile limit; rerun with --force to accept\n";
    return kSignal;
  }
  return kClean;
}

int cmd_phase2(const Flags& f) {
  if (f.positional.empty()) fail(ErrorKind::InvalidArgument, "phase2 needs the baseline file");
  const auto baseline = io::load_baseline(f.positional[0]);
  const bool fixture = !f.coeffs_csv.empty();
  if (fixture == (f.positional.size() > 1)) {
    fail(ErrorKind::InvalidArgument, "phase2 takes either a profile CSV or --coeffs-csv");
  }
  if (f.positional.size() > 2) fail(ErrorKind::InvalidArgument, "too many arguments");

  // Fitting settings default to those the baseline was built with.
  RunConfig cfg;
  apply_json(cfg, baseline.config);
  {
    Flags rest = f;
    if (!f.method) rest.method.reset();
    RunConfig over = effective_config(rest);
    if (f.config.empty() && !f.preset) over.preset = cfg.preset;
    if (f.config.empty() && !f.support) over.support = cfg.support;
    if (f.config.empty() && !f.covariance) over.covariance = cfg.covariance;
    if (f.config.empty() && !f.alpha) over.alpha = cfg.alpha;
    if (f.config.empty() && !f.quad_order) over.quad_order = cfg.quad_order;
    if (f.config.empty()) {
      over.tol = cfg.tol;
      over.max_iter = cfg.max_iter;
    }
    cfg = over;
  }

  std::vector<Method> methods;
  if (f.method) {
    methods = parse_methods(*f.method);
  } else {
    for (const auto& c : baseline.charts) methods.push_back(c.baseline.method);
  }
  if (fixture && methods.size() != 1) fail(ErrorKind::InvalidArgument, "--coeffs-csv needs a single --method (me or lr)");
  for (Method m : methods) {
    if (!baseline.chart(m)) {
      fail(ErrorKind::BaselineMismatch, "baseline has no " + std::string(to_string(m)) + " chart");
    }
  }

  std::optional<ProfileDataset> data;
  if (!fixture) {
    if (!baseline.design) {
      fail(ErrorKind::BaselineMismatch, "baseline was built from coefficients; chart phase II with --coeffs-csv");
    }
    data = load_dataset(f.positional[1], Phase::PhaseII);
    if (!(data->design() == *baseline.design)) {
      fail(ErrorKind::BaselineMismatch, f.positional[1] + ": design differs from the phase-I design");
    }
  }

  const auto out_dir = prepare_out(f.out);
  auto provenance = to_json(cfg);
  provenance["method"] = method_label(methods);
  std::vector<io::ChartRow> rows;
  bool signal = false;
  for (Method m : methods) {
    const auto& chart = *baseline.chart(m);
    const auto coeffs = fixture ? io::load_coefficients(f.coeffs_csv, m) : fit_all(*data, m, cfg.fit_settings());
    const auto points = evaluate_chart(chart.baseline, chart.limits, coeffs);
    for (std::size_t i = 0; i < points.size(); ++i) {
      rows.push_back({m, coeffs[i], points[i]});
      if (points[i].any_signal()) {
        signal = true;
        std::cerr << "signal: method=" << to_string(m) << " sample=" << points[i].sample_id
                  << " t2=" << io::number(points[i].t2) << " ucl_f=" << (points[i].signal_fisher ? "exceeded" : "ok")
                  << " ucl_quantile=" << (points[i].signal_quantile ? "exceeded" : "ok") << '\n';
      }
    }
    write_file(out_dir / ("chart_phase2_" + std::string(to_string(m)) + ".svg"),
               svg::control_chart(points, chart.limits, title_for("Phase II", m)));
  }
  std::ostringstream csv;
  io::write_chart(csv, rows, provenance.dump());
  write_file(out_dir / "phase2_points.csv", csv.str());
  return signal ? kSignal : kClean;
}

int cmd_simulate(const Flags& f) {
  if (!f.positional.empty()) fail(ErrorKind::InvalidArgument, "simulate takes no positional arguments");
  if (!f.coeffs_csv.empty()) fail(ErrorKind::InvalidArgument, "--coeffs-csv does not apply to simulate");
  const RunConfig cfg = effective_config(f);
  const auto out_dir = prepare_out(f.out);
  const auto provenance = to_json(cfg);
  const auto sim = cfg.simulation();
  const ArlReport report = arl_table(sim);

  std::ostringstream csv;
  io::write_arl_csv(csv, report, provenance.dump());
  write_file(out_dir / "arl_report.csv", csv.str());
  write_file(out_dir / "arl_report.json", io::arl_metadata(report, provenance).dump(2) + "\n");
  for (ShiftModel m : sim.models) {
    write_file(out_dir / ("beta_" + std::string(to_string(m)) + ".svg"), svg::beta_curves(report.rows, m));
  }
  std::ostringstream data;
  write_dataset(data, simulate_phase1(sim.model, sim.phase1_k, sim.seed, 0));
  write_file(out_dir / "phase1_data.csv", data.str());

  for (const auto& r : report.rows) {
    if (r.s == 0.0 && r.model == sim.models.front()) {
      std::cout << "ARL0 " << to_string(r.method) << ' ' << to_string(r.scheme) << " = " << io::number(r.arl) << '\n';
    }
  }
  return kClean;
}

/// CLI11 reads "-inf,..." as a flag; glue such values onto their option.
std::vector<std::string> normalise_args(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if ((a == "--support" || a == "--grid") && i + 1 < argc && argv[i + 1][0] == '-') {
      a += "=";
      a += argv[++i];
    }
    args.push_back(std::move(a));
  }
  std::reverse(args.begin(), args.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Profile monitoring with maximum-entropy and least-squares coefficient charts", "entropyspc"};
  app.require_subcommand(1);
  Flags flags;
  auto* p1 = app.add_subcommand("phase1", "calibrate baselines and limits from phase-I data");
  auto* p2 = app.add_subcommand("phase2", "chart phase-II data against a baseline file");
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo ARL study under shift models I, II, III");
  for (auto* sub : {p1, p2, sim}) {
    add_common(sub, flags);
    sub->add_option("inputs", flags.positional, "input files");
  }

  try {
    auto args = normalise_args(argc, argv);
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kError;
  }

  try {
    if (p1->parsed()) return cmd_phase1(flags);
    if (p2->parsed()) return cmd_phase2(flags);
    return cmd_simulate(flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
}
