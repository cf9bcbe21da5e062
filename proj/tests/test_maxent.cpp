#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "helpers.hpp"

using namespace entropyspc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kTwoPi = 2 * std::numbers::pi;

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

double log_density(const MaxEntDensity& d, double x, double y) {
  const auto basis = d.constraints.basis();
  double s = -1.0 - d.lambdas[0];
  for (std::size_t i = 0; i < basis.size(); ++i) s -= d.lambdas[i + 1] * std::pow(x, basis[i].px) * std::pow(y, basis[i].py);
  return s;
}

struct Gaussian {
  double mx, my, vx, vy, c;
  ConstraintSet targets() const {
    return ConstraintSet::full_second_order(mx, my, vx + mx * mx, vy + my * my, c + mx * my);
  }
  std::vector<double> lambdas() const {
    const double det = vx * vy - c * c;
    const double p00 = vy / det, p11 = vx / det, p01 = -c / det;
    const double quad = p00 * mx * mx + 2 * p01 * mx * my + p11 * my * my;
    return {std::log(kTwoPi) + 0.5 * std::log(det) - 1 + 0.5 * quad, -(p00 * mx + p01 * my), -(p01 * mx + p11 * my),
            p00 / 2,     p11 / 2, p01};
  }
  double entropy() const { return 1 + std::log(kTwoPi) + 0.5 * std::log(vx * vy - c * c); }
};

const SupportRegion kWorkedBox = SupportRegion::box(0, kInf, 0, 7.435);

}  // namespace

TEST(MaxEnt, NormalizationOnlyOnUnitSquareIsUniform) {
  const auto d = solve_maxent(ConstraintSet::normalization_only(), SupportRegion::box(0, 1, 0, 1));
  ASSERT_EQ(d.lambdas.size(), 1u);
  EXPECT_NEAR(d.lambdas[0], -1.0, 1e-12);
  EXPECT_NEAR(shannon_entropy(d), 0.0, 1e-12);
  const auto m = density_moments(d);
  EXPECT_NEAR(m.e_x, 0.5, 1e-12);
  EXPECT_NEAR(m.var_y, 1.0 / 12, 1e-12);
  EXPECT_NEAR(m.cov_xy, 0.0, 1e-12);
}

TEST(MaxEnt, UniformOnSquareOfSideTwo) {
  const auto d = solve_maxent(ConstraintSet::normalization_only(), SupportRegion::box(0, 2, 0, 2));
  EXPECT_NEAR(d.lambdas[0], std::log(4.0) - 1, 1e-12);
  EXPECT_NEAR(shannon_entropy(d), std::log(4.0), 1e-12);
}

TEST(MaxEnt, StandardNormalFromSecondMoments) {
  const auto d = solve_maxent(ConstraintSet::full_second_order(0, 0, 1, 1, 0), SupportRegion::plane());
  const std::vector<double> expect{std::log(kTwoPi) - 1, 0, 0, 0.5, 0.5, 0};
  ASSERT_EQ(d.lambdas.size(), 6u);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(d.lambdas[i], expect[i], 1e-9) << i;
  EXPECT_NEAR(shannon_entropy(d), 1 + std::log(kTwoPi), 1e-9);
  EXPECT_LE(d.residual_norm, 1e-8);
}

TEST(MaxEnt, MatchesClosedFormGaussianOnThePlane) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mean(-5, 5), sd(0.05, 4), rho(-0.95, 0.95);
  for (int t = 0; t < 40; ++t) {
    const double sx = sd(rng), sy = sd(rng), r = rho(rng);
    const Gaussian g{mean(rng), mean(rng), sx * sx, sy * sy, r * sx * sy};
    const auto d = solve_maxent(g.targets(), SupportRegion::plane());
    const auto lam = g.lambdas();
    for (int i = 0; i < 6; ++i) {
      EXPECT_NEAR(d.lambdas[i], lam[i], 1e-5 * (1 + std::abs(lam[i]))) << "trial " << t << " i=" << i;
    }
    EXPECT_NEAR(shannon_entropy(d), g.entropy(), 1e-7);
    const auto m = density_moments(d);
    EXPECT_NEAR(m.cov_xy, g.c, 1e-7 * (1 + std::abs(g.c)));
  }
}

TEST(MaxEnt, EntropyEqualsDualValueAtOptimum) {
  const auto d = solve_maxent(Gaussian{1, -2, 0.3, 2.0, 0.4}.targets(), SupportRegion::plane());
  double h = 1 + d.lambdas[0];
  const auto targets = d.constraints.targets();
  for (std::size_t i = 0; i < targets.size(); ++i) h += d.lambdas[i + 1] * targets[i];
  EXPECT_NEAR(shannon_entropy(d), h, 1e-8);
}

TEST(MaxEnt, WorkedMultipliersOnQuadrantGiveReferenceMoments) {
  const auto rows = testing_support::numeric_rows("worked_cross_lambdas.csv");
  const std::vector<double> lam(rows[0].begin() + 1, rows[0].end());
  const auto d = density_from_multipliers(ConstraintPreset::FirstOrderCross, lam, SupportRegion::quadrant());
  EXPECT_NEAR(normalization(d), 1.000449708792, 1e-10);
  const auto m = density_moments(d);
  EXPECT_NEAR(m.e_x, 0.1249827914066, 1e-10);
  EXPECT_NEAR(m.e_y, 0.9580904079599, 1e-10);
  EXPECT_NEAR(m.var_x, 0.0157037792746, 1e-11);
  EXPECT_NEAR(m.cov_xy, -0.006163537609773, 1e-11);
}

TEST(MaxEnt, WorkedMultipliersOnTruncatedSupport) {
  const auto rows = testing_support::numeric_rows("worked_cross_lambdas.csv");
  const std::vector<double> lam(rows[0].begin() + 1, rows[0].end());
  const auto d = density_from_multipliers(ConstraintPreset::FirstOrderCross, lam, kWorkedBox);
  EXPECT_NEAR(normalization(d), 0.9999999962975691, 1e-10);
  const auto m = density_moments(d);
  EXPECT_NEAR(m.e_x, 0.1250000020105552, 1e-10);
  EXPECT_NEAR(m.e_y, 0.9547398364242358, 1e-10);
  EXPECT_NEAR(m.var_x, 0.0157067917044907, 1e-11);
}

TEST(MaxEnt, WorkedSampleIsInfeasibleOnTheQuadrant) {
  // E[xy] above E[x] E[y] needs positive dependence, which exp(-lambda_3 xy)
  // with lambda_3 >= 0 cannot produce on an unbounded quadrant.
  const auto ds = load_dataset(testing_support::fixture("worked_phase1_profiles.csv"), Phase::PhaseI);
  const auto c = ConstraintSet::from_moments(ConstraintPreset::FirstOrderCross, sample_moments(ds, 1));
  EXPECT_EQ(kind_of([&] { solve_maxent(c, SupportRegion::quadrant()); }), ErrorKind::Infeasible);
  const auto d = solve_maxent(c, kWorkedBox);
  EXPECT_LE(d.residual_norm, 1e-8);
  const auto e = basis_expectations(d);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], c.targets()[i], 1e-8);
}

TEST(MaxEnt, RecoversMultipliersFromTheirOwnMoments) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> rate(0.3, 6), cross(0.0, 4);
  for (int t = 0; t < 50; ++t) {
    const std::vector<double> lam{0.0, rate(rng), rate(rng), cross(rng)};
    const auto truth = density_from_multipliers(ConstraintPreset::FirstOrderCross, lam, SupportRegion::quadrant());
    const auto d = solve_maxent(truth.constraints, SupportRegion::quadrant());
    EXPECT_LE(d.residual_norm, 1e-8) << "trial " << t;
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(d.lambdas[i], lam[i], 1e-5 * (1 + std::abs(lam[i]))) << t << " " << i;
  }
}

TEST(MaxEnt, ConvergesFromAlternativeStarts) {
  const auto c = Gaussian{0.4, 1.5, 0.2, 0.9, -0.25}.targets();
  const auto ref = solve_maxent(c, SupportRegion::plane());
  for (const std::vector<double>& start :
       {std::vector<double>{0, 0, 1, 1, 0}, std::vector<double>{-3, 2, 10, 0.5, 0.1}}) {
    SolverOptions o;
    o.initial = start;
    const auto d = solve_maxent(c, SupportRegion::plane(), o);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(d.lambdas[i], ref.lambdas[i], 1e-6 * (1 + std::abs(ref.lambdas[i])));
  }
}

TEST(MaxEnt, DualDecreasesMonotonically) {
  SolverOptions o;
  o.initial = std::vector<double>{3, -1, 0.1};
  std::vector<double> trace;
  o.on_iteration = [&](int, double v) { trace.push_back(v); };
  const auto box = SupportRegion::box(0, 2, 0, 3);
  const auto d = solve_maxent(ConstraintSet::first_order_cross(0.7, 1.9, 1.2), box, o);
  EXPECT_LE(d.residual_norm, 1e-8);
  ASSERT_GE(trace.size(), 3u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12) << i;
}

TEST(MaxEnt, DualGradientMatchesFiniteDifferences) {
  const auto d = density_from_multipliers(ConstraintPreset::FirstOrderCross, {0, 1.2, 0.8, 0.5}, kWorkedBox);
  const std::vector<double> lam{1.2, 0.8, 0.5};
  const auto e = basis_expectations(d);
  const double h = 1e-5;
  for (int i = 0; i < 3; ++i) {
    auto up = lam, dn = lam;
    up[i] += h;
    dn[i] -= h;
    const double fd = (dual_objective(d, up) - dual_objective(d, dn)) / (2 * h);
    const double exact = d.constraints.targets()[i] - e[i];
    EXPECT_NEAR(fd, exact, 1e-6 * (1 + std::abs(e[i])));
    // Targets are the density's own moments, so the gradient vanishes.
    EXPECT_NEAR(exact, 0.0, 1e-10);
    // d log Z / d lambda_i = -E[h_i]
    const double logz_fd = fd - d.constraints.targets()[i];
    EXPECT_NEAR(logz_fd, -e[i], 1e-6 * (1 + std::abs(e[i])));
  }
}

TEST(MaxEnt, PerturbationsThatKeepConstraintsLowerEntropy) {
  // Standard normal: He4(x) is orthogonal to every constrained statistic.
  const auto g = solve_maxent(ConstraintSet::full_second_order(0, 0, 1, 1, 0), SupportRegion::plane());
  const double hf = shannon_entropy(g);
  for (double eps : {0.01, 0.05, 0.15}) {
    const double hg = expectation(g, [&](double x, double y) {
      const double w = 1 + eps * (x * x * x * x - 6 * x * x + 3);
      return w > 0 ? -w * (log_density(g, x, y) + std::log(w)) : 0.0;
    });
    EXPECT_LT(hg, hf) << eps;
  }

  // Bounded first-order-cross fit: project x^2 off {1, x, y, xy} under f.
  const auto box = SupportRegion::box(0, 1, 0, 2);
  const auto d = solve_maxent(ConstraintSet::first_order_cross(0.45, 1.1, 0.52), box);
  const double hd = shannon_entropy(d);
  auto h = [](int i, double x, double y) {
    switch (i) {
      case 0: return 1.0;
      case 1: return x;
      case 2: return y;
      default: return x * y;
    }
  };
  Eigen::Matrix4d gram;
  Eigen::Vector4d rhs;
  for (int i = 0; i < 4; ++i) {
    rhs(i) = expectation(d, [&](double x, double y) { return x * x * h(i, x, y); });
    for (int j = 0; j < 4; ++j) gram(i, j) = expectation(d, [&](double x, double y) { return h(i, x, y) * h(j, x, y); });
  }
  const Eigen::Vector4d beta = gram.ldlt().solve(rhs);
  auto p = [&](double x, double y) {
    double s = x * x;
    for (int i = 0; i < 4; ++i) s -= beta(i) * h(i, x, y);
    return s;
  };
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(expectation(d, [&](double x, double y) { return p(x, y) * h(i, x, y); }), 0, 1e-12);
  double pmax = 0;
  for (double x = 0; x <= 1; x += 0.01)
    for (double y = 0; y <= 2; y += 0.02) pmax = std::max(pmax, std::abs(p(x, y)));
  for (double frac : {0.05, 0.3, 0.9}) {
    const double eps = frac / pmax;
    const double hg = expectation(d, [&](double x, double y) {
      const double w = 1 + eps * p(x, y);
      return -w * (log_density(d, x, y) + std::log(w));
    });
    EXPECT_LT(hg, hd) << frac;
  }
}

TEST(MaxEnt, NormalisationStableUnderRefinement) {
  const auto d = solve_maxent(ConstraintSet::first_order_cross(0.3, 0.8, 0.2), SupportRegion::quadrant());
  EXPECT_NEAR(normalization(d), 1.0, 1e-10);
  MaxEntDensity finer = d;
  finer.quadrature.order *= 2;
  finer.quadrature.panels *= 2;
  EXPECT_NEAR(normalization(finer), 1.0, 1e-10);
}

TEST(MaxEnt, ReportsInvalidProblems) {
  EXPECT_EQ(kind_of([] { solve_maxent(ConstraintSet::first_order_cross(1, 1, 1), SupportRegion::plane()); }),
            ErrorKind::DivergentIntegral);
  EXPECT_EQ(kind_of([] { solve_maxent(ConstraintSet::normalization_only(), SupportRegion::quadrant()); }),
            ErrorKind::DivergentIntegral);
  EXPECT_EQ(kind_of([] { ConstraintSet::full_second_order(1, 1, 1, 2, 1); }), ErrorKind::InvalidConstraints);
  EXPECT_EQ(kind_of([] { ConstraintSet::full_second_order(0, 0, 1, 1, 1); }), ErrorKind::InvalidConstraints);
  EXPECT_EQ(kind_of([] { ConstraintSet::first_order_cross(NAN, 1, 1); }), ErrorKind::InvalidConstraints);
  EXPECT_EQ(kind_of([] { solve_maxent(ConstraintSet::first_order_cross(-1, 1, 1), SupportRegion::quadrant()); }),
            ErrorKind::Infeasible);
  EXPECT_EQ(kind_of([] { solve_maxent(ConstraintSet::first_order_cross(1, 1, 1), SupportRegion::box(0, 1, 2, 1)); }),
            ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] {
              density_from_multipliers(ConstraintPreset::FirstOrderCross, {0, 1, 1, -1}, SupportRegion::quadrant());
            }),
            ErrorKind::DivergentIntegral);
}

TEST(MaxEnt, IterationCapIsReported) {
  SolverOptions o;
  o.max_iter = 1;
  o.initial = std::vector<double>{3, -1, 0.1};
  EXPECT_EQ(kind_of([&] { solve_maxent(ConstraintSet::first_order_cross(0.7, 1.9, 1.2), SupportRegion::box(0, 2, 0, 3), o); }),
            ErrorKind::NoConvergence);
}
