#include <gtest/gtest.h>

#include <random>

#include <Eigen/Dense>

#include "helpers.hpp"

using namespace entropyspc;
using testing_support::coefficients;

namespace {

std::vector<CoefficientVector> random_coeffs(std::mt19937_64& rng, std::size_t k) {
  std::normal_distribution<double> nd;
  std::vector<CoefficientVector> out;
  for (std::size_t j = 0; j < k; ++j) {
    const double z0 = nd(rng), z1 = nd(rng);
    out.push_back({2 + 0.3 * z0, 3 - 0.5 * z0 + 0.8 * z1, Method::LR, static_cast<std::int64_t>(j + 1)});
  }
  return out;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

}  // namespace

TEST(Monitoring, PooledT2SumsToPTimesKMinusOne) {
  std::mt19937_64 rng(17);
  for (std::size_t k : {3u, 4u, 10u, 57u, 300u}) {
    const auto c = random_coeffs(rng, k);
    const auto b = build_baseline(c);
    double sum = 0;
    for (double t : t2_values(b, c)) sum += t;
    EXPECT_NEAR(sum, 2.0 * (k - 1), 1e-9 * k);
  }
}

TEST(Monitoring, T2IsAffineInvariant) {
  std::mt19937_64 rng(3);
  const auto c = random_coeffs(rng, 25);
  const auto t = t2_values(build_baseline(c), c);
  const double a00 = 1.7, a01 = -0.4, a10 = 2.2, a11 = 0.9, s0 = 5, s1 = -8;
  auto c2 = c;
  for (auto& v : c2) {
    const double i = v.intercept, s = v.slope;
    v.intercept = a00 * i + a01 * s + s0;
    v.slope = a10 * i + a11 * s + s1;
  }
  for (auto est : {CovarianceEstimator::Pooled, CovarianceEstimator::SuccessiveDifferences}) {
    const auto u = t2_values(build_baseline(c, est), c);
    const auto u2 = t2_values(build_baseline(c2, est), c2);
    for (std::size_t j = 0; j < c.size(); ++j) EXPECT_NEAR(u[j], u2[j], 1e-9 * (1 + u[j]));
  }
  (void)t;
}

TEST(Monitoring, MatchesDirectMatrixComputation) {
  std::mt19937_64 rng(8);
  const auto c = random_coeffs(rng, 12);
  Eigen::MatrixXd v(12, 2);
  for (int j = 0; j < 12; ++j) v.row(j) << c[j].intercept, c[j].slope;
  const Eigen::RowVector2d mean = v.colwise().mean();
  const Eigen::MatrixXd centred = v.rowwise() - mean;
  const Eigen::Matrix2d pooled = centred.transpose() * centred / 11.0;
  Eigen::Matrix2d succ = Eigen::Matrix2d::Zero();
  for (int j = 0; j + 1 < 12; ++j) {
    const Eigen::RowVector2d d = v.row(j + 1) - v.row(j);
    succ += d.transpose() * d;
  }
  succ /= 2.0 * 11;
  for (auto [est, s] : {std::pair{CovarianceEstimator::Pooled, pooled},
                        std::pair{CovarianceEstimator::SuccessiveDifferences, succ}}) {
    const auto b = build_baseline(c, est);
    const Eigen::Matrix2d inv = s.inverse();
    for (int j = 0; j < 12; ++j) {
      const Eigen::RowVector2d d = v.row(j) - mean;
      EXPECT_NEAR(t2_statistic(b, c[j]), (d * inv * d.transpose())(0, 0), 1e-10);
    }
  }
}

TEST(Monitoring, ReferenceT2Values) {
  struct Case {
    const char* coeffs;
    const char* t2;
    Method m;
  };
  for (const Case& cs : {Case{"worked_me_coeffs.csv", "worked_me_t2.csv", Method::ME},
                         Case{"worked_lr_coeffs.csv", "worked_lr_t2.csv", Method::LR}}) {
    const auto c = coefficients(cs.coeffs, cs.m);
    const auto ref = testing_support::column(testing_support::numeric_rows(cs.t2), 1);
    const auto t = t2_values(build_baseline(c, CovarianceEstimator::SuccessiveDifferences), c);
    for (std::size_t j = 0; j < t.size(); ++j) EXPECT_NEAR(t[j], ref[j], 5e-4 * ref[j]) << cs.coeffs << " " << j;
  }
}

TEST(Monitoring, PooledWorkedValues) {
  const auto c = coefficients("worked_lr_coeffs.csv", Method::LR);
  const auto t = t2_values(build_baseline(c), c);
  const std::vector<double> expect{0.09940781, 2.11035409, 2.15448151, 1.63575659};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(t[j], expect[j], 1e-7);
}

TEST(Monitoring, QuantileUsesLinearInterpolation) {
  const std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_DOUBLE_EQ(quantile_ucl(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile_ucl(v, 0.05), 4.8);
  EXPECT_DOUBLE_EQ(quantile_ucl(v, 0.125), 4.5);
  EXPECT_DOUBLE_EQ(quantile_ucl(std::vector<double>{7}, 0.05), 7.0);
  EXPECT_EQ(kind_of([] { quantile_ucl(std::vector<double>{}, 0.05); }), ErrorKind::EmptyInput);
}

TEST(Monitoring, FisherRegimes) {
  const double f = fdist::f_upper_quantile(0.05, 2, 98);
  EXPECT_NEAR(fisher_ucl(2, 100, 0.05), 2.0 * 101 * 99 / (100.0 * 100 - 200) * f, 1e-12);
  EXPECT_NEAR(fisher_ucl(2, 100, 0.05, FisherRegime::LargeSample), 2.0 * 99 / 98 * f, 1e-12);
  const double f2 = fdist::f_upper_quantile(0.05, 2, 99);
  EXPECT_NEAR(fisher_ucl(2, 101, 0.05), 2.0 * 100 / 99 * f2, 1e-12);
  EXPECT_EQ(kind_of([] { fisher_ucl(2, 2, 0.05); }), ErrorKind::InvalidDof);
  // The small-sample factor approaches the large-sample one as k grows.
  EXPECT_NEAR(fisher_ucl(2, 100000, 0.05, FisherRegime::SmallSample),
              fisher_ucl(2, 100000, 0.05, FisherRegime::LargeSample), 1e-3);
}

TEST(Monitoring, SignalsAreStrict) {
  std::mt19937_64 rng(12);
  const auto c = random_coeffs(rng, 20);
  const auto b = build_baseline(c);
  auto limits = make_limits(b, t2_values(b, c), 0.05);
  const double t = t2_statistic(b, c[3]);
  limits.ucl_f = t;
  limits.ucl_quantile = std::nextafter(t, 0.0);
  const auto pts = evaluate_chart(b, limits, std::span(c).subspan(3, 1));
  EXPECT_FALSE(pts[0].signal_fisher);
  EXPECT_TRUE(pts[0].signal_quantile);
  EXPECT_TRUE(pts[0].any_signal());
  EXPECT_EQ(pts[0].sample_id, 4);
}

TEST(Monitoring, DegenerateBaselines) {
  std::mt19937_64 rng(1);
  const auto c = random_coeffs(rng, 2);
  EXPECT_EQ(kind_of([&] { build_baseline(c); }), ErrorKind::TooFewSamples);
  std::vector<CoefficientVector> line;
  for (int j = 0; j < 6; ++j) line.push_back({1.0 * j, 2.0 * j + 1, Method::LR, j + 1});
  EXPECT_EQ(kind_of([&] { build_baseline(line); }), ErrorKind::SingularCovariance);
  std::vector<CoefficientVector> same(5, CoefficientVector{1, 1, Method::LR, 1});
  EXPECT_EQ(kind_of([&] { build_baseline(same); }), ErrorKind::SingularCovariance);
}

TEST(Monitoring, SemiconductorPhaseTwoSignal) {
  const auto p1 = coefficients("semi_phase1_lr_coeffs.csv", Method::LR);
  const auto p2 = coefficients("semi_phase2_lr_coeffs.csv", Method::LR);
  for (auto est : {CovarianceEstimator::Pooled, CovarianceEstimator::SuccessiveDifferences}) {
    const auto b = build_baseline(p1, est);
    const auto limits = make_limits(b, t2_values(b, p1), 0.05);
    EXPECT_NEAR(limits.ucl_f, 8.150643611334003, 1e-9);
    const auto pts = evaluate_chart(b, limits, p2);
    for (const auto& p : pts) {
      EXPECT_FALSE(p.signal_fisher) << p.sample_id;
      EXPECT_EQ(p.signal_quantile, p.sample_id == 14) << p.sample_id << " " << p.t2 << " " << limits.ucl_quantile;
    }
  }
  const auto bs = build_baseline(p1, CovarianceEstimator::SuccessiveDifferences);
  EXPECT_NEAR(quantile_ucl(t2_values(bs, p1), 0.05), 4.8573192, 1e-6);
  EXPECT_NEAR(t2_statistic(bs, p2[13]), 5.77359572, 1e-6);
}
