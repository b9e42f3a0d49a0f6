#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "w2s/fixed_point.hpp"

using namespace w2s;

namespace {

// Positive root of 4x^3 + 2x^2 - 3x - 2 by plain bisection: the d = 1,
// xi^2 = 1, n = p = 2, lambda = 1 system after substituting T1 = 1/(1 + mu).
double cubic_root() {
  auto f = [](long double x) { return 4 * x * x * x + 2 * x * x - 3 * x - 2; };
  long double lo = 0, hi = 2;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

// Grid scan plus bisection on the first self-consistency equation, in long
// double, written without any library trace helpers.
double grid_oracle_mu2(const std::vector<double>& xi2, double n, double p, double lambda) {
  auto h = [&](long double mu) {
    long double t = 0;
    for (double x : xi2) t += x / (x + mu);
    const long double r = n / p;
    const long double s = std::sqrt((1 - r) * (1 - r) + 4 * lambda / (p * mu));
    return (1 + r - s) - 2 * t / p;
  };
  // h increases in mu; scan a log grid for the sign change.
  long double prev = 1e-12L, lo = 0, hi = 0;
  for (long double mu = 1e-12L; mu < 1e6L; mu *= 1.5L) {
    if (h(mu) >= 0) {
      lo = prev;
      hi = mu;
      break;
    }
    prev = mu;
  }
  EXPECT_GT(hi, 0.0L);
  for (int i = 0; i < 200; ++i) {
    const long double mid = std::sqrt(lo * hi);
    (h(mid) < 0 ? lo : hi) = mid;
  }
  return static_cast<double>(std::sqrt(lo * hi));
}

}  // namespace

TEST(FixedPoint, SingleEigenvalueCubic) {
  const Spectrum s({1.0});
  const RidgeConfig c{2, 2, 1.0};
  const double root = cubic_root();
  // f(0.915) < 0 < f(0.916) by hand.
  EXPECT_GT(root, 0.915);
  EXPECT_LT(root, 0.916);
  for (const auto& fp : {solve_fixed_point(s, c), solve_fixed_point_scalar(s, c)}) {
    EXPECT_NEAR(fp.mu2, root, 1e-10 * root);
    EXPECT_NEAR(fp.mu1, root * (1.0 - 1.0 / (2.0 * (1.0 + root))), 1e-10);
    EXPECT_NEAR(fp.mu1, 0.676, 1e-3);
    EXPECT_NEAR(fp.t1, 1.0 / (1.0 + root), 1e-12);
    const auto r = fixed_point_residuals(s, c, fp.mu1, fp.mu2);
    EXPECT_LE(std::fabs(r.r1), 1e-12);
    EXPECT_LE(std::fabs(r.r2), 1e-12);
  }
}

TEST(FixedPoint, DominantLambda) {
  const auto s = make_power_law_spectrum(2.0, 100);
  const RidgeConfig c{10, 10, 1e6};
  const auto fp = solve_fixed_point(s, c);
  EXPECT_NEAR(fp.mu2 / 1e5, 1.0, 0.01);
  EXPECT_NEAR(fp.mu1 / fp.mu2, 1.0, 1e-3);
}

TEST(FixedPoint, GridScanOracle) {
  const std::size_t d = 2000;
  const auto s = make_power_law_spectrum(2.0, d);
  std::vector<double> xi2(d);
  for (std::size_t k = 0; k < d; ++k) xi2[k] = std::pow(static_cast<double>(k + 1), -2.0);
  const double oracle = grid_oracle_mu2(xi2, 100, 200, 1e-2);
  const RidgeConfig c{100, 200, 1e-2};
  EXPECT_NEAR(solve_fixed_point(s, c).mu2, oracle, 1e-8 * oracle);
  EXPECT_NEAR(solve_fixed_point_scalar(s, c).mu2, oracle, 1e-8 * oracle);
}

TEST(FixedPoint, RoutesAgreeOnRandomConfigs) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const double a = 1.2 + 1.8 * U(g);
    const auto n = static_cast<std::uint64_t>(std::round(std::pow(10.0, 1.0 + 2.5 * U(g))));
    const auto p = static_cast<std::uint64_t>(std::round(std::pow(10.0, 1.0 + 2.5 * U(g))));
    const double lambda = std::pow(10.0, -5.0 + 6.0 * U(g));
    const auto s = make_power_law_spectrum(a, default_truncation(a, n, p, 0.5));
    const RidgeConfig c{n, p, lambda};
    const auto f1 = solve_fixed_point(s, c);
    const auto f2 = solve_fixed_point_scalar(s, c);
    EXPECT_NEAR(f1.mu2, f2.mu2, 1e-11 * f2.mu2);
    EXPECT_NEAR(f1.mu1, f2.mu1, 1e-11 * f2.mu1);
    EXPECT_LT(f2.t1, static_cast<double>(std::min(n, p)));
  }
}

TEST(FixedPoint, SmallLambdaSlope) {
  // d < min(n, p): mu2 ~ lambda / ((1 - d/p)(n - d)) as lambda -> 0.
  const auto s = make_power_law_spectrum(2.0, 5);
  const double n = 50, p = 40, d = 5;
  const double slope = 1.0 / ((1.0 - d / p) * (n - d));
  double prev_err = 1.0;
  for (double lambda : {1e-6, 1e-7}) {
    const auto fp = solve_fixed_point_scalar(s, {50, 40, lambda});
    const double err = std::fabs(fp.mu2 / lambda / slope - 1.0);
    EXPECT_LT(err, 1e-3);
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
}

TEST(FixedPoint, ScaleEquivariance) {
  const auto s = make_power_law_spectrum(1.8, 3000);
  const auto s7 = s.scaled(7.0);
  const RidgeConfig c{300, 500, 1e-3}, c7{300, 500, 7e-3};
  for (bool scalar : {false, true}) {
    const auto a = scalar ? solve_fixed_point_scalar(s, c) : solve_fixed_point(s, c);
    const auto b = scalar ? solve_fixed_point_scalar(s7, c7) : solve_fixed_point(s7, c7);
    EXPECT_NEAR(b.mu2, 7.0 * a.mu2, 1e-10 * b.mu2);
    EXPECT_NEAR(b.mu1, 7.0 * a.mu1, 1e-10 * b.mu1);
  }
}

TEST(FixedPointResiduals, FirstResidualIncreasesWithMu2) {
  // 1 + n/p - s grows and 2 T1 / p shrinks as mu2 grows.
  const Spectrum s({1.0});
  const RidgeConfig c{2, 2, 1.0};
  const auto fp = solve_fixed_point(s, c);
  EXPECT_GT(fixed_point_residuals(s, c, fp.mu1, 1.1 * fp.mu2).r1, 0.0);
  EXPECT_LT(fixed_point_residuals(s, c, fp.mu1, 0.9 * fp.mu2).r1, 0.0);
}

TEST(FixedPointResiduals, EqualMusForceSecondResidual) {
  const auto s = make_power_law_spectrum(2.0, 50);
  const RidgeConfig c{30, 60, 0.1};
  const double mu = 0.05;
  const auto r = fixed_point_residuals(s, c, mu, mu);
  const double ratio = 30.0 / 60.0;
  const double sq = std::sqrt((1 - ratio) * (1 - ratio) + 4 * 0.1 / (60 * mu));
  EXPECT_NEAR(r.r2, (1 - ratio + sq) - 2.0, 1e-14);
  EXPECT_NE(r.r2, 0.0);
}

TEST(FixedPoint, RejectsBadInput) {
  const auto s = make_power_law_spectrum(2.0, 10);
  EXPECT_THROW(solve_fixed_point(s, {0, 5, 1.0}), error);
  EXPECT_THROW(solve_fixed_point(s, {5, 0, 1.0}), error);
  EXPECT_THROW(solve_fixed_point(s, {5, 5, 0.0}), error);
  EXPECT_THROW(solve_fixed_point_scalar(s, {5, 5, -1.0}), error);
  EXPECT_THROW(solve_fixed_point(s, {5, 5, 1.0}, 1e-3), error);
  EXPECT_THROW(fixed_point_residuals(s, {5, 5, 1.0}, 0.0, 1.0), error);
}

TEST(AsymptoticFixedPoint, TeacherExamples) {
  ScalingParams sp{2.0, 1.0, 1.2, 0.5, 1.0, 1.0, 0.0, TauOrder::theta_one};
  const auto a = asymptotic_fixed_point(sp, Role::teacher);
  EXPECT_DOUBLE_EQ(a.z, 0.75);
  EXPECT_DOUBLE_EQ(a.mu2_slope, -1.5);
  EXPECT_DOUBLE_EQ(a.upsilon_slope, -0.25);

  sp.gamma_lt = 50.0;
  sp.gamma_pt = 1.5;
  const auto b = asymptotic_fixed_point(sp, Role::teacher);
  EXPECT_DOUBLE_EQ(b.z, 1.0);
  EXPECT_DOUBLE_EQ(b.mu2_slope, -2.0);
}

TEST(AsymptoticFixedPoint, StudentUsesStudentResolution) {
  const ScalingParams sp{2.0, 1.0, 1.0, 0.0, 0.5, 1.0, 0.1, TauOrder::theta_one};
  const auto a = asymptotic_fixed_point(sp, Role::student);
  EXPECT_DOUBLE_EQ(a.z, 0.3);
  EXPECT_DOUBLE_EQ(a.mu2_slope, -0.6);
  EXPECT_DOUBLE_EQ(a.upsilon_slope, -0.2);
}

TEST(AsymptoticFixedPoint, RejectsUnstable) {
  const ScalingParams sp{2.0, 1.0, 1.0, -1.5, 1.0, 1.0, 0.0, TauOrder::theta_one};
  EXPECT_THROW(asymptotic_fixed_point(sp, Role::teacher), error);
}
