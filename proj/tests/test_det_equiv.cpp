#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "w2s/det_equiv.hpp"
#include "w2s/report_io.hpp"

using namespace w2s;

namespace {

double cubic_root() {
  auto f = [](long double x) { return 4 * x * x * x + 2 * x * x - 3 * x - 2; };
  long double lo = 0, hi = 2;
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

// Step-by-step chain for d = 1, xi^2 = 1, n = p = 2, lambda = 1. Every trace
// is a single term, so the operators are scalars.
struct ScalarChain {
  double mu2, mu1, ups, chi, lam_t, risk_t;
  double lam0, ups_l0, chi_l0, lam, risk_s;

  explicit ScalarChain(double tau) {
    mu2 = cubic_root();
    mu1 = mu2 * (1.0 - 1.0 / (2.0 * (1.0 + mu2)));
    const double q1 = 1.0 / (1.0 + mu2);   // xi^2 (xi^2 + mu)^-1
    const double q2 = q1 * q1;             // xi^2 (xi^2 + mu)^-2 = xi^4 (xi^2 + mu)^-2
    const double den = 2.0 - q2;           // p - Tr(Sigma^2 (Sigma + mu)^-2)
    ups = (q1 - mu1 * q2 / (den / 2.0)) / 2.0;
    chi = q2 / den;
    lam_t = mu2 * mu2 / (1.0 - ups) * (q2 + chi * q2);
    risk_t = lam_t + tau * tau * ups / (1.0 - ups);

    // Student with the same (n, p, lambda): mu_s = mu_t, Upsilon_s = Upsilon_t.
    lam0 = q2 + ups / (1.0 - ups) * mu2 * mu2 * q2 + chi / (1.0 - ups) * mu2 * mu2 * q2;
    ups_l0 = lam0 * ups;  // Upsilon is linear in A and A is a scalar here
    chi_l0 = lam0 * chi;
    lam = 1.0 - 2.0 * q1 * q1 + lam0 * q2 + ups_l0 / (1.0 - ups) * mu2 * mu2 * q2 +
          (ups_l0 / (1.0 - ups) * chi + chi_l0) * mu2 * mu2 * q2;
    risk_s = lam + tau * tau * ups_l0 / (1.0 - ups);
  }
};

// Unregrouped student operator, term by term as written.
std::vector<double> naive_lambda(const Spectrum& s, const StudentEquiv& e) {
  const double mt = e.teacher.fixed_point.mu2, ms = e.lambda0.fixed_point.mu2;
  const double ut = e.teacher.upsilon_t, ct = e.teacher.chi_t;
  std::vector<double> v(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    const long double x = s[k];
    const long double it = 1.0L / (x + mt), is = 1.0L / (x + ms);
    v[k] = static_cast<double>(1.0L - 2.0L * x * x * is * it + e.lambda0.op[k] * x * x * it * it +
                               e.upsilon_t_lambda0 / (1.0L - ut) * mt * mt * it * it +
                               (e.upsilon_t_lambda0 / (1.0L - ut) * ct + e.chi_t_lambda0) * mt * mt * x * it * it);
  }
  return v;
}

}  // namespace

TEST(TeacherEquivalent, ScalarChain) {
  const ScalarChain o(1.0);
  EXPECT_NEAR(o.ups, 0.15428, 1e-5);
  const Spectrum s({1.0});
  const auto t = teacher_equivalent(s, TargetCoefs({1.0}), {2, 2, 1.0}, 1.0);
  EXPECT_NEAR(t.upsilon_t, o.ups, 1e-9);
  EXPECT_NEAR(t.chi_t, o.chi, 1e-9);
  EXPECT_NEAR(t.lambda_t_op[0], o.lam_t, 1e-9);
  EXPECT_NEAR(t.risk, o.risk_t, 1e-9);
}

TEST(TeacherEquivalent, NoiselessAndZeroTarget) {
  const auto s = make_power_law_spectrum(1.5, 1000);
  const auto b = make_power_law_target(1.5, 0.75, 1000);
  const auto t = teacher_equivalent(s, b, {100, 150, 1e-3}, 0.0);
  EXPECT_EQ(t.variance, 0.0);
  EXPECT_EQ(t.risk, t.bias);

  const auto z = teacher_equivalent(s, TargetCoefs(std::vector<double>(1000, 0.0)), {100, 150, 1e-3}, 0.0);
  EXPECT_EQ(z.risk, 0.0);
}

TEST(TeacherEquivalent, VarianceQuadraticInTau) {
  const auto s = make_power_law_spectrum(1.5, 1000);
  const auto b = make_power_law_target(1.5, 0.75, 1000);
  const auto t1 = teacher_equivalent(s, b, {100, 150, 1e-3}, 1.0);
  const auto t3 = teacher_equivalent(s, b, {100, 150, 1e-3}, 3.0);
  EXPECT_NEAR(t3.variance, 9.0 * t1.variance, 1e-12 * t3.variance);
  EXPECT_EQ(t1.bias, t3.bias);
}

TEST(StudentLambda0, ScalarChain) {
  const ScalarChain o(1.0);
  const Spectrum s({1.0});
  const auto l = student_lambda0(s, {2, 2, 1.0});
  EXPECT_NEAR(l.op[0], o.lam0, 1e-9);
}

TEST(StudentLambda0, EntriesWithinBounds) {
  const auto s = make_power_law_spectrum(2.0, 3000);
  for (RidgeConfig c : {RidgeConfig{50, 80, 1e-2}, RidgeConfig{500, 100, 1e-4}, RidgeConfig{100, 1000, 1.0}}) {
    const auto l = student_lambda0(s, c);
    const double upper = 1.0 + (l.upsilon_s + l.chi_s * s[0]) / (1.0 - l.upsilon_s);
    EXPECT_GE(l.op.min_entry(), 0.0);
    EXPECT_LE(l.op.max_entry(), upper);
  }
}

TEST(StudentLambda0, VanishingStudentRegularization) {
  const auto s = make_power_law_spectrum(2.0, 500);
  const auto l = student_lambda0(s, {100000000, 100000000, 1e-12});
  EXPECT_LT(l.upsilon_s, 1e-5);
  // chi_s itself is O(sum k^2 / p); it enters Lambda_0 scaled by mu_s2^2.
  EXPECT_LT(l.chi_s * l.fixed_point.mu2 * l.fixed_point.mu2 / s[499], 1e-5);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(l.op[k], 1.0, 1e-6);
}

TEST(StudentEquivalent, ScalarChain) {
  const ScalarChain o(0.7);
  const Spectrum s({1.0});
  const auto e = student_equivalent(s, TargetCoefs({1.0}), {2, 2, 1.0}, 0.7, {2, 2, 1.0});
  EXPECT_NEAR(e.upsilon_t_lambda0, o.ups_l0, 1e-9);
  EXPECT_NEAR(e.chi_t_lambda0, o.chi_l0, 1e-9);
  EXPECT_NEAR(e.lambda_op[0], o.lam, 1e-9);
  EXPECT_NEAR(e.risk, o.risk_s, 1e-9);
}

TEST(StudentEquivalent, NoiselessTeacherHasNoVarianceTerm) {
  const auto s = make_power_law_spectrum(1.5, 1000);
  const auto b = make_power_law_target(1.5, 0.75, 1000);
  const auto e = student_equivalent(s, b, {100, 150, 1e-3}, 0.0, {100, 300, 2e-3});
  EXPECT_EQ(e.bias_from_var, 0.0);
  EXPECT_EQ(e.risk, e.bias_from_bias);
}

TEST(StudentEquivalent, RegroupedOperatorMatchesNaiveForm) {
  const auto s = make_power_law_spectrum(1.5, 2000);
  const auto b = make_power_law_target(1.5, 0.75, 2000);
  const auto e = student_equivalent(s, b, {400, 600, 1e-3}, 0.3, {400, 200, 2e-3});
  const auto v = naive_lambda(s, e);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(e.lambda_op[k], v[k], 1e-12) << k;
}

TEST(StudentEquivalent, OperatorsArePsdOnRandomConfigs) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 25; ++i) {
    const double a = 1.2 + 1.5 * U(g);
    const auto s = make_power_law_spectrum(a, 3000);
    const auto b = make_power_law_target(a, 0.2 + U(g), 3000);
    auto sz = [&] { return static_cast<std::uint64_t>(std::round(std::pow(10.0, 1.0 + 2.0 * U(g)))); };
    const RidgeConfig ct{sz(), sz(), std::pow(10.0, -4.0 + 4.0 * U(g))};
    const RidgeConfig cs{sz(), sz(), std::pow(10.0, -4.0 + 4.0 * U(g))};
    const auto e = student_equivalent(s, b, ct, 0.5, cs);
    EXPECT_GE(e.lambda_op.min_entry(), 0.0);
    EXPECT_GE(e.lambda0.op.min_entry(), 0.0);
    EXPECT_GE(e.teacher.lambda_t_op.min_entry(), 0.0);
    EXPECT_GT(e.risk, 0.0);
  }
}

TEST(StudentEquivalent, PerfectStudentCollapse) {
  const auto s = make_power_law_spectrum(1.5, 2000);
  const auto b = make_power_law_target(1.5, 0.75, 2000);
  const RidgeConfig ct{400, 600, 1e-3};
  const auto e = student_equivalent(s, b, ct, 0.3, {100000000, 100000000, 1e-12});
  EXPECT_NEAR(e.risk / e.teacher.risk, 1.0, 1e-3);
}

TEST(AssembleStudentLambda, IdentityLambda0GivesTeacherOperator) {
  const auto s = make_power_law_spectrum(1.7, 1500);
  const auto t = teacher_equivalent(s, make_power_law_target(1.7, 0.5, 1500), {200, 300, 1e-3}, 1.0);
  const auto op = assemble_student_lambda(s, t.fixed_point.mu2, t.upsilon_t, t.chi_t, DiagOperator::identity(1500),
                                          t.upsilon_t, t.chi_t, 0.0);
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(op[k], t.lambda_t_op[k], 1e-12) << k;
}

TEST(AssembleStudentLambda, Errors) {
  const auto s = make_power_law_spectrum(2.0, 10);
  EXPECT_THROW(assemble_student_lambda(s, 0.1, 0.1, 0.1, DiagOperator::identity(9), 0.1, 0.1, 0.1), error);
  EXPECT_THROW(assemble_student_lambda(s, 0.0, 0.1, 0.1, DiagOperator::identity(10), 0.1, 0.1, 0.1), error);
  try {
    assemble_student_lambda(s, 0.1, 0.1, 0.1, DiagOperator(std::vector<double>(10, -50.0)), 0.0, 0.0, 0.1);
    FAIL() << "expected psd violation";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::psd_violation);
  }
}

TEST(DetEquiv, DimensionMismatch) {
  const auto s = make_power_law_spectrum(2.0, 10);
  try {
    teacher_equivalent(s, make_power_law_target(2.0, 1.0, 9), {5, 5, 1.0}, 0.0);
    FAIL() << "expected dimension mismatch";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::dimension_mismatch);
  }
}

TEST(DetEquiv, UpsilonGuard) {
  try {
    detail::require_upsilon_below_one(1.0, "test");
    FAIL() << "expected upsilon-ge-one";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::upsilon_ge_one);
  }
}

TEST(StudentErrorBudget, ZeroTargetLeavesTraceTerm) {
  const auto s = make_power_law_spectrum(2.0, 500);
  const TargetCoefs zero(std::vector<double>(500, 0.0));
  const RidgeConfig ct{50, 80, 1e-2}, cs{60, 90, 2e-2};
  const double got = student_error_budget(s, zero, {0.0, 0.0}, ct, cs);
  const auto fp = solve_fixed_point(s, ct);
  const double ups = upsilon(s, 50, 80, fp);
  const auto l0 = student_lambda0(s, cs);
  long double tr = 0;
  for (std::size_t k = 0; k < s.size(); ++k) tr += l0.op[k] / (s[k] + fp.mu2);
  const double expect = static_cast<double>(fp.mu2 / (1.0 - ups) * tr / 50.0L);
  EXPECT_NEAR(got, expect, 1e-9 * expect);
}

TEST(StudentErrorBudget, ScalarChain) {
  const ScalarChain o(1.0);
  const Spectrum s({1.0});
  const double got = student_error_budget(s, TargetCoefs({1.0}), {2.0, 0.5}, {2, 2, 1.0}, {2, 2, 1.0});
  const double expect = 2.0 * 0.5 + 1.0 * std::max(o.lam0, 1.0) + 0.5 * o.mu2 / (1.0 - o.ups) * o.lam0 / (1.0 + o.mu2);
  EXPECT_NEAR(got, expect, 1e-9);
}

TEST(EquivReport, JsonRoundTrip) {
  const auto s = make_power_law_spectrum(1.5, 800);
  const auto b = make_power_law_target(1.5, 0.75, 800);
  const auto r = make_report(student_equivalent(s, b, {100, 150, 1e-3}, 0.3, {100, 300, 2e-3}));
  ASSERT_TRUE(r.has_student());
  const nlohmann::ordered_json j = r;
  const auto back = nlohmann::ordered_json::parse(j.dump()).get<EquivReport>();
  EXPECT_EQ(back, r);
}

TEST(EquivReport, TeacherOnlyOmitsStudentKeys) {
  const auto s = make_power_law_spectrum(1.5, 800);
  const auto b = make_power_law_target(1.5, 0.75, 800);
  const auto r = make_report(teacher_equivalent(s, b, {100, 150, 1e-3}, 0.3));
  EXPECT_FALSE(r.has_student());
  const nlohmann::ordered_json j = r;
  EXPECT_EQ(j.size(), 7u);
  EXPECT_FALSE(j.contains("risk_s"));
  const auto back = j.get<EquivReport>();
  EXPECT_EQ(back.risk_t, r.risk_t);
  EXPECT_EQ(back.mu_t2, r.mu_t2);
  EXPECT_TRUE(std::isnan(back.risk_s));
}
