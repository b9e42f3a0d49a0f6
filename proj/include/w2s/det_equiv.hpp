#pragma once

// Deterministic equivalents of the teacher and student excess test errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "w2s/error.hpp"
#include "w2s/fixed_point.hpp"
#include "w2s/functionals.hpp"
#include "w2s/spectrum.hpp"

namespace w2s {

/// Negative entries above this magnitude in Lambda, Lambda_0 or Lambda_t are
/// reported as psd-violation; smaller ones are rounding and are clamped to 0.
inline constexpr double kPsdTolerance = 1e-10;

struct TeacherEquiv {
  RidgeConfig cfg;
  double tau = 0.0;
  FixedPoint fixed_point;
  double upsilon_t = 0.0;
  double chi_t = 0.0;
  DiagOperator lambda_t_op;
  double bias = 0.0;      // <beta, Lambda_t beta>
  double variance = 0.0;  // tau^2 Upsilon_t / (1 - Upsilon_t)
  double risk = 0.0;
};

struct StudentLambda0 {
  RidgeConfig cfg;
  FixedPoint fixed_point;
  double upsilon_s = 0.0;
  double chi_s = 0.0;
  DiagOperator op;
};

struct StudentEquiv {
  TeacherEquiv teacher;
  StudentLambda0 lambda0;
  double upsilon_t_lambda0 = 0.0;
  double chi_t_lambda0 = 0.0;
  DiagOperator lambda_op;
  double bias_from_bias = 0.0;  // <beta, Lambda beta>
  double bias_from_var = 0.0;   // tau^2 Upsilon_t(Lambda_0) / (1 - Upsilon_t)
  double risk = 0.0;
};

namespace detail {

inline void require_upsilon_below_one(double u, const char* which) {
  if (!(u < 1.0)) throw error(errc::upsilon_ge_one, which);
}

inline double clamp_psd(double v) {
  if (v < -kPsdTolerance) throw error(errc::psd_violation, "diagonal operator entry below -1e-10");
  return std::max(v, 0.0);
}

}  // namespace detail

inline TeacherEquiv teacher_equivalent(const Spectrum& spec, const TargetCoefs& beta, const RidgeConfig& cfg_t,
                                       double tau_t, double tol = kDefaultFixedPointTol) {
  detail::require(beta.size() == spec.size(), errc::dimension_mismatch, "target and spectrum sizes differ");
  detail::require(tau_t >= 0.0 && std::isfinite(tau_t), errc::invalid_parameter, "tau must be non-negative");
  TeacherEquiv t;
  t.cfg = cfg_t;
  t.tau = tau_t;
  t.fixed_point = solve_fixed_point_scalar(spec, cfg_t, tol);
  const double mu = t.fixed_point.mu2;
  t.upsilon_t = upsilon(spec, cfg_t.n, cfg_t.p, t.fixed_point);
  detail::require_upsilon_below_one(t.upsilon_t, "teacher Upsilon >= 1");
  t.chi_t = chi(spec, cfg_t.p, mu);

  std::vector<double> lt(spec.size());
  const double scale = mu * mu / (1.0 - t.upsilon_t);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double x = spec[k];
    lt[k] = detail::clamp_psd(scale * (1.0 + t.chi_t * x) / ((x + mu) * (x + mu)));
  }
  t.lambda_t_op = DiagOperator(std::move(lt));
  t.bias = quadratic_form(beta, t.lambda_t_op);
  t.variance = tau_t * tau_t * t.upsilon_t / (1.0 - t.upsilon_t);
  t.risk = t.bias + t.variance;
  return t;
}

/// Lambda_0 = Sigma^2 (Sigma + mu_s2)^-2 + Upsilon_s/(1 - Upsilon_s) mu_s2^2 (Sigma + mu_s2)^-2
///          + chi_s/(1 - Upsilon_s) mu_s2^2 Sigma (Sigma + mu_s2)^-2
inline StudentLambda0 student_lambda0(const Spectrum& spec, const RidgeConfig& cfg_s,
                                      double tol = kDefaultFixedPointTol) {
  StudentLambda0 l;
  l.cfg = cfg_s;
  l.fixed_point = solve_fixed_point_scalar(spec, cfg_s, tol);
  const double mu = l.fixed_point.mu2;
  l.upsilon_s = upsilon(spec, cfg_s.n, cfg_s.p, l.fixed_point);
  detail::require_upsilon_below_one(l.upsilon_s, "student Upsilon >= 1");
  l.chi_s = chi(spec, cfg_s.p, mu);

  const double cu = l.upsilon_s / (1.0 - l.upsilon_s) * mu * mu;
  const double cc = l.chi_s / (1.0 - l.upsilon_s) * mu * mu;
  std::vector<double> v(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double x = spec[k];
    const double inv = 1.0 / ((x + mu) * (x + mu));
    v[k] = detail::clamp_psd((x * x + cu + cc * x) * inv);
  }
  l.op = DiagOperator(std::move(v));
  return l;
}

/// Lambda = I - 2 Sigma^2 (Sigma + mu_s2)^-1 (Sigma + mu_t2)^-1 + Lambda_0 Sigma^2 (Sigma + mu_t2)^-2
///        + Upsilon_t(Lambda_0)/(1 - Upsilon_t) mu_t2^2 (Sigma + mu_t2)^-2
///        + [Upsilon_t(Lambda_0) chi_t/(1 - Upsilon_t) + chi_t(Lambda_0)] mu_t2^2 Sigma (Sigma + mu_t2)^-2
///
/// The first three terms are regrouped as (1-b)^2 + 2b(1-a) + b^2 (Lambda_0 - 1)
/// with a = Sigma/(Sigma + mu_s2), b = Sigma/(Sigma + mu_t2), which avoids
/// cancelling O(1) terms on the head of the spectrum. mu_s2 = 0 is accepted.
inline DiagOperator assemble_student_lambda(const Spectrum& spec, double mu_t2, double upsilon_t, double chi_t,
                                            const DiagOperator& lambda0, double upsilon_t_lambda0,
                                            double chi_t_lambda0, double mu_s2) {
  detail::require(lambda0.size() == spec.size(), errc::dimension_mismatch, "Lambda_0 size differs from spectrum");
  detail::require(mu_t2 > 0.0 && mu_s2 >= 0.0, errc::invalid_parameter, "invalid fixed points");
  const double cu = upsilon_t_lambda0 / (1.0 - upsilon_t) * mu_t2 * mu_t2;
  const double cc = (upsilon_t_lambda0 * chi_t / (1.0 - upsilon_t) + chi_t_lambda0) * mu_t2 * mu_t2;
  std::vector<double> v(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double x = spec[k];
    const double inv_t = 1.0 / (x + mu_t2);
    const double b = x * inv_t;
    const double one_minus_b = mu_t2 * inv_t;
    const double one_minus_a = mu_s2 / (x + mu_s2);
    const double head = one_minus_b * one_minus_b + 2.0 * b * one_minus_a + b * b * (lambda0[k] - 1.0);
    v[k] = detail::clamp_psd(head + (cu + cc * x) * inv_t * inv_t);
  }
  return DiagOperator(std::move(v));
}

inline StudentEquiv student_equivalent(const Spectrum& spec, const TargetCoefs& beta, const RidgeConfig& cfg_t,
                                       double tau_t, const RidgeConfig& cfg_s,
                                       double tol = kDefaultFixedPointTol) {
  StudentEquiv s;
  s.teacher = teacher_equivalent(spec, beta, cfg_t, tau_t, tol);
  s.lambda0 = student_lambda0(spec, cfg_s, tol);
  const auto& t = s.teacher;
  s.upsilon_t_lambda0 = upsilon(spec, s.lambda0.op, cfg_t.n, cfg_t.p, t.fixed_point);
  s.chi_t_lambda0 = chi(spec, s.lambda0.op, cfg_t.p, t.fixed_point.mu2);
  s.lambda_op = assemble_student_lambda(spec, t.fixed_point.mu2, t.upsilon_t, t.chi_t, s.lambda0.op,
                                        s.upsilon_t_lambda0, s.chi_t_lambda0, s.lambda0.fixed_point.mu2);
  s.bias_from_bias = quadratic_form(beta, s.lambda_op);
  s.bias_from_var = tau_t * tau_t * s.upsilon_t_lambda0 / (1.0 - t.upsilon_t);
  s.risk = s.bias_from_bias + s.bias_from_var;
  return s;
}

struct TeacherNorms {
  double beta_t_norm = 0.0;    // ||beta_t||
  double beta_gap_norm = 0.0;  // ||beta_* - beta_t||
};

/// ||beta_t|| ||beta_* - beta_t|| + ||beta_*||^2 (||Lambda_0||_op v 1)
///   + (1/n_t) mu_t2/(1 - Upsilon_t) Tr(Lambda_0 (Sigma + mu_t2)^-1)
inline double student_error_budget(const Spectrum& spec, const TargetCoefs& beta, const TeacherNorms& norms,
                                   const RidgeConfig& cfg_t, const RidgeConfig& cfg_s,
                                   double tol = kDefaultFixedPointTol) {
  detail::require(beta.size() == spec.size(), errc::dimension_mismatch, "target and spectrum sizes differ");
  const FixedPoint fp_t = solve_fixed_point_scalar(spec, cfg_t, tol);
  const double ups_t = upsilon(spec, cfg_t.n, cfg_t.p, fp_t);
  detail::require_upsilon_below_one(ups_t, "teacher Upsilon >= 1");
  const StudentLambda0 l0 = student_lambda0(spec, cfg_s, tol);
  const double op_norm = std::max(l0.op.max_entry(), 1.0);
  const double trace_term = fp_t.mu2 / (1.0 - ups_t) * weighted_trace(spec, l0.op, 0, 1, fp_t.mu2) /
                            static_cast<double>(cfg_t.n);
  return norms.beta_t_norm * norms.beta_gap_norm + beta.norm() * beta.norm() * op_norm + trace_term;
}

}  // namespace w2s
