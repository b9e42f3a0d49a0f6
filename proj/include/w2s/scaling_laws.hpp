#pragma once

// Closed-form scaling-law exponents for teacher and student random-feature
// ridge regression under power-law source/capacity conditions, and the
// weak-to-strong region predicates built on them.
//
// All sizes are power laws in the teacher sample count n_t:
//   p_t = n_t^gamma_pt, lambda_t = n_t^-gamma_lt,
//   n_s = n_t^gamma_ns, p_s = n_t^gamma_ps, lambda_s = n_t^-gamma_ls.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "w2s/error.hpp"
#include "w2s/summation.hpp"

namespace w2s {

enum class TauOrder { theta_one, zero };

struct ScalingParams {
  double alpha = 2.0;
  double r = 1.0;
  double gamma_pt = 1.0;
  double gamma_lt = 0.0;
  double gamma_ns = 1.0;
  double gamma_ps = 1.0;
  double gamma_ls = 0.0;
  TauOrder tau_order = TauOrder::theta_one;

  void validate() const {
    detail::require(alpha > 1.0, errc::invalid_parameter, "alpha must exceed 1");
    detail::require(r > 0.0, errc::invalid_parameter, "r must be positive");
    detail::require(gamma_ns > 0.0 && gamma_pt > 0.0 && gamma_ps > 0.0, errc::invalid_parameter,
                    "gamma_ns, gamma_pt and gamma_ps must be positive");
  }
};

/// gamma_lt >= -1 and gamma_ls >= -gamma_ns (boundaries included).
inline bool stable_check(const ScalingParams& p) {
  return p.gamma_lt >= -1.0 && p.gamma_ls >= -p.gamma_ns;
}

struct ZExponents {
  double z_t;
  double z_s;
};

inline ZExponents z_exponents(const ScalingParams& p) {
  p.validate();
  const double zt = std::min({(1.0 + p.gamma_lt) / p.alpha, 1.0, p.gamma_pt});
  const double zs = std::min({(p.gamma_ns + p.gamma_ls) / p.alpha, p.gamma_ns, p.gamma_ps});
  return {zt, zs};
}

namespace detail {

struct SourceTerms {
  double a;        // alpha
  double two_a1;   // 2 alpha (r ^ 1)
  double two_ah;   // 2 alpha (r ^ 1/2)
};

inline SourceTerms source_terms(const ScalingParams& p) {
  return {p.alpha, 2.0 * p.alpha * std::min(p.r, 1.0), 2.0 * p.alpha * std::min(p.r, 0.5)};
}

}  // namespace detail

struct TeacherExponents {
  double gamma_tB;
  double gamma_tV;
};

inline TeacherExponents teacher_exponents(const ScalingParams& p) {
  const auto [zt, zs] = z_exponents(p);
  (void)zs;
  const auto s = detail::source_terms(p);
  return {std::min(s.two_a1 * zt, p.gamma_pt + (s.two_ah - 1.0) * zt), 1.0 - zt};
}

enum class StudentBranch { zt_le_zs, zt_gt_zs };

struct StudentExponents {
  double gamma_s_bias;
  double gamma_s_var;
  StudentBranch branch;
};

inline StudentExponents student_exponents(const ScalingParams& p) {
  const auto [zt, zs] = z_exponents(p);
  const auto s = detail::source_terms(p);
  const double a = s.a;
  StudentExponents out{};
  if (zt <= zs) {
    out.branch = StudentBranch::zt_le_zs;
    out.gamma_s_bias = std::min({s.two_a1 * zt, p.gamma_pt + (s.two_ah - 1.0) * zt,
                                 (s.two_ah - a) * zt + (a - 1.0) * zs + p.gamma_ps});
  } else {
    out.branch = StudentBranch::zt_gt_zs;
    out.gamma_s_bias = std::min({s.two_a1 * zs, s.two_ah * zs - zs + p.gamma_ps,
                                 s.two_ah * zt + a * (zt - zs) - zs + p.gamma_pt,
                                 s.two_ah * zt - zt + 1.0 - zs + p.gamma_pt});
  }
  out.gamma_s_var = 1.0 - std::min(zs, zt);
  return out;
}

struct OptimalExponents {
  double gamma_t_star;
  double gamma_s_star;
  double minimax;
};

inline OptimalExponents optimal_exponents(double alpha, double r) {
  detail::require(alpha > 1.0, errc::invalid_parameter, "alpha must exceed 1");
  detail::require(r > 0.0, errc::invalid_parameter, "r must be positive");
  const double g = 2.0 * alpha * std::min(r, 1.0);
  const double m = 2.0 * alpha * r;
  return {g / (1.0 + g), g / (1.0 + g), m / (1.0 + m)};
}

enum class Region { none, variance_w2sg, bias_w2sg };

inline const char* to_string(Region r) noexcept {
  switch (r) {
    case Region::none: return "none";
    case Region::variance_w2sg: return "variance_w2sg";
    case Region::bias_w2sg: return "bias_w2sg";
  }
  return "none";
}

inline const char* to_string(StudentBranch b) noexcept {
  return b == StudentBranch::zt_le_zs ? "zt_le_zs" : "zt_gt_zs";
}

/// One inequality of a corollary, written as `margin > 0`.
struct Witness {
  std::string name;
  double margin;
  bool satisfied;
  bool boundary;  // |margin| <= kBoundaryTol
};

inline constexpr double kBoundaryTol = 1e-9;

struct ExponentReport {
  double z_t = 0, z_s = 0;
  double gamma_tB = 0, gamma_tV = 0, teacher_exponent = 0;
  double gamma_s_bias = 0, gamma_s_var = 0, student_exponent = 0;
  StudentBranch branch = StudentBranch::zt_le_zs;
  Region region = Region::none;
  std::vector<Witness> witnesses;
  bool boundary = false;

  /// Smallest-margin inequality among those checked; empty when none were.
  const Witness* binding_witness() const {
    if (witnesses.empty()) return nullptr;
    return &*std::min_element(witnesses.begin(), witnesses.end(),
                              [](const Witness& a, const Witness& b) { return a.margin < b.margin; });
  }
};

/// Exponents for p with no region classification (valid for unstable p too).
inline ExponentReport exponent_report(const ScalingParams& p) {
  ExponentReport rep;
  const auto z = z_exponents(p);
  const auto t = teacher_exponents(p);
  const auto s = student_exponents(p);
  rep.z_t = z.z_t;
  rep.z_s = z.z_s;
  rep.gamma_tB = t.gamma_tB;
  rep.gamma_tV = t.gamma_tV;
  rep.teacher_exponent = std::min(t.gamma_tB, t.gamma_tV);
  rep.gamma_s_bias = s.gamma_s_bias;
  rep.gamma_s_var = s.gamma_s_var;
  rep.student_exponent = std::min(s.gamma_s_bias, s.gamma_s_var);
  rep.branch = s.branch;
  return rep;
}

/// Weak-to-strong region from the necessary condition z_t > z_s, then the
/// variance-reduction characterization (variance-dominated teacher, tau of
/// order one) or the bias-reduction characterization (V_t <= B_t).
inline ExponentReport classify_w2sg(const ScalingParams& p) {
  p.validate();
  detail::require(stable_check(p), errc::invalid_parameter, "unstable regularization scalings");
  ExponentReport rep = exponent_report(p);
  const auto s = detail::source_terms(p);
  const double a = s.a;
  const double zt = rep.z_t, zs = rep.z_s;

  auto check = [&rep](const char* name, double margin) {
    const bool boundary = std::fabs(margin) <= kBoundaryTol;
    rep.witnesses.push_back({name, margin, margin > 0.0, boundary});
    rep.boundary = rep.boundary || boundary;
    return margin > 0.0;
  };
  auto all_of = [&rep](std::size_t from) {
    return std::all_of(rep.witnesses.begin() + static_cast<std::ptrdiff_t>(from), rep.witnesses.end(),
                       [](const Witness& w) { return w.satisfied; });
  };

  if (!check("necessary_zt_gt_zs", zt - zs)) return rep;

  const bool tau_one = p.tau_order == TauOrder::theta_one;
  if (tau_one && rep.gamma_tV < rep.gamma_tB) {
    // Variance-dominated teacher.
    const std::size_t first = rep.witnesses.size();
    check("var_pre_zt_lower", zt - std::max(1.0 / (1.0 + s.two_a1), (1.0 - p.gamma_pt) / s.two_ah));
    check("var_pre_gamma_pt", p.gamma_pt - 1.0 / (1.0 + s.two_ah));
    check("var_student_width", s.two_ah * zs - zs + p.gamma_ps - (1.0 - zt));
    check("var_zs_below_zt", zt - zs);
    check("var_zs_lower", zs - (1.0 - zt) / s.two_a1);
    if (all_of(first)) rep.region = Region::variance_w2sg;
    return rep;
  }

  // V_t <= B_t: exponent comparison for tau of order one, automatic for tau = 0.
  const std::size_t first = rep.witnesses.size();
  check("bias_zt_lower", zt - p.gamma_pt / (1.0 + s.two_a1 - s.two_ah));
  check("bias_zt_upper", std::min(p.gamma_pt, (s.two_a1 / (1.0 + s.two_a1) - p.gamma_pt) / (a - 1.0)) - zt);
  check("bias_gamma_pt_upper", 1.0 - s.two_ah / (1.0 + s.two_a1) - p.gamma_pt);
  check("bias_zs_upper", 1.0 - (a - 1.0) * zt - p.gamma_pt - zs);
  check("bias_zs_lower", zs - ((a - 1.0) * zt + p.gamma_pt) / s.two_a1);
  check("bias_width_gap", p.gamma_ps - p.gamma_pt - (a - 1.0) * (zt - zs));
  if (all_of(first)) rep.region = Region::bias_w2sg;
  return rep;
}

/// Least-squares slope of log(y) against log(x).
inline double fit_log_slope(std::span<const double> xs, std::span<const double> ys) {
  detail::require(xs.size() == ys.size(), errc::dimension_mismatch, "xs and ys differ in length");
  detail::require(xs.size() >= 3, errc::invalid_parameter, "need at least three points");
  const std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < n; ++i) {
    detail::require(xs[i] > 0.0 && ys[i] > 0.0, errc::invalid_parameter, "points must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx.value() / static_cast<double>(n);
  const double my = sy.value() / static_cast<double>(n);
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  detail::require(sxx.value() > 0.0, errc::invalid_parameter, "all x values are equal");
  return sxy.value() / sxx.value();
}

}  // namespace w2s
