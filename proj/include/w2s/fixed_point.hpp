#pragma once

// Self-consistent fixed point (mu1, mu2) of random-feature ridge regression:
//
//   1 + n/p - sqrt((1 - n/p)^2 + 4 lambda / (p mu2)) = (2/p) Tr(Sigma (Sigma + mu2)^-1)
//   1 - n/p + sqrt((1 - n/p)^2 + 4 lambda / (p mu2)) = 2 mu1 / mu2
//
// Two independent routes are provided. solve_fixed_point works on the first
// equation directly (it only involves mu2). solve_fixed_point_scalar works on
// the equivalent product form
//
//   F(mu2) = mu2 (1 - T1(mu2)/p) (n - T1(mu2)) = lambda,   T1(mu) = Tr(Sigma (Sigma + mu)^-1),
//
// on the branch T1 < min(n, p) where F is strictly increasing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include "w2s/error.hpp"
#include "w2s/scaling_laws.hpp"
#include "w2s/spectrum.hpp"

namespace w2s {

struct RidgeConfig {
  std::uint64_t n = 1;
  std::uint64_t p = 1;
  double lambda = 1.0;

  void validate() const {
    detail::require(n >= 1 && p >= 1, errc::invalid_parameter, "n and p must be at least 1");
    detail::require(lambda > 0.0 && std::isfinite(lambda), errc::invalid_parameter, "lambda must be positive");
  }
};

struct FixedPoint {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double t1 = 0.0;  // Tr(Sigma (Sigma + mu2)^-1)
};

inline constexpr double kDefaultFixedPointTol = 1e-12;
inline constexpr int kFixedPointMaxIter = 200;

/// Tr(Sigma (Sigma + mu)^-1), the effective dimension at scale mu.
inline double effective_dimension(const Spectrum& spec, double mu) { return weighted_trace(spec, 1, 1, mu); }

namespace detail {

/// 1 - n/p + s evaluated without cancellation when n > p.
inline double one_minus_ratio_plus_s(double ratio, double s, double lambda, double p, double mu2) {
  const double u = 1.0 - ratio;
  if (u >= 0.0) return u + s;
  return (4.0 * lambda / (p * mu2)) / (s - u);
}

}  // namespace detail

struct FixedPointResiduals {
  double r1;
  double r2;
  // sides of each equation, for relative checks
  double lhs1, rhs1, lhs2, rhs2;

  double relative1() const { return std::fabs(r1) / std::max({std::fabs(lhs1), std::fabs(rhs1), 1e-300}); }
  double relative2() const { return std::fabs(r2) / std::max({std::fabs(lhs2), std::fabs(rhs2), 1e-300}); }
};

inline FixedPointResiduals fixed_point_residuals(const Spectrum& spec, const RidgeConfig& cfg, double mu1,
                                                 double mu2) {
  detail::require(mu1 > 0.0 && mu2 > 0.0, errc::invalid_parameter, "mu1 and mu2 must be positive");
  const double n = static_cast<double>(cfg.n);
  const double p = static_cast<double>(cfg.p);
  const double ratio = n / p;
  const double s = std::sqrt((1.0 - ratio) * (1.0 - ratio) + 4.0 * cfg.lambda / (p * mu2));
  const double t1 = effective_dimension(spec, mu2);
  FixedPointResiduals r{};
  r.lhs1 = 1.0 + ratio - s;
  r.rhs1 = 2.0 / p * t1;
  r.lhs2 = detail::one_minus_ratio_plus_s(ratio, s, cfg.lambda, p, mu2);
  r.rhs2 = 2.0 * mu1 / mu2;
  r.r1 = r.lhs1 - r.rhs1;
  r.r2 = r.lhs2 - r.rhs2;
  return r;
}

namespace detail {

/// Root of a continuous increasing f on (lo, hi) with f(lo) <= 0 <= f(hi),
/// searched in log(mu). Illinois false-position steps with a bisection
/// fallback; f may return -inf on the left part of the bracket.
template <class F>
double increasing_root_log(F&& f, double lo, double hi, double f_lo, double f_hi, double tol, int max_iter) {
  double xl = std::log(lo), xh = std::log(hi);
  double fl = f_lo, fh = f_hi;
  int side = 0;
  int slow = 0;  // consecutive steps that failed to halve the bracket
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    const double width = xh - xl;
    const double floor_w = 4.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::fabs(xl), std::fabs(xh)});
    if (width <= std::max(tol * 1e-3, floor_w)) {
      converged = true;
      break;
    }

    double x = 0.5 * (xl + xh);
    if (std::isfinite(fl) && std::isfinite(fh) && fh > fl && slow < 2) {
      const double xs = xh - fh * (xh - xl) / (fh - fl);
      if (xs > xl && xs < xh) x = xs;
    }
    if (x <= xl || x >= xh) {  // no representable interior point left
      converged = true;
      break;
    }

    const double fx = f(std::exp(x));
    if (fx == 0.0) return std::exp(x);
    if (fx < 0.0) {
      xl = x;
      fl = fx;
      if (side == -1) fh *= 0.5;
      side = -1;
    } else {
      xh = x;
      fh = fx;
      if (side == +1) fl *= 0.5;
      side = +1;
    }
    slow = (xh - xl > 0.5 * width) ? slow + 1 : 0;
  }
  if (!converged) throw error(errc::no_convergence, "fixed-point iteration cap reached");
  // Report the endpoint closer to the root.
  if (!std::isfinite(fl)) return std::exp(xh);
  return std::fabs(fl) < std::fabs(fh) ? std::exp(xl) : std::exp(xh);
}

/// Bracket [lambda/n, hi]: F(mu) <= n mu puts the root above lambda/n; the
/// upper end starts at 2 (lambda/n + Tr Sigma) and doubles until f(hi) >= 0.
template <class F>
std::pair<double, double> bracket_mu2(F&& f, const Spectrum& spec, const RidgeConfig& cfg, int& budget) {
  const double n = static_cast<double>(cfg.n);
  double hi = 2.0 * (cfg.lambda / n + spec.trace());
  while (f(hi) < 0.0) {
    if (--budget <= 0 || !std::isfinite(hi)) throw error(errc::no_convergence, "could not bracket mu2");
    hi *= 2.0;
  }
  const double lo = cfg.lambda / n;
  detail::require(lo > 0.0 && std::isfinite(lo), errc::no_convergence, "lambda/n underflows");
  return {lo, hi};
}

}  // namespace detail

/// Solves the first self-consistency equation for mu2 and takes mu1 from the second.
inline FixedPoint solve_fixed_point(const Spectrum& spec, const RidgeConfig& cfg,
                                    double tol = kDefaultFixedPointTol) {
  cfg.validate();
  detail::require(tol > 0.0 && tol <= 1e-6, errc::invalid_parameter, "tol must lie in (0, 1e-6]");
  const double n = static_cast<double>(cfg.n);
  const double p = static_cast<double>(cfg.p);
  const double ratio = n / p;
  const double u2 = (1.0 - ratio) * (1.0 - ratio);

  const auto h = [&](double mu) {
    const double s = std::sqrt(u2 + 4.0 * cfg.lambda / (p * mu));
    return (1.0 + ratio - s) - 2.0 / p * effective_dimension(spec, mu);
  };

  int budget = kFixedPointMaxIter;
  const auto [lo, hi] = detail::bracket_mu2(h, spec, cfg, budget);
  const double h_lo = h(lo);
  FixedPoint fp;
  if (h_lo >= 0.0) {
    fp.mu2 = lo;
  } else {
    fp.mu2 = detail::increasing_root_log(h, lo, hi, h_lo, h(hi), tol, budget);
  }
  const double s = std::sqrt(u2 + 4.0 * cfg.lambda / (p * fp.mu2));
  fp.mu1 = 0.5 * fp.mu2 * detail::one_minus_ratio_plus_s(ratio, s, cfg.lambda, p, fp.mu2);
  fp.t1 = effective_dimension(spec, fp.mu2);
  return fp;
}

/// Solves mu2 (1 - T1/p)(n - T1) = lambda for mu2.
inline FixedPoint solve_fixed_point_scalar(const Spectrum& spec, const RidgeConfig& cfg,
                                           double tol = kDefaultFixedPointTol) {
  cfg.validate();
  detail::require(tol > 0.0 && tol <= 1e-6, errc::invalid_parameter, "tol must lie in (0, 1e-6]");
  const double n = static_cast<double>(cfg.n);
  const double p = static_cast<double>(cfg.p);
  const double m = std::min(n, p);
  const double log_lambda = std::log(cfg.lambda);

  const auto g = [&](double mu) {
    const double t = effective_dimension(spec, mu);
    if (t >= m) return -std::numeric_limits<double>::infinity();
    return std::log(mu) + std::log1p(-t / p) + std::log(n - t) - log_lambda;
  };

  int budget = kFixedPointMaxIter;
  const auto [lo, hi] = detail::bracket_mu2(g, spec, cfg, budget);
  const double g_lo = g(lo);
  FixedPoint fp;
  if (g_lo >= 0.0) {
    fp.mu2 = lo;
  } else {
    fp.mu2 = detail::increasing_root_log(g, lo, hi, g_lo, g(hi), tol, budget);
  }
  fp.t1 = effective_dimension(spec, fp.mu2);
  detail::require(fp.t1 < m, errc::no_convergence, "fixed point left the admissible branch");
  // Both mu1 = lambda/(n - T1) and mu1 = mu2 (1 - T1/p) hold at the root; use
  // the one whose difference cancels less.
  const double t = fp.t1;
  fp.mu1 = (n * (p - t) <= p * (n - t)) ? cfg.lambda / (n - t) : fp.mu2 * ((p - t) / p);
  return fp;
}

enum class Role { teacher, student };

/// Predicted log-log slopes in n_t of the fixed point and functionals.
struct AsymptoticScalings {
  double z;
  double mu2_slope;
  double mu1_slope;
  double upsilon_slope;
  double chi_slope;
};

inline AsymptoticScalings asymptotic_fixed_point(const ScalingParams& sp, Role role) {
  sp.validate();
  detail::require(stable_check(sp), errc::invalid_parameter, "unstable regularization scalings");
  const auto [zt, zs] = z_exponents(sp);
  const double a = sp.alpha;
  AsymptoticScalings out{};
  if (role == Role::teacher) {
    out.z = zt;
    out.mu2_slope = -a * zt;
    out.mu1_slope = (1.0 < std::min((1.0 + sp.gamma_lt) / a, sp.gamma_pt)) ? -a : -(1.0 + sp.gamma_lt);
    out.upsilon_slope = -1.0 + zt;
    out.chi_slope = -sp.gamma_pt + (a + 1.0) * zt;
  } else {
    const double g = sp.gamma_ns;
    out.z = zs;
    out.mu2_slope = -a * zs;
    out.mu1_slope =
        (1.0 < std::min((g + sp.gamma_ls) / (a * g), sp.gamma_ps / g)) ? -a * g : -(g + sp.gamma_ls);
    out.upsilon_slope = -g + zs;
    out.chi_slope = -sp.gamma_ps + (a + 1.0) * zs;
  }
  return out;
}

}  // namespace w2s
