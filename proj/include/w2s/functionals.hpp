#pragma once

// Trace functionals Upsilon and chi evaluated at a solved fixed point, plus
// spectrum diagnostics used by the approximation guarantees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "w2s/error.hpp"
#include "w2s/fixed_point.hpp"
#include "w2s/spectrum.hpp"

namespace w2s {

namespace detail {

/// 1 - (1/p) Tr(Sigma^2 (Sigma + mu2)^-2); must stay positive.
inline double chi_denominator(const Spectrum& spec, double p, double mu2) {
  const double t22 = weighted_trace(spec, 2, 2, mu2);
  if (!(p > t22)) throw error(errc::degenerate_denominator, "p <= Tr(Sigma^2 (Sigma + mu2)^-2)");
  return p - t22;
}

}  // namespace detail

/// Upsilon_{n,p}(A; mu1, mu2)
///   = (1/n) Tr(A Sigma (Sigma + mu2)^-1)
///     - (mu1/n) Tr(A Sigma (Sigma + mu2)^-2) / (1 - (1/p) Tr(Sigma^2 (Sigma + mu2)^-2)).
inline double upsilon(const Spectrum& spec, const DiagOperator& A, std::uint64_t n, std::uint64_t p,
                      const FixedPoint& fp) {
  const double pd = static_cast<double>(p);
  const double den = detail::chi_denominator(spec, pd, fp.mu2) / pd;
  const double t11 = weighted_trace(spec, A, 1, 1, fp.mu2);
  const double t12 = weighted_trace(spec, A, 1, 2, fp.mu2);
  return (t11 - fp.mu1 * t12 / den) / static_cast<double>(n);
}

inline double upsilon(const Spectrum& spec, std::uint64_t n, std::uint64_t p, const FixedPoint& fp) {
  const double pd = static_cast<double>(p);
  const double den = detail::chi_denominator(spec, pd, fp.mu2) / pd;
  const double t11 = weighted_trace(spec, 1, 1, fp.mu2);
  const double t12 = weighted_trace(spec, 1, 2, fp.mu2);
  return (t11 - fp.mu1 * t12 / den) / static_cast<double>(n);
}

/// chi_{n,p}(A; mu2) = Tr(A Sigma (Sigma + mu2)^-2) / (p - Tr(Sigma^2 (Sigma + mu2)^-2)).
inline double chi(const Spectrum& spec, const DiagOperator& A, std::uint64_t p, double mu2) {
  const double den = detail::chi_denominator(spec, static_cast<double>(p), mu2);
  return weighted_trace(spec, A, 1, 2, mu2) / den;
}

inline double chi(const Spectrum& spec, std::uint64_t p, double mu2) {
  const double den = detail::chi_denominator(spec, static_cast<double>(p), mu2);
  return weighted_trace(spec, 1, 2, mu2) / den;
}

/// r_Sigma(k) = sum_{j >= k} xi^2_j / xi^2_k, k is 1-based.
inline double intrinsic_dimension(const Spectrum& spec, std::size_t k) {
  detail::require(k >= 1 && k <= spec.size(), errc::invalid_parameter, "k out of range");
  CompensatedSum s;
  for (std::size_t j = spec.size(); j-- > k - 1;) s += spec[j];
  return s.value() / spec[k - 1];
}

inline constexpr double kDefaultEtaStar = 0.25;

namespace detail {

/// floor(eta * k) clamped to >= 1.
inline std::uint64_t star_index(double eta, std::uint64_t k) {
  const auto ks = static_cast<std::uint64_t>(std::floor(eta * static_cast<double>(k)));
  return std::max<std::uint64_t>(ks, 1);
}

/// xi^2_k with the truncated tail read as zero.
inline double eigen_or_zero(const Spectrum& spec, std::uint64_t k) {
  return k <= spec.size() ? spec[static_cast<std::size_t>(k - 1)] : 0.0;
}

inline void require_eta(double eta) {
  require(eta > 0.0 && eta < 0.5, errc::invalid_parameter, "eta_star must lie in (0, 1/2)");
}

}  // namespace detail

/// M_Sigma(k) = 1 + ((r(k*) v k) / k) log(r(k*) v k), natural log with the
/// argument clamped below at e. Past the truncation r(k*) is read as 1.
inline double m_sigma(const Spectrum& spec, std::uint64_t k, double eta_star) {
  detail::require_eta(eta_star);
  detail::require(k >= 1, errc::invalid_parameter, "k must be at least 1");
  const std::uint64_t ks = detail::star_index(eta_star, k);
  const double r = ks <= spec.size() ? intrinsic_dimension(spec, static_cast<std::size_t>(ks)) : 1.0;
  const double kd = static_cast<double>(k);
  const double m = std::max(r, kd);
  return 1.0 + (m / kd) * std::log(std::max(m, std::exp(1.0)));
}

/// rho_lambda(p) = 1 + (p xi^2_{p*} / lambda) M_Sigma(p)
inline double rho_lambda(const Spectrum& spec, std::uint64_t p, double lambda, double eta_star) {
  detail::require(lambda > 0.0, errc::invalid_parameter, "lambda must be positive");
  const double xi = detail::eigen_or_zero(spec, detail::star_index(eta_star, p));
  return 1.0 + static_cast<double>(p) * xi / lambda * m_sigma(spec, p, eta_star);
}

/// rho~_lambda(n, p) = 1 + {n xi^2_{n*} / lambda + (n/p) rho_lambda(p)} M_Sigma(n) 1{n* <= p}
inline double rho_tilde_lambda(const Spectrum& spec, std::uint64_t n, std::uint64_t p, double lambda,
                               double eta_star) {
  detail::require(lambda > 0.0, errc::invalid_parameter, "lambda must be positive");
  const std::uint64_t ns = detail::star_index(eta_star, n);
  if (ns > p) return 1.0;
  const double nd = static_cast<double>(n);
  const double xi = detail::eigen_or_zero(spec, ns);
  const double inner = nd * xi / lambda + nd / static_cast<double>(p) * rho_lambda(spec, p, lambda, eta_star);
  return 1.0 + inner * m_sigma(spec, n, eta_star);
}

/// Diagnostic only: the constants of the guarantees are not constructive.
struct Diagnostics {
  double eta_star = kDefaultEtaStar;
  std::uint64_t n_star = 1, p_star = 1;
  double r_sigma_n_star = 1, r_sigma_p_star = 1;
  double m_sigma_n = 1, m_sigma_p = 1;
  double rho = 1;        // rho_{p mu1}(p)
  double rho_tilde = 1;  // rho~_{p lambda / n}(n, p)
  double approx_rate = 0;  // (rho~ log n)^C1 / sqrt(n) + (rho~ rho log p)^C1 / sqrt(p)
  double c1 = 1;
};

inline Diagnostics rho_diagnostics(const Spectrum& spec, std::uint64_t n, std::uint64_t p, double lambda,
                                   double eta_star, const FixedPoint& fp, double c1 = 1.0) {
  detail::require_eta(eta_star);
  detail::require(n >= 1 && p >= 1 && lambda > 0.0, errc::invalid_parameter, "invalid (n, p, lambda)");
  Diagnostics d;
  d.eta_star = eta_star;
  d.c1 = c1;
  d.n_star = detail::star_index(eta_star, n);
  d.p_star = detail::star_index(eta_star, p);
  const auto r_at = [&](std::uint64_t k) {
    return k <= spec.size() ? intrinsic_dimension(spec, static_cast<std::size_t>(k)) : 1.0;
  };
  d.r_sigma_n_star = r_at(d.n_star);
  d.r_sigma_p_star = r_at(d.p_star);
  d.m_sigma_n = m_sigma(spec, n, eta_star);
  d.m_sigma_p = m_sigma(spec, p, eta_star);
  const double nd = static_cast<double>(n), pd = static_cast<double>(p);
  d.rho = rho_lambda(spec, p, pd * fp.mu1, eta_star);
  d.rho_tilde = rho_tilde_lambda(spec, n, p, pd * lambda / nd, eta_star);
  d.approx_rate = std::pow(d.rho_tilde * std::log(nd), c1) / std::sqrt(nd) +
                  std::pow(d.rho_tilde * d.rho * std::log(pd), c1) / std::sqrt(pd);
  return d;
}

struct AssumptionRatios {
  double trace_ratio;                 // Tr(S (S+mu)^-1) / Tr(S^2 (S+mu)^-2)
  std::optional<double> target_ratio; // <b,(S+mu)^-1 b> / (mu <b,(S+mu)^-2 b>); empty for b = 0
};

inline AssumptionRatios assumption_ratios(const Spectrum& spec, const TargetCoefs& beta, double mu2) {
  detail::require(mu2 > 0.0, errc::invalid_parameter, "mu2 must be positive");
  AssumptionRatios out{};
  out.trace_ratio = weighted_trace(spec, 1, 1, mu2) / weighted_trace(spec, 2, 2, mu2);
  const double num = target_moment(spec, beta, 0, 1, mu2);
  const double den = mu2 * target_moment(spec, beta, 0, 2, mu2);
  if (den > 0.0) out.target_ratio = num / den;
  return out;
}

}  // namespace w2s
