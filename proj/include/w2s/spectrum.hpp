#pragma once

// Truncated diagonal spectra, target coefficients and the trace sums that
// every deterministic-equivalent formula reduces to when the feature
// covariance is diagonal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "w2s/error.hpp"
#include "w2s/summation.hpp"

namespace w2s {

/// Non-increasing positive eigenvalues xi^2_1 >= ... >= xi^2_d > 0.
class Spectrum {
 public:
  explicit Spectrum(std::vector<double> eigenvalues) : eig_(std::move(eigenvalues)) {
    detail::require(!eig_.empty(), errc::invalid_parameter, "spectrum must be non-empty");
    for (std::size_t k = 0; k < eig_.size(); ++k) {
      detail::require(std::isfinite(eig_[k]) && eig_[k] > 0.0, errc::invalid_parameter,
                      "eigenvalues must be positive and finite");
      detail::require(k == 0 || eig_[k] <= eig_[k - 1], errc::invalid_parameter,
                      "eigenvalues must be non-increasing");
    }
    CompensatedSum s;
    for (double x : eig_) s += x;
    trace_ = s.value();
  }

  std::size_t size() const noexcept { return eig_.size(); }
  double operator[](std::size_t k) const noexcept { return eig_[k]; }
  std::span<const double> values() const noexcept { return eig_; }
  double trace() const noexcept { return trace_; }

  /// Spectrum of c * Sigma.
  Spectrum scaled(double c) const {
    detail::require(c > 0.0, errc::invalid_parameter, "scale must be positive");
    std::vector<double> v(eig_);
    for (double& x : v) x *= c;
    return Spectrum(std::move(v));
  }

 private:
  std::vector<double> eig_;
  double trace_ = 0.0;
};

/// Target coefficients beta_* in the eigenbasis.
class TargetCoefs {
 public:
  explicit TargetCoefs(std::vector<double> coefs) : coef_(std::move(coefs)) {
    CompensatedSum s;
    for (double b : coef_) {
      detail::require(std::isfinite(b), errc::invalid_parameter, "target coefficients must be finite");
      s += b * b;
    }
    norm_ = std::sqrt(s.value());
  }

  std::size_t size() const noexcept { return coef_.size(); }
  double operator[](std::size_t k) const noexcept { return coef_[k]; }
  std::span<const double> values() const noexcept { return coef_; }
  double norm() const noexcept { return norm_; }

 private:
  std::vector<double> coef_;
  double norm_ = 0.0;
};

/// Diagonal operator; every operator built by the library (I, Lambda_t,
/// Lambda_0, Lambda) is diagonal in the eigenbasis of Sigma.
class DiagOperator {
 public:
  DiagOperator() = default;
  explicit DiagOperator(std::vector<double> entries) : a_(std::move(entries)) {}

  static DiagOperator identity(std::size_t d) { return DiagOperator(std::vector<double>(d, 1.0)); }
  static DiagOperator zero(std::size_t d) { return DiagOperator(std::vector<double>(d, 0.0)); }

  std::size_t size() const noexcept { return a_.size(); }
  double operator[](std::size_t k) const noexcept { return a_[k]; }
  double& operator[](std::size_t k) noexcept { return a_[k]; }
  std::span<const double> entries() const noexcept { return a_; }

  double max_entry() const noexcept {
    return a_.empty() ? 0.0 : *std::max_element(a_.begin(), a_.end());
  }
  double min_entry() const noexcept {
    return a_.empty() ? 0.0 : *std::min_element(a_.begin(), a_.end());
  }

  friend DiagOperator operator+(DiagOperator lhs, const DiagOperator& rhs) {
    detail::require(lhs.size() == rhs.size(), errc::dimension_mismatch, "operator sizes differ");
    for (std::size_t k = 0; k < lhs.size(); ++k) lhs.a_[k] += rhs.a_[k];
    return lhs;
  }
  friend DiagOperator operator*(double c, DiagOperator op) {
    for (double& x : op.a_) x *= c;
    return op;
  }

 private:
  std::vector<double> a_;
};

namespace detail {

inline double ipow(double x, int e) noexcept {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

inline void require_trace_args(int a, int b, double mu) {
  require(a >= 0 && b >= 0, errc::invalid_parameter, "trace exponents must be non-negative");
  require(mu > 0.0 && std::isfinite(mu), errc::invalid_parameter, "mu must be positive");
}

}  // namespace detail

/// xi^2_k = k^(-alpha), k = 1..d.
inline Spectrum make_power_law_spectrum(double alpha, std::size_t d) {
  detail::require(alpha > 1.0, errc::invalid_parameter, "alpha must exceed 1");
  detail::require(d >= 1, errc::invalid_parameter, "d must be at least 1");
  std::vector<double> v(d);
  for (std::size_t k = 0; k < d; ++k) v[k] = std::pow(static_cast<double>(k + 1), -alpha);
  return Spectrum(std::move(v));
}

/// beta_{*,k} = k^(-(1 + 2 alpha r) / 2), k = 1..d.
inline TargetCoefs make_power_law_target(double alpha, double r, std::size_t d) {
  detail::require(alpha > 1.0, errc::invalid_parameter, "alpha must exceed 1");
  detail::require(r > 0.0, errc::invalid_parameter, "r must be positive");
  detail::require(d >= 1, errc::invalid_parameter, "d must be at least 1");
  const double e = -(1.0 + 2.0 * alpha * r) / 2.0;
  std::vector<double> v(d);
  for (std::size_t k = 0; k < d; ++k) v[k] = std::pow(static_cast<double>(k + 1), e);
  return TargetCoefs(std::move(v));
}

/// sum_{k > d} k^(-alpha). Direct summation up to k = 63, Euler-Maclaurin
/// beyond (truncation error below 1e-20 relative for alpha > 1).
inline double power_law_tail(double alpha, std::uint64_t d) {
  detail::require(alpha > 1.0, errc::invalid_parameter, "alpha must exceed 1");
  constexpr std::uint64_t kSwitch = 64;
  CompensatedSum s;
  std::uint64_t k = d + 1;
  for (; k < kSwitch; ++k) s += std::pow(static_cast<double>(k), -alpha);
  const double n = static_cast<double>(k);
  const double a = alpha;
  const double fn = std::pow(n, -a);
  s += n * fn / (a - 1.0);
  s += 0.5 * fn;
  s += a * fn / n / 12.0;
  s += -a * (a + 1.0) * (a + 2.0) * fn / (n * n * n) / 720.0;
  s += a * (a + 1.0) * (a + 2.0) * (a + 3.0) * (a + 4.0) * fn / (n * n * n * n * n) / 30240.0;
  return s.value();
}

inline constexpr std::uint64_t kDefaultTruncationCap = std::uint64_t{1} << 24;

/// Smallest d with tail(d) <= tail_tol * zeta(alpha), raised to the floor
/// 10 * max(n, p)^(1/alpha). Throws overflow past `cap`.
inline std::uint64_t default_truncation(double alpha, std::uint64_t n, std::uint64_t p, double tail_tol,
                                        std::uint64_t cap = kDefaultTruncationCap) {
  detail::require(alpha > 1.0, errc::invalid_parameter, "alpha must exceed 1");
  detail::require(tail_tol > 0.0 && tail_tol < 1.0, errc::invalid_parameter, "tail_tol must lie in (0, 1)");
  detail::require(n >= 1 && p >= 1, errc::invalid_parameter, "n and p must be at least 1");

  const double target = tail_tol * power_law_tail(alpha, 0);
  const auto ok = [&](std::uint64_t d) { return power_law_tail(alpha, d) <= target; };

  std::uint64_t hi = 1;
  while (!ok(hi)) {
    if (hi > cap) throw error(errc::overflow, "truncation dimension exceeds cap");
    hi *= 2;
  }
  std::uint64_t lo = hi / 2;  // !ok(lo) unless lo == 0
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  const double floor_real = 10.0 * std::pow(static_cast<double>(std::max(n, p)), 1.0 / alpha);
  const auto floor_d = static_cast<std::uint64_t>(std::ceil(floor_real - 1e-9));
  const std::uint64_t d = std::max({hi, floor_d, std::uint64_t{1}});
  if (d > cap) throw error(errc::overflow, "truncation dimension exceeds cap");
  return d;
}

/// Tr(A Sigma^a (Sigma + mu)^(-b)) = sum_k a_k xi_k^(2a) / (xi^2_k + mu)^b.
inline double weighted_trace(const Spectrum& spec, const DiagOperator& A, int a, int b, double mu) {
  detail::require(A.size() == spec.size(), errc::dimension_mismatch, "operator size differs from spectrum");
  detail::require_trace_args(a, b, mu);
  CompensatedSum s;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double x = spec[k];
    s += A[k] * detail::ipow(x, a) / detail::ipow(x + mu, b);
  }
  return s.value();
}

/// Same as above with A = I.
inline double weighted_trace(const Spectrum& spec, int a, int b, double mu) {
  detail::require_trace_args(a, b, mu);
  CompensatedSum s;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double x = spec[k];
    s += detail::ipow(x, a) / detail::ipow(x + mu, b);
  }
  return s.value();
}

/// sum_k beta_k^2 d_k
inline double quadratic_form(const TargetCoefs& beta, const DiagOperator& D) {
  detail::require(beta.size() == D.size(), errc::dimension_mismatch, "target and operator sizes differ");
  CompensatedSum s;
  for (std::size_t k = 0; k < D.size(); ++k) s += beta[k] * beta[k] * D[k];
  return s.value();
}

/// <beta, Sigma^a (Sigma + mu)^(-b) beta>
inline double target_moment(const Spectrum& spec, const TargetCoefs& beta, int a, int b, double mu) {
  detail::require(beta.size() == spec.size(), errc::dimension_mismatch, "target and spectrum sizes differ");
  detail::require_trace_args(a, b, mu);
  CompensatedSum s;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double x = spec[k];
    s += beta[k] * beta[k] * detail::ipow(x, a) / detail::ipow(x + mu, b);
  }
  return s.value();
}

/// Debug dump: columns k, xi2, beta (k is 1-based).
inline void write_spectrum_csv(std::ostream& os, const Spectrum& spec, const TargetCoefs& beta) {
  detail::require(beta.size() == spec.size(), errc::dimension_mismatch, "target and spectrum sizes differ");
  const auto old = os.precision(17);
  os << "k,xi2,beta\n";
  for (std::size_t k = 0; k < spec.size(); ++k) os << (k + 1) << ',' << spec[k] << ',' << beta[k] << '\n';
  os.precision(old);
}

}  // namespace w2s
