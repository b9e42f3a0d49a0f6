#pragma once

// Flat key-value run configuration, read from a JSON object.
//
// Keys: alpha, r, gamma_pt, gamma_lt, gamma_ns, gamma_ps, gamma_ls, tau,
// nt_start, nt_factor, nt_count, replicates, seed, d, tail_tol, eta_star, tol.
// Optional explicit sizes (override the power-law rule at nt_start):
// nt, pt, lambda_t, ns, ps, lambda_s. Optional: threads.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "w2s/error.hpp"
#include "w2s/fixed_point.hpp"
#include "w2s/functionals.hpp"
#include "w2s/scaling_laws.hpp"
#include "w2s/spectrum.hpp"

namespace w2s {

inline constexpr double kDefaultTailTol = 1e-6;

struct RunConfig {
  ScalingParams scaling;
  double tau = 0.0;
  double nt_start = 1024;
  double nt_factor = 2;
  std::uint64_t nt_count = 8;
  std::uint64_t replicates = 20;
  std::uint64_t seed = 0;
  std::uint64_t d = 0;  // 0 selects default_truncation
  double tail_tol = kDefaultTailTol;
  double eta_star = kDefaultEtaStar;
  double tol = kDefaultFixedPointTol;
  unsigned threads = 1;

  std::optional<std::uint64_t> nt, pt, ns, ps;
  std::optional<double> lambda_t, lambda_s;

  void validate() const {
    scaling.validate();
    detail::require(tau >= 0.0 && std::isfinite(tau), errc::invalid_parameter, "tau must be non-negative");
    detail::require(nt_start >= 1.0, errc::invalid_parameter, "nt_start must be at least 1");
    detail::require(nt_factor > 1.0, errc::invalid_parameter, "nt_factor must exceed 1");
    detail::require(nt_count >= 1, errc::invalid_parameter, "nt_count must be at least 1");
    detail::require(tail_tol > 0.0 && tail_tol < 1.0, errc::invalid_parameter, "tail_tol must lie in (0, 1)");
    detail::require(eta_star > 0.0 && eta_star < 0.5, errc::invalid_parameter, "eta_star must lie in (0, 1/2)");
    detail::require(tol > 0.0 && tol <= 1e-6, errc::invalid_parameter, "tol must lie in (0, 1e-6]");
    detail::require(threads >= 1, errc::invalid_parameter, "threads must be at least 1");
    for (auto v : {nt, pt, ns, ps})
      detail::require(!v || *v >= 1, errc::invalid_parameter, "explicit sizes must be at least 1");
    for (auto v : {lambda_t, lambda_s})
      detail::require(!v || *v > 0.0, errc::invalid_parameter, "explicit lambdas must be positive");
  }
};

/// n_t^gamma rounded to the nearest integer, at least 1.
inline std::uint64_t power_count(double nt, double gamma) {
  const double v = std::round(std::pow(nt, gamma));
  detail::require(std::isfinite(v) && v < 1.8e19, errc::overflow, "size overflows 64 bits");
  return v < 1.0 ? 1 : static_cast<std::uint64_t>(v);
}

/// Concrete sizes at one teacher sample count.
struct Sizes {
  RidgeConfig teacher;
  RidgeConfig student;
};

/// Power-law sizes at n_t; explicit overrides win when `use_overrides` is set.
inline Sizes sizes_at(const RunConfig& c, double nt, bool use_overrides) {
  const auto& s = c.scaling;
  Sizes z;
  z.teacher.n = power_count(nt, 1.0);
  if (use_overrides && c.nt) z.teacher.n = *c.nt;
  const double ntr = static_cast<double>(z.teacher.n);
  z.teacher.p = power_count(ntr, s.gamma_pt);
  z.teacher.lambda = std::pow(ntr, -s.gamma_lt);
  z.student.n = power_count(ntr, s.gamma_ns);
  z.student.p = power_count(ntr, s.gamma_ps);
  z.student.lambda = std::pow(ntr, -s.gamma_ls);
  if (use_overrides) {
    if (c.pt) z.teacher.p = *c.pt;
    if (c.lambda_t) z.teacher.lambda = *c.lambda_t;
    if (c.ns) z.student.n = *c.ns;
    if (c.ps) z.student.p = *c.ps;
    if (c.lambda_s) z.student.lambda = *c.lambda_s;
  }
  return z;
}

/// Explicit d, or the default truncation for the larger of the two problems.
inline std::uint64_t resolve_dimension(const RunConfig& c, const Sizes& z) {
  if (c.d > 0) return c.d;
  const std::uint64_t n = std::max(z.teacher.n, z.student.n);
  const std::uint64_t p = std::max(z.teacher.p, z.student.p);
  return default_truncation(c.scaling.alpha, n, p, c.tail_tol);
}

namespace detail {

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    if (!j.at(key).is_number_unsigned())
      throw error(errc::invalid_parameter, std::string("config key '") + key + "' must be a non-negative integer");
  }
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::invalid_parameter, std::string("config key '") + key + "': " + e.what());
  }
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  T v{};
  read_key(j, key, v);
  out = v;
}

}  // namespace detail

/// Unknown keys are rejected so typos surface as config errors.
inline RunConfig parse_config(const nlohmann::json& j, RunConfig c = {}) {
  if (!j.is_object()) throw error(errc::invalid_parameter, "config must be a JSON object");
  static const std::set<std::string> known = {
      "alpha", "r", "gamma_pt", "gamma_lt", "gamma_ns", "gamma_ps", "gamma_ls", "tau",
      "nt_start", "nt_factor", "nt_count", "replicates", "seed", "d", "tail_tol", "eta_star",
      "tol", "threads", "nt", "pt", "lambda_t", "ns", "ps", "lambda_s"};
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (!known.count(k)) throw error(errc::invalid_parameter, "unknown config key '" + k + "'");
  }
  auto& s = c.scaling;
  detail::read_key(j, "alpha", s.alpha);
  detail::read_key(j, "r", s.r);
  detail::read_key(j, "gamma_pt", s.gamma_pt);
  detail::read_key(j, "gamma_lt", s.gamma_lt);
  detail::read_key(j, "gamma_ns", s.gamma_ns);
  detail::read_key(j, "gamma_ps", s.gamma_ps);
  detail::read_key(j, "gamma_ls", s.gamma_ls);
  detail::read_key(j, "tau", c.tau);
  detail::read_key(j, "nt_start", c.nt_start);
  detail::read_key(j, "nt_factor", c.nt_factor);
  detail::read_key(j, "nt_count", c.nt_count);
  detail::read_key(j, "replicates", c.replicates);
  detail::read_key(j, "seed", c.seed);
  detail::read_key(j, "d", c.d);
  detail::read_key(j, "tail_tol", c.tail_tol);
  detail::read_key(j, "eta_star", c.eta_star);
  detail::read_key(j, "tol", c.tol);
  detail::read_key(j, "threads", c.threads);
  detail::read_key(j, "nt", c.nt);
  detail::read_key(j, "pt", c.pt);
  detail::read_key(j, "ns", c.ns);
  detail::read_key(j, "ps", c.ps);
  detail::read_key(j, "lambda_t", c.lambda_t);
  detail::read_key(j, "lambda_s", c.lambda_s);
  s.tau_order = c.tau > 0.0 ? TauOrder::theta_one : TauOrder::zero;
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error(errc::io_error, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw error(errc::invalid_parameter, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace w2s
