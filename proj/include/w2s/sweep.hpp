#pragma once

// n_t ladders: deterministic equivalents, optional Monte Carlo, and the
// theoretical decay lines, emitted as plot-ready CSV or JSON.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "w2s/config.hpp"
#include "w2s/det_equiv.hpp"
#include "w2s/report_io.hpp"
#include "w2s/scaling_laws.hpp"
#include "w2s/simulator.hpp"

namespace w2s {

/// "%.17g", empty for NaN.
inline std::string format_real(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct SweepSpec {
  RunConfig config;
  bool use_overrides = false;  // apply explicit sizes to the first ladder point only

  void validate() const {
    config.validate();
    detail::require(stable_check(config.scaling), errc::invalid_parameter, "unstable regularization scalings");
  }
  double nt_at(std::uint64_t i) const { return config.nt_start * std::pow(config.nt_factor, static_cast<double>(i)); }
};

/// Quantities emitted per ladder point, in row order.
inline const std::vector<std::string>& sweep_quantities() {
  static const std::vector<std::string> q = {"teacher_bias",          "teacher_variance",
                                             "teacher_risk",          "student_bias_from_bias",
                                             "student_bias_from_var", "student_risk"};
  return q;
}

struct SweepRow {
  std::uint64_t nt = 0, pt = 0, ns = 0, ps = 0, d = 0;
  double lambda_t = 0, lambda_s = 0;
  std::string quantity;
  double deterministic = 0;
  double theory = std::numeric_limits<double>::quiet_NaN();   // anchored at the first ladder point
  double minimax = std::numeric_limits<double>::quiet_NaN();  // same anchor, minimax exponent
  double empirical_mean = std::numeric_limits<double>::quiet_NaN();
  double empirical_se = std::numeric_limits<double>::quiet_NaN();
};

struct SweepPoint {
  Sizes sizes;
  std::uint64_t d = 0;
  EquivReport equiv;
  std::optional<MonteCarloSummary> mc;
};

struct SweepReport {
  ExponentReport exponents;
  OptimalExponents optimal{};
  std::vector<SweepPoint> points;
  std::vector<SweepRow> rows;
};

namespace detail {

inline double decay_line(double anchor, double nt0, double nt, double exponent) {
  return anchor * std::pow(nt / nt0, -exponent);
}

inline std::vector<SweepRow> rows_for(const SweepPoint& pt, const SweepPoint& first, const ExponentReport& ex,
                                      double minimax) {
  const auto& e = pt.equiv;
  const auto& e0 = first.equiv;
  const double values[] = {e.bias_t, e.var_t, e.risk_t, e.bias_bias_s, e.bias_var_s, e.risk_s};
  const double anchors[] = {e0.bias_t, e0.var_t, e0.risk_t, e0.bias_bias_s, e0.bias_var_s, e0.risk_s};
  const double exps[] = {ex.gamma_tB,     ex.gamma_tV,    ex.teacher_exponent,
                         ex.gamma_s_bias, ex.gamma_s_var, ex.student_exponent};
  const double nt0 = static_cast<double>(first.sizes.teacher.n);
  const double nt = static_cast<double>(pt.sizes.teacher.n);
  std::vector<SweepRow> rows;
  for (std::size_t q = 0; q < sweep_quantities().size(); ++q) {
    SweepRow r;
    r.nt = pt.sizes.teacher.n;
    r.pt = pt.sizes.teacher.p;
    r.lambda_t = pt.sizes.teacher.lambda;
    r.ns = pt.sizes.student.n;
    r.ps = pt.sizes.student.p;
    r.lambda_s = pt.sizes.student.lambda;
    r.d = pt.d;
    r.quantity = sweep_quantities()[q];
    r.deterministic = values[q];
    r.theory = decay_line(anchors[q], nt0, nt, exps[q]);
    r.minimax = decay_line(anchors[q], nt0, nt, minimax);
    if (pt.mc && q == 2) {
      r.empirical_mean = pt.mc->teacher.mean;
      r.empirical_se = pt.mc->teacher.se;
    }
    if (pt.mc && q == 5) {
      r.empirical_mean = pt.mc->student.mean;
      r.empirical_se = pt.mc->student.se;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace detail

/// Evaluates one ladder point. Monte Carlo runs when replicates >= 2.
inline SweepPoint evaluate_point(const RunConfig& c, const Sizes& z) {
  SweepPoint pt;
  pt.sizes = z;
  pt.d = resolve_dimension(c, z);
  const auto spec = make_power_law_spectrum(c.scaling.alpha, pt.d);
  const auto beta = make_power_law_target(c.scaling.alpha, c.scaling.r, pt.d);
  pt.equiv = make_report(student_equivalent(spec, beta, z.teacher, c.tau, z.student, c.tol));
  if (c.replicates >= 2) {
    ExperimentConfig ec{spec, beta};
    ec.nt = z.teacher.n;
    ec.pt = z.teacher.p;
    ec.lambda_t = z.teacher.lambda;
    ec.tau_t = c.tau;
    ec.ns = z.student.n;
    ec.ps = z.student.p;
    ec.lambda_s = z.student.lambda;
    ec.seed = c.seed;
    ec.replicates = c.replicates;
    pt.mc = monte_carlo(ec, c.threads);
  }
  return pt;
}

/// Fills `out` point by point, so a failure leaves the completed prefix in
/// place. `on_point` (optional) sees each completed point's rows in order.
inline void run_sweep(const SweepSpec& spec, SweepReport& out,
                      const std::function<void(const std::vector<SweepRow>&)>& on_point = {}) {
  spec.validate();
  const auto& c = spec.config;
  out = SweepReport{};
  out.exponents = classify_w2sg(c.scaling);
  out.optimal = optimal_exponents(c.scaling.alpha, c.scaling.r);
  for (std::uint64_t i = 0; i < c.nt_count; ++i) {
    const Sizes z = sizes_at(c, spec.nt_at(i), spec.use_overrides && i == 0);
    out.points.push_back(evaluate_point(c, z));
    auto rows = detail::rows_for(out.points.back(), out.points.front(), out.exponents, out.optimal.minimax);
    if (on_point) on_point(rows);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
}

inline SweepReport run_sweep(const SweepSpec& spec) {
  SweepReport r;
  run_sweep(spec, r);
  return r;
}

inline const char* sweep_csv_header() {
  return "nt,pt,lambda_t,ns,ps,lambda_s,d,quantity,deterministic,theory,minimax,empirical_mean,empirical_se";
}

inline void write_sweep_rows(std::ostream& os, const std::vector<SweepRow>& rows) {
  for (const auto& r : rows) {
    os << r.nt << ',' << r.pt << ',' << format_real(r.lambda_t) << ',' << r.ns << ',' << r.ps << ','
       << format_real(r.lambda_s) << ',' << r.d << ',' << r.quantity << ',' << format_real(r.deterministic) << ','
       << format_real(r.theory) << ',' << format_real(r.minimax) << ',' << format_real(r.empirical_mean) << ','
       << format_real(r.empirical_se) << '\n';
  }
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << sweep_csv_header() << '\n';
  write_sweep_rows(os, rows);
}

inline nlohmann::ordered_json sweep_json(const SweepReport& rep) {
  nlohmann::ordered_json j;
  j["teacher_exponent"] = rep.exponents.teacher_exponent;
  j["student_exponent"] = rep.exponents.student_exponent;
  j["minimax"] = rep.optimal.minimax;
  j["region"] = to_string(rep.exponents.region);
  j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : rep.points) {
    nlohmann::ordered_json e;
    e["nt"] = p.sizes.teacher.n;
    e["pt"] = p.sizes.teacher.p;
    e["lambda_t"] = p.sizes.teacher.lambda;
    e["ns"] = p.sizes.student.n;
    e["ps"] = p.sizes.student.p;
    e["lambda_s"] = p.sizes.student.lambda;
    e["d"] = p.d;
    nlohmann::ordered_json eq = p.equiv;
    e.update(eq);
    if (p.mc) {
      e["empirical_teacher_mean"] = p.mc->teacher.mean;
      e["empirical_teacher_se"] = p.mc->teacher.se;
      e["empirical_student_mean"] = p.mc->student.mean;
      e["empirical_student_se"] = p.mc->student.se;
    }
    j["points"].push_back(std::move(e));
  }
  return j;
}

enum class ReportFormat { csv, json };

/// Writes 17 significant digits; "-" as path means stdout.
inline void emit_report(const SweepReport& rep, ReportFormat fmt, const std::string& path, std::ostream& stdout_ = std::cout) {
  std::ofstream file;
  std::ostream* os = &stdout_;
  if (path != "-") {
    file.open(path);
    if (!file) throw error(errc::io_error, "cannot open '" + path + "' for writing");
    os = &file;
  }
  if (fmt == ReportFormat::csv) {
    write_sweep_csv(*os, rep.rows);
  } else {
    *os << sweep_json(rep).dump(2, ' ', false, nlohmann::ordered_json::error_handler_t::strict) << '\n';
  }
  os->flush();
  if (!*os) throw error(errc::io_error, "failed to write '" + path + "'");
}

inline const char* region_csv_header() {
  return "alpha,r,gamma_pt,gamma_lt,gamma_ns,gamma_ps,gamma_ls,tau_order,z_t,z_s,gamma_tB,gamma_tV,"
         "teacher_exponent,gamma_s_bias,gamma_s_var,student_exponent,branch,region,boundary,binding_witness";
}

inline void write_region_row(std::ostream& os, const ScalingParams& p, const ExponentReport& e) {
  const Witness* w = e.binding_witness();
  os << format_real(p.alpha) << ',' << format_real(p.r) << ',' << format_real(p.gamma_pt) << ','
     << format_real(p.gamma_lt) << ',' << format_real(p.gamma_ns) << ',' << format_real(p.gamma_ps) << ','
     << format_real(p.gamma_ls) << ',' << (p.tau_order == TauOrder::zero ? "zero" : "theta_one") << ','
     << format_real(e.z_t) << ',' << format_real(e.z_s) << ',' << format_real(e.gamma_tB) << ','
     << format_real(e.gamma_tV) << ',' << format_real(e.teacher_exponent) << ',' << format_real(e.gamma_s_bias)
     << ',' << format_real(e.gamma_s_var) << ',' << format_real(e.student_exponent) << ',' << to_string(e.branch)
     << ',' << to_string(e.region) << ',' << (e.boundary ? 1 : 0) << ',' << (w ? w->name : "") << '\n';
}

}  // namespace w2s
