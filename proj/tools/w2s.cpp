// w2s: command-line front end for fixed points, deterministic equivalents,
// Monte-Carlo runs, n_t sweeps and weak-to-strong region maps.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "w2s/config.hpp"
#include "w2s/det_equiv.hpp"
#include "w2s/functionals.hpp"
#include "w2s/report_io.hpp"
#include "w2s/simulator.hpp"
#include "w2s/sweep.hpp"

namespace {

using namespace w2s;
using ojson = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int exit_code(errc c) {
  switch (c) {
    case errc::invalid_parameter:
    case errc::dimension_mismatch: return kExitConfig;
    case errc::io_error: return kExitIo;
    default: return kExitNumerical;
  }
}

/// Every config key as a flag; only flags actually given override the file.
struct Overrides {
  std::string config_path;
  std::vector<std::function<void(RunConfig&)>> setters;

  template <class T, class Apply>
  void add(CLI::App& app, const std::string& flag, const std::string& help, Apply apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app.add_option(flag, *value, help);
    setters.push_back([value, opt, apply](RunConfig& c) {
      if (opt->count() > 0) apply(c, *value);
    });
  }

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file (flat object of the keys below)");
    add<double>(app, "--alpha", "capacity exponent, > 1", [](RunConfig& c, double v) { c.scaling.alpha = v; });
    add<double>(app, "--r", "source exponent, > 0", [](RunConfig& c, double v) { c.scaling.r = v; });
    add<double>(app, "--gamma-pt", "p_t = n_t^gamma_pt", [](RunConfig& c, double v) { c.scaling.gamma_pt = v; });
    add<double>(app, "--gamma-lt", "lambda_t = n_t^-gamma_lt", [](RunConfig& c, double v) { c.scaling.gamma_lt = v; });
    add<double>(app, "--gamma-ns", "n_s = n_t^gamma_ns", [](RunConfig& c, double v) { c.scaling.gamma_ns = v; });
    add<double>(app, "--gamma-ps", "p_s = n_t^gamma_ps", [](RunConfig& c, double v) { c.scaling.gamma_ps = v; });
    add<double>(app, "--gamma-ls", "lambda_s = n_t^-gamma_ls", [](RunConfig& c, double v) { c.scaling.gamma_ls = v; });
    add<double>(app, "--tau", "teacher label noise std (0 selects the noiseless order)",
                [](RunConfig& c, double v) { c.tau = v; });
    add<double>(app, "--nt-start", "first n_t of the ladder", [](RunConfig& c, double v) { c.nt_start = v; });
    add<double>(app, "--nt-factor", "geometric ladder factor, > 1", [](RunConfig& c, double v) { c.nt_factor = v; });
    add<std::uint64_t>(app, "--nt-count", "ladder length", [](RunConfig& c, std::uint64_t v) { c.nt_count = v; });
    add<std::uint64_t>(app, "--replicates", "Monte-Carlo replicates (< 2 disables simulation in sweeps)",
                       [](RunConfig& c, std::uint64_t v) { c.replicates = v; });
    add<std::uint64_t>(app, "--seed", "64-bit base seed", [](RunConfig& c, std::uint64_t v) { c.seed = v; });
    add<std::uint64_t>(app, "--d", "spectrum truncation (0 = automatic)", [](RunConfig& c, std::uint64_t v) { c.d = v; });
    add<double>(app, "--tail-tol", "relative tail mass for the automatic truncation",
                [](RunConfig& c, double v) { c.tail_tol = v; });
    add<double>(app, "--eta-star", "eta_* in (0, 1/2) for diagnostics", [](RunConfig& c, double v) { c.eta_star = v; });
    add<double>(app, "--tol", "fixed-point tolerance in (0, 1e-6]", [](RunConfig& c, double v) { c.tol = v; });
    add<unsigned>(app, "--threads", "replicate worker threads", [](RunConfig& c, unsigned v) { c.threads = v; });
    add<std::uint64_t>(app, "--nt", "explicit teacher samples", [](RunConfig& c, std::uint64_t v) { c.nt = v; });
    add<std::uint64_t>(app, "--pt", "explicit teacher width", [](RunConfig& c, std::uint64_t v) { c.pt = v; });
    add<double>(app, "--lambda-t", "explicit teacher ridge", [](RunConfig& c, double v) { c.lambda_t = v; });
    add<std::uint64_t>(app, "--ns", "explicit student samples", [](RunConfig& c, std::uint64_t v) { c.ns = v; });
    add<std::uint64_t>(app, "--ps", "explicit student width", [](RunConfig& c, std::uint64_t v) { c.ps = v; });
    add<double>(app, "--lambda-s", "explicit student ridge", [](RunConfig& c, double v) { c.lambda_s = v; });
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& s : setters) s(c);
    c.scaling.tau_order = c.tau > 0.0 ? TauOrder::theta_one : TauOrder::zero;
    c.validate();
    return c;
  }
};

struct Output {
  std::string path = "-";
  std::string format = "csv";

  void attach(CLI::App& app, bool with_format = true) {
    app.add_option("-o,--out", path, "output file ('-' for stdout)");
    if (with_format) app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  }
  bool json() const { return format == "json"; }
};

/// Writes through `body` to the chosen path; io failures become io-error.
void write_output(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path == "-") {
    body(std::cout);
    std::cout.flush();
    if (!std::cout) throw error(errc::io_error, "failed to write stdout");
    return;
  }
  std::ofstream f(path);
  if (!f) throw error(errc::io_error, "cannot open '" + path + "' for writing");
  body(f);
  f.flush();
  if (!f) throw error(errc::io_error, "failed to write '" + path + "'");
}

struct Problem {
  Sizes sizes;
  std::uint64_t d;
  Spectrum spec;
  TargetCoefs beta;
};

Problem first_point(const RunConfig& c) {
  const Sizes z = sizes_at(c, c.nt_start, true);
  const std::uint64_t d = resolve_dimension(c, z);
  return {z, d, make_power_law_spectrum(c.scaling.alpha, d), make_power_law_target(c.scaling.alpha, c.scaling.r, d)};
}

void csv_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
  os << '\n';
}

std::string u(std::uint64_t v) { return std::to_string(v); }

// fixed-point -------------------------------------------------------------

const char* kFixedPointColumns = "role,n,p,lambda,d,mu1,mu2,t1,residual1,residual2";

void cmd_fixed_point(const RunConfig& c, const Output& out) {
  const Problem pb = first_point(c);
  ojson j = ojson::array();
  std::vector<std::vector<std::string>> rows;
  for (auto [role, cfg] : {std::pair{"teacher", pb.sizes.teacher}, std::pair{"student", pb.sizes.student}}) {
    const FixedPoint fp = solve_fixed_point(pb.spec, cfg, c.tol);
    const auto res = fixed_point_residuals(pb.spec, cfg, fp.mu1, fp.mu2);
    rows.push_back({role, u(cfg.n), u(cfg.p), format_real(cfg.lambda), u(pb.d), format_real(fp.mu1),
                    format_real(fp.mu2), format_real(fp.t1), format_real(res.relative1()),
                    format_real(res.relative2())});
    j.push_back({{"role", role}, {"n", cfg.n}, {"p", cfg.p}, {"lambda", cfg.lambda}, {"d", pb.d},
                 {"mu1", fp.mu1}, {"mu2", fp.mu2}, {"t1", fp.t1}, {"residual1", res.relative1()},
                 {"residual2", res.relative2()}});
  }
  write_output(out.path, [&](std::ostream& os) {
    if (out.json()) {
      os << j.dump(2) << '\n';
      return;
    }
    os << kFixedPointColumns << '\n';
    for (const auto& r : rows) csv_line(os, r);
  });
}

// equiv -------------------------------------------------------------------

void cmd_equiv(const RunConfig& c, const std::string& which, const Output& out) {
  const Problem pb = first_point(c);
  const EquivReport rep =
      which == "teacher"
          ? make_report(teacher_equivalent(pb.spec, pb.beta, pb.sizes.teacher, c.tau, c.tol))
          : make_report(student_equivalent(pb.spec, pb.beta, pb.sizes.teacher, c.tau, pb.sizes.student, c.tol));
  const ojson j = rep;
  write_output(out.path, [&](std::ostream& os) {
    if (out.json()) {
      os << j.dump(2) << '\n';
      return;
    }
    std::vector<std::string> keys, vals;
    for (const auto& [k, v] : j.items()) {
      keys.push_back(k);
      vals.push_back(format_real(v.get<double>()));
    }
    csv_line(os, keys);
    csv_line(os, vals);
  });
}

// simulate ----------------------------------------------------------------

const char* kSimulateColumns = "quantity,mean,sd,se,count,deterministic";

void cmd_simulate(const RunConfig& c, const Output& out, const std::string& log_path) {
  const Problem pb = first_point(c);
  ExperimentConfig ec{pb.spec, pb.beta};
  ec.nt = pb.sizes.teacher.n;
  ec.pt = pb.sizes.teacher.p;
  ec.lambda_t = pb.sizes.teacher.lambda;
  ec.tau_t = c.tau;
  ec.ns = pb.sizes.student.n;
  ec.ps = pb.sizes.student.p;
  ec.lambda_s = pb.sizes.student.lambda;
  ec.seed = c.seed;
  ec.replicates = c.replicates;
  const MonteCarloSummary mc = monte_carlo(ec, c.threads);
  const StudentEquiv eq = student_equivalent(pb.spec, pb.beta, pb.sizes.teacher, c.tau, pb.sizes.student, c.tol);

  if (!log_path.empty()) write_output(log_path, [&](std::ostream& os) { write_run_log(os, mc.runs); });
  write_output(out.path, [&](std::ostream& os) {
    const std::pair<const char*, const SampleStats*> items[] = {{"teacher_error", &mc.teacher},
                                                                {"student_error", &mc.student}};
    const double det[] = {eq.teacher.risk, eq.risk};
    if (out.json()) {
      ojson j;
      for (int i = 0; i < 2; ++i) {
        const auto& s = *items[i].second;
        j[items[i].first] = {{"mean", s.mean}, {"sd", s.sd}, {"se", s.se}, {"count", s.count},
                             {"deterministic", det[i]}};
      }
      os << j.dump(2) << '\n';
      return;
    }
    os << kSimulateColumns << '\n';
    for (int i = 0; i < 2; ++i) {
      const auto& s = *items[i].second;
      csv_line(os, {items[i].first, format_real(s.mean), format_real(s.sd), format_real(s.se), u(s.count),
                    format_real(det[i])});
    }
  });
}

// sweep -------------------------------------------------------------------

int cmd_sweep(const RunConfig& c, const Output& out) {
  SweepSpec spec{c, true};
  SweepReport rep;
  try {
    run_sweep(spec, rep);
  } catch (const error&) {
    // Flush the completed prefix before reporting the failure.
    if (!rep.rows.empty()) emit_report(rep, out.json() ? ReportFormat::json : ReportFormat::csv, out.path);
    throw;
  }
  emit_report(rep, out.json() ? ReportFormat::json : ReportFormat::csv, out.path);
  return kExitOk;
}

// regions -----------------------------------------------------------------

struct Axis {
  std::string key;
  double start = 0, stop = 0;
  std::uint64_t count = 1;
  double at(std::uint64_t i) const {
    return count == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
};

Axis parse_axis(const std::string& s) {
  // key=start:stop:count
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw error(errc::invalid_parameter, "--vary expects key=start:stop:count");
  Axis a;
  a.key = s.substr(0, eq);
  std::stringstream ss(s.substr(eq + 1));
  char c1 = 0, c2 = 0;
  if (!(ss >> a.start >> c1 >> a.stop >> c2 >> a.count) || c1 != ':' || c2 != ':' || a.count < 1 || !ss.eof())
    throw error(errc::invalid_parameter, "--vary expects key=start:stop:count");
  return a;
}

double* scaling_field(ScalingParams& p, const std::string& key) {
  if (key == "alpha") return &p.alpha;
  if (key == "r") return &p.r;
  if (key == "gamma_pt") return &p.gamma_pt;
  if (key == "gamma_lt") return &p.gamma_lt;
  if (key == "gamma_ns") return &p.gamma_ns;
  if (key == "gamma_ps") return &p.gamma_ps;
  if (key == "gamma_ls") return &p.gamma_ls;
  throw error(errc::invalid_parameter, "cannot vary '" + key + "'");
}

void cmd_regions(const RunConfig& c, const std::vector<std::string>& vary, const Output& out) {
  if (vary.size() > 2) throw error(errc::invalid_parameter, "at most two --vary axes");
  std::vector<Axis> axes;
  for (const auto& v : vary) axes.push_back(parse_axis(v));
  while (axes.size() < 2) axes.push_back(Axis{"", 0, 0, 1});
  for (auto& a : axes)
    if (!a.key.empty()) {
      ScalingParams probe = c.scaling;
      scaling_field(probe, a.key);
    }

  write_output(out.path, [&](std::ostream& os) {
    os << region_csv_header() << '\n';
    for (std::uint64_t i = 0; i < axes[0].count; ++i) {
      for (std::uint64_t k = 0; k < axes[1].count; ++k) {
        ScalingParams p = c.scaling;
        if (!axes[0].key.empty()) *scaling_field(p, axes[0].key) = axes[0].at(i);
        if (!axes[1].key.empty()) *scaling_field(p, axes[1].key) = axes[1].at(k);
        p.validate();
        ExponentReport e = stable_check(p) ? classify_w2sg(p) : exponent_report(p);
        write_region_row(os, p, e);
      }
    }
  });
}

// diagnostics -------------------------------------------------------------

const char* kDiagnosticsColumns =
    "role,n,p,lambda,d,eta_star,n_star,p_star,r_sigma_n_star,r_sigma_p_star,m_sigma_n,m_sigma_p,rho,rho_tilde,"
    "approx_rate,trace_ratio,target_ratio";

void cmd_diagnostics(const RunConfig& c, const Output& out) {
  const Problem pb = first_point(c);
  ojson j = ojson::array();
  std::vector<std::vector<std::string>> rows;
  for (auto [role, cfg] : {std::pair{"teacher", pb.sizes.teacher}, std::pair{"student", pb.sizes.student}}) {
    const FixedPoint fp = solve_fixed_point(pb.spec, cfg, c.tol);
    const Diagnostics dg = rho_diagnostics(pb.spec, cfg.n, cfg.p, cfg.lambda, c.eta_star, fp);
    const AssumptionRatios ar = assumption_ratios(pb.spec, pb.beta, fp.mu2);
    const double target = ar.target_ratio.value_or(std::nan(""));
    rows.push_back({role, u(cfg.n), u(cfg.p), format_real(cfg.lambda), u(pb.d), format_real(dg.eta_star),
                    u(dg.n_star), u(dg.p_star), format_real(dg.r_sigma_n_star), format_real(dg.r_sigma_p_star),
                    format_real(dg.m_sigma_n), format_real(dg.m_sigma_p), format_real(dg.rho),
                    format_real(dg.rho_tilde), format_real(dg.approx_rate), format_real(ar.trace_ratio),
                    format_real(target)});
    ojson o = {{"role", role},
               {"n", cfg.n},
               {"p", cfg.p},
               {"lambda", cfg.lambda},
               {"d", pb.d},
               {"eta_star", dg.eta_star},
               {"n_star", dg.n_star},
               {"p_star", dg.p_star},
               {"r_sigma_n_star", dg.r_sigma_n_star},
               {"r_sigma_p_star", dg.r_sigma_p_star},
               {"m_sigma_n", dg.m_sigma_n},
               {"m_sigma_p", dg.m_sigma_p},
               {"rho", dg.rho},
               {"rho_tilde", dg.rho_tilde},
               {"approx_rate", dg.approx_rate},
               {"trace_ratio", ar.trace_ratio}};
    o["target_ratio"] = ar.target_ratio ? ojson(*ar.target_ratio) : ojson(nullptr);
    j.push_back(std::move(o));
  }
  write_output(out.path, [&](std::ostream& os) {
    if (out.json()) {
      os << j.dump(2) << '\n';
      return;
    }
    os << kDiagnosticsColumns << '\n';
    for (const auto& r : rows) csv_line(os, r);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-to-strong random-feature ridge regression: deterministic equivalents, Monte Carlo, scaling laws"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 2 config or usage error, 3 numerical failure (no convergence, Upsilon >= 1, ...), "
      "4 io error.\nSingle-point commands use the first ladder point (nt_start, or the explicit --nt/--pt/... "
      "sizes).");

  Overrides ov_fp, ov_eq, ov_sim, ov_sw, ov_rg, ov_dg;
  Output out_fp, out_eq, out_sim, out_sw, out_rg, out_dg;

  auto* fp = app.add_subcommand("fixed-point", "solve the teacher and student self-consistency equations");
  ov_fp.attach(*fp);
  out_fp.attach(*fp);
  fp->footer(std::string("CSV columns: ") + kFixedPointColumns + "\n  residual1/2 are relative residuals.");

  std::string which = "student";
  auto* eq = app.add_subcommand("equiv", "deterministic equivalent of the teacher or student excess error");
  eq->add_option("which", which, "teacher or student")->check(CLI::IsMember({"teacher", "student"}));
  ov_eq.attach(*eq);
  out_eq.attach(*eq);
  eq->footer(
      "CSV columns (teacher): mu_t1,mu_t2,upsilon_t,chi_t,bias_t,var_t,risk_t\n"
      "CSV columns (student): teacher columns then mu_s1,mu_s2,upsilon_s,chi_s,upsilon_t_lambda0,chi_t_lambda0,"
      "bias_bias_s,bias_var_s,risk_s\nJSON uses the same flat keys.");

  std::string log_path;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo teacher/student runs at one size");
  ov_sim.attach(*sim);
  out_sim.attach(*sim);
  sim->add_option("--log", log_path, "per-run CSV log");
  sim->footer(std::string("CSV columns: ") + kSimulateColumns +
              "\nRun log columns: replicate,seed,teacher_error,student_error,beta_t_norm,beta_gap_norm");

  auto* sw = app.add_subcommand("sweep", "n_t ladder of deterministic equivalents, optional Monte Carlo");
  ov_sw.attach(*sw);
  out_sw.attach(*sw);
  sw->footer(std::string("CSV columns: ") + sweep_csv_header() +
             "\n  quantity: teacher_bias, teacher_variance, teacher_risk, student_bias_from_bias,"
             " student_bias_from_var, student_risk\n  theory/minimax: decay lines anchored at the first point;"
             " empirical_*: Monte Carlo (risk rows, replicates >= 2)");

  std::vector<std::string> vary;
  auto* rg = app.add_subcommand("regions", "exponents and weak-to-strong region over a parameter grid");
  ov_rg.attach(*rg);
  out_rg.attach(*rg, false);
  rg->add_option("--vary", vary, "grid axis key=start:stop:count over alpha, r or gamma_* (up to two)");
  rg->footer(std::string("CSV columns: ") + region_csv_header() +
             "\n  unstable tuples get exponents only (region none).");

  auto* dg = app.add_subcommand("diagnostics", "spectrum regularity and approximation-rate diagnostics");
  ov_dg.attach(*dg);
  out_dg.attach(*dg);
  dg->footer(std::string("CSV columns: ") + kDiagnosticsColumns +
             "\n  approx_rate uses C1 = 1 (the guarantees' constants are not constructive).");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*fp) cmd_fixed_point(ov_fp.resolve(), out_fp);
    if (*eq) cmd_equiv(ov_eq.resolve(), which, out_eq);
    if (*sim) cmd_simulate(ov_sim.resolve(), out_sim, log_path);
    if (*sw) return cmd_sweep(ov_sw.resolve(), out_sw);
    if (*rg) cmd_regions(ov_rg.resolve(), vary, out_rg);
    if (*dg) cmd_diagnostics(ov_dg.resolve(), out_dg);
  } catch (const error& e) {
    std::cerr << "w2s: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "w2s: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
