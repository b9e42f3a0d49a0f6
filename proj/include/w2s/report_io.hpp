#pragma once

// Flat JSON view of deterministic-equivalent results.

#include <cmath>
#include <limits>

#include "json.hpp"
#include "w2s/det_equiv.hpp"

namespace w2s {

/// Keys mirror the JSON schema one-to-one. Student fields are NaN for a
/// teacher-only report and are omitted from its JSON.
struct EquivReport {
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

  double mu_t1 = kUnset, mu_t2 = kUnset;
  double mu_s1 = kUnset, mu_s2 = kUnset;
  double upsilon_t = kUnset, chi_t = kUnset;
  double upsilon_s = kUnset, chi_s = kUnset;
  double upsilon_t_lambda0 = kUnset, chi_t_lambda0 = kUnset;
  double bias_t = kUnset, var_t = kUnset, risk_t = kUnset;
  double bias_bias_s = kUnset, bias_var_s = kUnset, risk_s = kUnset;

  bool has_student() const { return !std::isnan(risk_s); }
  bool operator==(const EquivReport&) const = default;
};

inline EquivReport make_report(const TeacherEquiv& t) {
  EquivReport r;
  r.mu_t1 = t.fixed_point.mu1;
  r.mu_t2 = t.fixed_point.mu2;
  r.upsilon_t = t.upsilon_t;
  r.chi_t = t.chi_t;
  r.bias_t = t.bias;
  r.var_t = t.variance;
  r.risk_t = t.risk;
  return r;
}

inline EquivReport make_report(const StudentEquiv& s) {
  EquivReport r = make_report(s.teacher);
  r.mu_s1 = s.lambda0.fixed_point.mu1;
  r.mu_s2 = s.lambda0.fixed_point.mu2;
  r.upsilon_s = s.lambda0.upsilon_s;
  r.chi_s = s.lambda0.chi_s;
  r.upsilon_t_lambda0 = s.upsilon_t_lambda0;
  r.chi_t_lambda0 = s.chi_t_lambda0;
  r.bias_bias_s = s.bias_from_bias;
  r.bias_var_s = s.bias_from_var;
  r.risk_s = s.risk;
  return r;
}

#define W2S_REPORT_TEACHER_FIELDS(X) \
  X(mu_t1) X(mu_t2) X(upsilon_t) X(chi_t) X(bias_t) X(var_t) X(risk_t)
#define W2S_REPORT_STUDENT_FIELDS(X) \
  X(mu_s1) X(mu_s2) X(upsilon_s) X(chi_s) X(upsilon_t_lambda0) X(chi_t_lambda0) X(bias_bias_s) X(bias_var_s) X(risk_s)

inline void to_json(nlohmann::ordered_json& j, const EquivReport& r) {
  j = nlohmann::ordered_json::object();
#define W2S_PUT(name) j[#name] = r.name;
  W2S_REPORT_TEACHER_FIELDS(W2S_PUT)
  if (r.has_student()) {
    W2S_REPORT_STUDENT_FIELDS(W2S_PUT)
  }
#undef W2S_PUT
}

inline void from_json(const nlohmann::ordered_json& j, EquivReport& r) {
  r = EquivReport{};
#define W2S_GET(name) \
  if (j.contains(#name)) r.name = j.at(#name).get<double>();
  W2S_REPORT_TEACHER_FIELDS(W2S_GET)
  W2S_REPORT_STUDENT_FIELDS(W2S_GET)
#undef W2S_GET
}

}  // namespace w2s
