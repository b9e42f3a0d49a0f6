#pragma once

#include <stdexcept>
#include <string>

namespace w2s {

/// Failure categories surfaced by the library. The CLI maps these to exit codes.
enum class errc {
  invalid_parameter,
  dimension_mismatch,
  overflow,
  no_convergence,
  degenerate_denominator,
  upsilon_ge_one,
  psd_violation,
  factorization_failure,
  io_error,
};

inline const char* to_string(errc c) noexcept {
  switch (c) {
    case errc::invalid_parameter: return "invalid-parameter";
    case errc::dimension_mismatch: return "dimension-mismatch";
    case errc::overflow: return "overflow";
    case errc::no_convergence: return "no-convergence";
    case errc::degenerate_denominator: return "degenerate-denominator";
    case errc::upsilon_ge_one: return "upsilon-ge-one";
    case errc::psd_violation: return "psd-violation";
    case errc::factorization_failure: return "factorization-failure";
    case errc::io_error: return "io-error";
  }
  return "unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

namespace detail {

inline void require(bool ok, errc code, const char* what) {
  if (!ok) throw error(code, what);
}

}  // namespace detail
}  // namespace w2s
