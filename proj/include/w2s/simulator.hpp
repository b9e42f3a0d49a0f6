#pragma once

// Seeded Monte-Carlo of the two-stage random-feature ridge pipeline on the
// Gaussian linear model x = g ~ N(0, I_d), features f ~ N(0, Sigma).

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include "w2s/error.hpp"
#include "w2s/spectrum.hpp"
#include "w2s/summation.hpp"

namespace w2s {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest number of entries allowed in any one sampled matrix (1 GiB of doubles).
inline constexpr std::uint64_t kMaxMatrixEntries = std::uint64_t{1} << 27;

/// One generator stream per replicate, seeded from the 64-bit replicate seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    eng_.seed(seq);
  }
  double normal() { return normal_(eng_); }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_;
};

struct Design {
  Matrix G;  // n x d, i.i.d. N(0, 1)
  Matrix F;  // p x d, F_jk = xi_k z_jk
};

namespace detail {

inline void require_alloc(std::uint64_t rows, std::uint64_t cols) {
  require(rows >= 1 && cols >= 1, errc::invalid_parameter, "matrix dimensions must be at least 1");
  require(rows <= kMaxMatrixEntries / cols, errc::overflow, "matrix exceeds allocation cap");
}

inline Matrix standard_normal(std::uint64_t rows, std::uint64_t cols, Rng& rng) {
  require_alloc(rows, cols);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = rng.normal();
  return m;
}

}  // namespace detail

/// Draws G then F, each filled row by row.
inline Design sample_design(const Spectrum& spec, std::uint64_t n, std::uint64_t p, Rng& rng) {
  const std::uint64_t d = spec.size();
  detail::require_alloc(n, d);
  detail::require_alloc(p, d);
  Design out;
  out.G = detail::standard_normal(n, d, rng);
  out.F = detail::standard_normal(p, d, rng);
  for (Eigen::Index k = 0; k < out.F.cols(); ++k) out.F.col(k) *= std::sqrt(spec[static_cast<std::size_t>(k)]);
  return out;
}

/// Z = G F^T / sqrt(p)
inline Matrix feature_matrix(const Design& des) {
  return (des.G * des.F.transpose()) / std::sqrt(static_cast<double>(des.F.rows()));
}

namespace detail {

inline void require_ridge_args(const Matrix& Z, const Vector& y, double lambda) {
  require(Z.rows() == y.size(), errc::dimension_mismatch, "Z rows differ from y length");
  require(lambda > 0.0 && std::isfinite(lambda), errc::invalid_parameter, "lambda must be positive");
}

inline Vector llt_solve(const Matrix& A, const Vector& b) {
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw error(errc::factorization_failure, "Gram matrix is not positive definite");
  Vector x = llt.solve(b);
  // LLT does not flag NaN pivots.
  if (!x.allFinite()) throw error(errc::factorization_failure, "non-finite ridge solution");
  return x;
}

}  // namespace detail

/// a = (Z^T Z + lambda I_p)^-1 Z^T y
inline Vector rfrr_fit_primal(const Matrix& Z, const Vector& y, double lambda) {
  detail::require_ridge_args(Z, y, lambda);
  Matrix A = Z.transpose() * Z;
  A.diagonal().array() += lambda;
  return detail::llt_solve(A, Z.transpose() * y);
}

/// a = Z^T (Z Z^T + lambda I_n)^-1 y
inline Vector rfrr_fit_dual(const Matrix& Z, const Vector& y, double lambda) {
  detail::require_ridge_args(Z, y, lambda);
  Matrix K = Z * Z.transpose();
  K.diagonal().array() += lambda;
  return Z.transpose() * detail::llt_solve(K, y);
}

/// Ridge minimizer through the smaller Gram system.
inline Vector rfrr_fit(const Matrix& Z, const Vector& y, double lambda) {
  return Z.cols() <= Z.rows() ? rfrr_fit_primal(Z, y, lambda) : rfrr_fit_dual(Z, y, lambda);
}

/// beta_hat = F^T a / sqrt(p), the predictor's coefficients in the eigenbasis.
inline Vector predictor_coefs(const Matrix& F, const Vector& a) {
  detail::require(F.rows() == a.size(), errc::dimension_mismatch, "F rows differ from a length");
  return (F.transpose() * a) / std::sqrt(static_cast<double>(F.rows()));
}

inline Vector to_vector(const TargetCoefs& beta) {
  Vector v(static_cast<Eigen::Index>(beta.size()));
  for (std::size_t k = 0; k < beta.size(); ++k) v[static_cast<Eigen::Index>(k)] = beta[k];
  return v;
}

/// ||beta_* - F^T a / sqrt(p)||^2
inline double excess_error(const TargetCoefs& beta, const Matrix& F, const Vector& a) {
  detail::require(F.cols() == static_cast<Eigen::Index>(beta.size()), errc::dimension_mismatch,
                  "F columns differ from target size");
  return (to_vector(beta) - predictor_coefs(F, a)).squaredNorm();
}

struct ExperimentConfig {
  Spectrum spectrum;
  TargetCoefs beta;
  std::uint64_t nt = 1, pt = 1;
  double lambda_t = 1.0;
  double tau_t = 0.0;
  std::uint64_t ns = 1, ps = 1;
  double lambda_s = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t replicates = 20;
  std::uint64_t seed_stride = 1;  // replicate i uses seed + i * seed_stride

  void validate() const {
    detail::require(beta.size() == spectrum.size(), errc::dimension_mismatch, "target and spectrum sizes differ");
    detail::require(nt >= 1 && pt >= 1 && ns >= 1 && ps >= 1, errc::invalid_parameter, "counts must be at least 1");
    detail::require(lambda_t > 0.0 && lambda_s > 0.0, errc::invalid_parameter, "lambdas must be positive");
    detail::require(tau_t >= 0.0 && std::isfinite(tau_t), errc::invalid_parameter, "tau must be non-negative");
  }
  std::uint64_t replicate_seed(std::uint64_t i) const { return seed + i * seed_stride; }
};

struct RunResult {
  double teacher_error = 0.0;
  double student_error = 0.0;
  double beta_t_norm = 0.0;
  double beta_gap_norm = 0.0;
  std::uint64_t seed = 0;
};

/// Draw order: G_t, F_t, teacher noise, G_s, F_s.
inline RunResult run_teacher_student(const ExperimentConfig& cfg, Rng& rng) {
  cfg.validate();
  const Vector beta = to_vector(cfg.beta);

  const Design dt = sample_design(cfg.spectrum, cfg.nt, cfg.pt, rng);
  Vector y = dt.G * beta;
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += cfg.tau_t * rng.normal();
  const Vector at = rfrr_fit(feature_matrix(dt), y, cfg.lambda_t);
  const Vector beta_t = predictor_coefs(dt.F, at);

  const Design ds = sample_design(cfg.spectrum, cfg.ns, cfg.ps, rng);
  const Vector ys = ds.G * beta_t;
  const Vector as = rfrr_fit(feature_matrix(ds), ys, cfg.lambda_s);

  RunResult r;
  r.teacher_error = (beta - beta_t).squaredNorm();
  r.student_error = (beta - predictor_coefs(ds.F, as)).squaredNorm();
  r.beta_t_norm = beta_t.norm();
  r.beta_gap_norm = std::sqrt(r.teacher_error);
  return r;
}

inline RunResult run_replicate(const ExperimentConfig& cfg, std::uint64_t i) {
  Rng rng(cfg.replicate_seed(i));
  RunResult r = run_teacher_student(cfg, rng);
  r.seed = cfg.replicate_seed(i);
  return r;
}

struct SampleStats {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  double se = 0.0;  // sd / sqrt(count)
  std::uint64_t count = 0;
};

/// Fold in the given order.
inline SampleStats sample_stats(const std::vector<double>& xs) {
  SampleStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  CompensatedSum sum;
  for (double x : xs) sum += x;
  s.mean = sum.value() / static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    CompensatedSum ss;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss.value() / static_cast<double>(xs.size() - 1));
    s.se = s.sd / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}

struct MonteCarloSummary {
  SampleStats teacher;
  SampleStats student;
  std::vector<RunResult> runs;  // ascending replicate index
};

inline MonteCarloSummary summarize(std::vector<RunResult> runs) {
  std::vector<double> te, se;
  te.reserve(runs.size());
  se.reserve(runs.size());
  for (const auto& r : runs) {
    te.push_back(r.teacher_error);
    se.push_back(r.student_error);
  }
  MonteCarloSummary m;
  m.teacher = sample_stats(te);
  m.student = sample_stats(se);
  m.runs = std::move(runs);
  return m;
}

/// Replicates run on up to `threads` workers; results land in index order, so
/// the summary does not depend on the thread count.
inline MonteCarloSummary monte_carlo(const ExperimentConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  detail::require(cfg.replicates >= 2, errc::invalid_parameter, "monte carlo needs at least 2 replicates");
  const std::uint64_t reps = cfg.replicates;
  std::vector<RunResult> runs(reps);
  const unsigned workers = static_cast<unsigned>(std::clamp<std::uint64_t>(threads, 1, reps));

  if (workers == 1) {
    for (std::uint64_t i = 0; i < reps; ++i) runs[i] = run_replicate(cfg, i);
    return summarize(std::move(runs));
  }

  std::mutex mu;
  std::uint64_t next = 0;
  std::exception_ptr failure;
  auto work = [&] {
    for (;;) {
      std::uint64_t i;
      {
        std::lock_guard lock(mu);
        if (failure || next == reps) return;
        i = next++;
      }
      try {
        runs[i] = run_replicate(cfg, i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return summarize(std::move(runs));
}

/// Columns: replicate, seed, teacher_error, student_error, beta_t_norm, beta_gap_norm.
inline void write_run_log(std::ostream& os, const std::vector<RunResult>& runs, bool header = true) {
  const auto old = os.precision(17);
  if (header) os << "replicate,seed,teacher_error,student_error,beta_t_norm,beta_gap_norm\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    os << i << ',' << r.seed << ',' << r.teacher_error << ',' << r.student_error << ',' << r.beta_t_norm << ','
       << r.beta_gap_norm << '\n';
  }
  os.precision(old);
  if (!os) throw error(errc::io_error, "failed to write run log");
}

}  // namespace w2s
