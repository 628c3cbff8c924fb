#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbprei/common.hpp"
#include "mbprei/envspec.hpp"

namespace mbprei {

// Operator norm induced by the L1 vector norm: max column absolute sum.
double l1_operator_norm(const Matrix& m);

// Allowable: every row and every column has a positive entry.
bool is_allowable(const Matrix& m);
bool is_positive(const Matrix& m);

// Left-to-right product m[0] * m[1] * ... * m.back(); throws SpecError on
// an empty list or a dimension mismatch.
Matrix matprod(std::span<const Matrix> mats);

// Perron data of a primitive nonnegative matrix via power iteration on M
// and on M^T.  U > 0 with ||U||_1 = 1; <V, U> = 1; rho from the Rayleigh
// quotient at convergence.  Periodic inputs fail with ConvergenceError.
struct PerronTriple {
  double rho = 0.0;
  Vector u;
  Vector v;
};

PerronTriple perron(const Matrix& m, double tol = 1e-12, int max_iters = 100000);

// Backward sweep over a finite window of mean matrices: u[N] = u_term,
// lambda[n] = ||M_n u[n+1]||_1, u[n] = M_n u[n+1] / lambda[n].  By
// construction M_n u[n+1] = lambda[n] u[n] holds to rounding error.
// Cumulative products are kept both raw (saturating to +inf) and in logs.
struct DirectionTable {
  int horizon = 0;  // N = number of matrices in the window
  Vector u_term;
  std::vector<Vector> u;            // size N+1
  std::vector<double> lambda;       // size N
  std::vector<double> lambda_cum;   // size N+1, lambda_cum[n] = prod_{k<n} lambda[k]
  std::vector<double> log_lambda_cum;

  // prod_{k<n} lambda[k], exact while representable, else exp of the log sum.
  double cum(int n) const;
};

DirectionTable forward_directions(std::span<const Matrix> mats, const Vector& u_term);
DirectionTable forward_directions(const EnvironmentSequence& env, const Vector& u_term);

Vector uniform_direction(int d);

// Smallest window length K for which the leading direction is insensitive
// to the terminal condition: two probe vectors pushed through sampled
// suffix words of length cap agree within tol after K steps.
struct HorizonResult {
  int horizon = 0;
  double contraction_factor = 0.0;  // median per-step shrink of the probe gap
  double achieved_discrepancy = 0.0;
};

HorizonResult choose_horizon(const EnvironmentSpec& spec, double tol, int cap,
                             std::uint64_t seed, int samples = 24);

// Window margin appended past the last generation an estimator reads, so
// the directions it uses are terminal-insensitive.  Falls back to a fixed
// margin when the spec has zero mean entries (no contraction certificate).
int certified_margin(const EnvironmentSpec& spec, int cap, std::uint64_t seed);

// gamma_hat = mean over replicates of (1/n) log ||M_0 ... M_{n-1}||, with
// the paired cross-check (1/n) sum_k log lambda_k on the same draws.
struct SpectralReport {
  int n = 0;
  int reps = 0;
  double gamma_hat = 0.0;
  double std_error = 0.0;
  double cross_check = 0.0;
  double cross_check_std_error = 0.0;
  double diff_std_error = 0.0;
  std::string regime;  // "supercritical" | "subcritical" | "near-critical"
};

SpectralReport lyapunov_estimate(const EnvironmentSpec& spec, int n, int reps,
                                 std::uint64_t seed, int workers = 1);

// kappa(s) from E ||M_0 ... M_{n-1}||^s: per-n Monte Carlo means with
// 99% log-space intervals, the n-th root taken at the end; kappa_hat is
// read off the largest n.  Enumeration mode sums all |states|^n words
// exactly instead of sampling.
struct KappaPoint {
  int n = 0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct KappaReport {
  double s = 0.0;
  bool enumerated = false;
  std::vector<KappaPoint> per_n;
  double kappa_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool monotone_in_n = false;
};

KappaReport kappa_estimate(const EnvironmentSpec& spec, double s,
                           std::span<const int> n_list, int reps,
                           std::uint64_t seed, int workers = 1);
KappaReport kappa_enumerate(const EnvironmentSpec& spec, double s,
                            std::span<const int> n_list);

// Condition survey.
//   h1        E log+ ||M_0|| (exact over states)
//   h2        allowability per state and, among positive-probability states,
//             the shortest product with a strictly positive zero-pattern
//   h3        max/min entry ratio bound D over states, or nullopt (zero entry)
//   xlogx     per (i,j) aggregated over states
//   envelopes E log+(|Y|/lambda) and E (|Y|/lambda)^p bracketed through
//             min/max column sums of the state mean matrices
// classification: "finite" | "infinite" | "indeterminate-by-envelope"
// (the last only when a zero column sum voids the upper bracket).
struct MomentEnvelope {
  std::string classification = "finite";
  std::optional<double> lower;
  std::optional<double> upper;
};

struct ConditionReport {
  double h1_value = 0.0;
  std::vector<bool> h2_allowable;
  bool h2_all_allowable = false;
  std::optional<int> h2_positive_witness;
  std::optional<double> h3_bound;
  std::vector<std::vector<MomentValue>> xlogx;
  bool xlogx_all_finite = false;
  MomentEnvelope immigration_logplus;
  std::vector<std::pair<double, MomentEnvelope>> immigration_p;
};

ConditionReport check_conditions(const EnvironmentSpec& spec, std::span<const double> p_list);

}  // namespace mbprei
