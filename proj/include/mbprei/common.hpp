#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mbprei {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Population counts are 64-bit; arithmetic on them is overflow-checked.
using PopVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

// Malformed inputs: scenario files, dimension mismatches, bad parameters.
struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures: non-convergence, undefined moments, overflow.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : NumericalError {
  using NumericalError::NumericalError;
};

struct InfiniteMeanError : NumericalError {
  using NumericalError::NumericalError;
};

struct OverflowError : NumericalError {
  using NumericalError::NumericalError;
};

struct HorizonCapError : NumericalError {
  HorizonCapError(const std::string& what, double discrepancy)
      : NumericalError(what), achieved_discrepancy(discrepancy) {}
  double achieved_discrepancy;
};

// Tolerance for probability vectors summing to one.
inline constexpr double kProbTol = 1e-12;

// Two-sided z for the 99% confidence intervals used in Monte Carlo reports.
inline constexpr double kCiZ = 2.5758293035489004;

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_add_overflow(a, b, &r))
    throw OverflowError("population count overflow in 64-bit addition");
  return r;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r))
    throw OverflowError("population count overflow in 64-bit multiplication");
  return r;
}

inline void checked_add_inplace(PopVec& acc, const PopVec& inc) {
  for (Eigen::Index j = 0; j < acc.size(); ++j)
    acc[j] = checked_add(acc[j], inc[j]);
}

}  // namespace mbprei
