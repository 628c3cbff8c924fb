#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbprei/common.hpp"
#include "mbprei/ranmat.hpp"
#include "mbprei/sim.hpp"

namespace mbprei {

// Normalized population series along one trajectory:
//   w[n]      = <X_n, u_n> / (lambda_cum(n) u_0(i))   (with immigration)
//   w_pure[n] = same with the initial ancestor's component Z_n
// plus the per-immigrant contributions; w[n] = w_pure[n] + sum of
// contributions at n, exactly, because the directions satisfy the backward
// eigen-relation by construction.
struct MartingaleSeries {
  std::vector<double> w;
  std::vector<double> w_pure;
  struct Contribution {
    OriginTag tag;
    std::vector<double> by_generation;
  };
  std::vector<Contribution> contributions;
  int horizon = 0;
};

MartingaleSeries normalized_series(const Trajectory& traj, const DirectionTable& dirs);

// Closed-form conditional mean of w[n] given environment and cohorts:
//   1 + sum_{k<n} <Y_k, u_{k+1}> / (lambda_cum(k+1) u_0(i)).
double mean_formula(const DirectionTable& dirs, std::span<const PopVec> cohorts,
                    int initial_type, int n);

// Same with each Y_k replaced by its conditional mean given the state.
double mean_formula_expected_cohorts(const DirectionTable& dirs,
                                     const EnvironmentSequence& env,
                                     int initial_type, int n);

enum class MeanCheckMode { QuenchedEnvAndImmigration, QuenchedEnv, Annealed };

const char* to_string(MeanCheckMode m);

// Monte Carlo check of E w[n] against the closed-form mean.  The paired
// statistic mean(w_r - formula_r) has conditional mean zero, so the test
// is |mean diff| <= 4 SE(diff).
struct MeanCheckReport {
  MeanCheckMode mode = MeanCheckMode::QuenchedEnvAndImmigration;
  int initial_type = 0;
  int n = 0;
  int reps = 0;
  double formula = 0.0;
  double mc_mean = 0.0;
  double diff = 0.0;
  double std_error = 0.0;  // SE of the paired difference
  bool pass = false;
};

// Spec-level entry: quenched modes draw one environment (and one cohort
// sequence for the xiY mode) from `seed` and hold it fixed; annealed mode
// redraws everything per replicate and requires kappa(-1) < 1 plus a finite
// immigration/growth ratio.
MeanCheckReport quenched_mean_check(const EnvironmentSpec& spec, int initial_type, int n,
                                    int reps, std::uint64_t seed, MeanCheckMode mode,
                                    int workers = 1, int horizon_cap = 200);

// Fixed-environment entry (the provided window is the whole world; the
// identity is exact at any horizon >= n).  fixed_immigration, when given,
// must hold Y_0 .. Y_{n-1}.
MeanCheckReport quenched_mean_check_fixed(const EnvironmentSequence& env,
                                          const std::optional<std::vector<PopVec>>& fixed_immigration,
                                          int initial_type, int n, int reps,
                                          std::uint64_t seed, MeanCheckMode mode,
                                          int workers = 1);

// Residuals of w[n] - (w_pure[n] + sum of contributions), relative to w[n].
struct ResidualReport {
  std::vector<double> rel_residual;
  double max_rel_residual = 0.0;
  bool pass = false;  // max <= 1e-10
};

ResidualReport decomposition_identity_check(const Trajectory& traj, const DirectionTable& dirs);

// E w[n]^p across n with 99% intervals, against the moment conditions:
// kappa(-p) < 1, a finite immigration/growth p-moment and (for p > 1)
// finite normalized offspring p-moments predict a bounded sweep.
struct LpPoint {
  int n = 0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct LpReport {
  double p = 0.0;
  int initial_type = 0;
  int reps = 0;
  std::vector<LpPoint> per_n;
  double kappa_minus_p = 0.0;
  double kappa_ci_low = 0.0;
  double kappa_ci_high = 0.0;
  bool offspring_p_finite = false;   // max over (i,j) of E (N^i(j)/M(i,j))^p
  bool immigration_p_finite = false; // E (|Y|/lambda)^p via column-sum envelope
  std::string predicted;             // "bounded" | "unbounded" | "indeterminate"
  std::string observed;              // "stable" | "drifting"
  double top_half_range = 0.0;
  double top_half_ci_width = 0.0;
};

LpReport lp_sweep(const EnvironmentSpec& spec, int initial_type, double p,
                  std::span<const int> n_list, int reps, std::uint64_t seed,
                  int workers = 1, int horizon_cap = 200);

// Distribution probe of the pure (immigration-free) normalized series:
// survival P(w_pure[n] > eps), quenched-averaged means, medians, a proxy
// for E sup_n w_pure[n], and a degeneracy trend classification from the
// medians: strictly decreasing with last/first < 1/2 reads degenerate,
// last/first >= 3/4 reads non-degenerate, anything else inconclusive.
// A replicate whose population outgrows 64-bit counts (possible under
// heavy-tailed offspring) is censored: its recorded values become +inf,
// which keeps medians and survival well defined; overflow_replicates
// counts them.
struct ProbePoint {
  int n = 0;
  double survival = 0.0;
  double mean = 0.0;
  double median = 0.0;
};

struct NondegeneracyReport {
  int initial_type = 0;
  int reps = 0;
  double eps = 0.0;
  std::vector<ProbePoint> per_n;
  std::string classification;  // "degenerate-consistent" | "non-degenerate-consistent" | "inconclusive"
  double sup_proxy_mean = 0.0;
  double sup_proxy_ci_low = 0.0;
  double sup_proxy_ci_high = 0.0;
  double kappa_minus_1 = 0.0;
  bool xlogx_all_finite = false;
  bool sup_integrable_guaranteed = false;  // kappa(-1) < 1 and finite xlogx moments
  int overflow_replicates = 0;             // censored as +inf in the statistics
};

NondegeneracyReport limit_probe(const EnvironmentSpec& spec, int initial_type,
                                std::span<const int> n_list, int reps,
                                std::uint64_t seed, double eps = 1e-6,
                                int workers = 1, int horizon_cap = 200);

}  // namespace mbprei
