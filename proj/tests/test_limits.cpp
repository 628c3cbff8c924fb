#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "mbprei/limits.hpp"
#include "scenarios.hpp"

using namespace mbprei;

namespace {

EnvironmentSequence fixed_env(const EnvironmentSpec& spec, std::vector<int> indices) {
  EnvironmentSequence env;
  env.spec = &spec;
  env.indices = std::move(indices);
  return env;
}

PopVec pv(std::int64_t a, std::int64_t b) { return (PopVec(2) << a, b).finished(); }

}  // namespace

TEST_CASE("deterministic branching has a normalized series pinned at one") {
  // With every law deterministic the pure normalized value is a conserved
  // quantity: <Z_n, u_n> / (lambda_cum(n) u_0(i)) = 1 at every generation,
  // exactly in dyadic arithmetic.
  const EnvironmentSpec spec = testspec::deterministic_unit();
  const EnvironmentSequence env = fixed_env(spec, {0, 0, 0});
  const DirectionTable dirs = forward_directions(env, uniform_direction(2));

  // Hand-run backward sweep for M = [[2,1],[0,1]]: all lambda = 2 and
  // u = (1 - 2^-(N-n+1), 2^-(N-n+1)).
  REQUIRE(dirs.horizon == 3);
  CHECK(dirs.lambda[0] == 2.0);
  CHECK(dirs.lambda[1] == 2.0);
  CHECK(dirs.lambda[2] == 2.0);
  CHECK(dirs.u[0][0] == 0.9375);
  CHECK(dirs.u[0][1] == 0.0625);
  CHECK(dirs.u[1][0] == 0.875);
  CHECK(dirs.u[2][0] == 0.75);
  CHECK(dirs.cum(3) == 8.0);

  const Trajectory traj = simulate_trajectory(env, 0, 3, 12345);
  const MartingaleSeries series = normalized_series(traj, dirs);
  for (double v : series.w_pure) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  // Immigration Y = (1,1) per cohort: the with-immigration value equals the
  // closed-form mean because nothing is random.
  const std::vector<PopVec> cohorts = {pv(1, 1), pv(1, 1), pv(1, 1)};
  const double formula3 = mean_formula(dirs, cohorts, 0, 3);
  CHECK(formula3 == doctest::Approx(29.0 / 15.0).epsilon(1e-14));
  CHECK(series.w[3] == doctest::Approx(formula3).epsilon(1e-14));

  // Expected-cohort variant agrees since the cohorts equal their means.
  for (int n = 1; n <= 3; ++n)
    CHECK(mean_formula_expected_cohorts(dirs, env, 0, n) ==
          doctest::Approx(mean_formula(dirs, cohorts, 0, n)).epsilon(1e-14));

  const ResidualReport res = decomposition_identity_check(traj, dirs);
  CHECK(res.pass);
  CHECK(res.max_rel_residual <= 1e-12);
}

TEST_CASE("closed-form mean is strictly increasing in the horizon") {
  const EnvironmentSpec spec = testspec::rank_one();
  const EnvironmentSequence env = sample_environment(spec, 8, 21);
  const DirectionTable dirs = forward_directions(env, uniform_direction(2));
  const std::vector<PopVec> cohorts(8, pv(1, 0));
  double prev = mean_formula(dirs, cohorts, 0, 0);
  CHECK(prev == 1.0);
  for (int n = 1; n <= 8; ++n) {
    const double cur = mean_formula(dirs, cohorts, 0, n);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("expected-cohort mean refuses heavy-tailed immigration") {
  EnvironmentSpec spec = testspec::deterministic_unit();
  spec.states[0].immigration =
      DiscreteLaw::independent({{Family::Zeta, 2.0}, {Family::Deterministic, 0.0}});
  const EnvironmentSequence env = fixed_env(spec, {0, 0});
  const DirectionTable dirs = forward_directions(env, uniform_direction(2));
  CHECK_THROWS_AS(mean_formula_expected_cohorts(dirs, env, 0, 2), NumericalError);
}

TEST_CASE("mean checks pass in all three modes on a random environment") {
  const EnvironmentSpec spec = testspec::rank_one();
  for (const MeanCheckMode mode :
       {MeanCheckMode::QuenchedEnvAndImmigration, MeanCheckMode::QuenchedEnv,
        MeanCheckMode::Annealed}) {
    const MeanCheckReport rep = quenched_mean_check(spec, 0, 6, 4000, 2024, mode);
    INFO(to_string(mode));
    CHECK(rep.pass);
    CHECK(rep.formula > 1.0);
    CHECK(rep.reps == 4000);
    CHECK(std::abs(rep.diff) <= 4.0 * rep.std_error + 1e-12);
  }
  CHECK(std::strcmp(to_string(MeanCheckMode::QuenchedEnvAndImmigration),
                    "quenched-env-immigration") == 0);
  CHECK(std::strcmp(to_string(MeanCheckMode::QuenchedEnv), "quenched-env") == 0);
  CHECK(std::strcmp(to_string(MeanCheckMode::Annealed), "annealed") == 0);
}

TEST_CASE("fixed-environment mean check is exact for deterministic laws") {
  const EnvironmentSpec spec = testspec::deterministic_unit();
  const EnvironmentSequence env = fixed_env(spec, {0, 0, 0});
  const std::vector<PopVec> cohorts = {pv(1, 1), pv(1, 1), pv(1, 1)};
  const MeanCheckReport rep = quenched_mean_check_fixed(
      env, cohorts, 0, 3, 50, 9, MeanCheckMode::QuenchedEnvAndImmigration);
  CHECK(rep.pass);
  CHECK(rep.std_error == 0.0);  // every replicate is identical
  CHECK(std::abs(rep.diff) <= 1e-12);
  CHECK(rep.formula == doctest::Approx(29.0 / 15.0).epsilon(1e-14));

  CHECK_THROWS_AS(quenched_mean_check_fixed(env, cohorts, 0, 3, 50, 9,
                                            MeanCheckMode::Annealed),
                  SpecError);
}

TEST_CASE("annealed mean check refuses a contracting growth normalizer") {
  const EnvironmentSpec spec = testspec::subcritical();
  CHECK_THROWS_AS(quenched_mean_check(spec, 0, 4, 500, 7, MeanCheckMode::Annealed),
                  NumericalError);
}

TEST_CASE("inverse growth factor matches exhaustive word enumeration") {
  // Rank-one states a * ones(2,2), a in {1,2} equiprobable: every backward
  // direction is (1/2, 1/2), the step factor is 2a, and
  //   E [ 1 / (lambda_cum(n) u_0(i)) ] = 2 * 0.375^n
  // exactly.  The library tables must reproduce the plain-product oracle
  // word by word.
  const EnvironmentSpec spec = testspec::rank_one();
  const Vector term = uniform_direction(2);
  for (const int n : {3, 6}) {
    double lib_sum = 0.0, oracle_sum = 0.0;
    const int words = 1 << n;
    for (int word = 0; word < words; ++word) {
      std::vector<int> idx(n);
      double cum = 1.0;
      for (int k = 0; k < n; ++k) {
        idx[k] = (word >> k) & 1;
        cum *= 2.0 * (idx[k] + 1);
      }
      oracle_sum += 1.0 / (cum * 0.5);

      const EnvironmentSequence env = fixed_env(spec, idx);
      const DirectionTable dirs = forward_directions(env, term);
      CHECK(dirs.u[0][0] == doctest::Approx(0.5).epsilon(1e-14));
      lib_sum += 1.0 / (dirs.cum(n) * dirs.u[0][0]);
    }
    const double lib_mean = lib_sum / words;
    const double oracle_mean = oracle_sum / words;
    CHECK(lib_mean == doctest::Approx(oracle_mean).epsilon(1e-12));
    CHECK(lib_mean == doctest::Approx(2.0 * std::pow(0.375, n)).epsilon(1e-12));
    CHECK(lib_mean / std::pow(0.375, n) == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("decomposition identity holds along random trajectories") {
  const EnvironmentSpec spec = testspec::two_state();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const EnvironmentSequence env = sample_environment(spec, 10, seed);
    const DirectionTable dirs = forward_directions(env, uniform_direction(2));
    const Trajectory traj = simulate_trajectory(env, 0, 10, seed * 31 + 7);
    const ResidualReport res = decomposition_identity_check(traj, dirs);
    INFO("seed ", seed, " max_rel_residual ", res.max_rel_residual);
    CHECK(res.pass);
  }
}

TEST_CASE("p-th moment sweep: prediction bookkeeping and guards") {
  const EnvironmentSpec spec = testspec::rank_one();
  const std::vector<int> ns = {4, 8};
  const LpReport rep = lp_sweep(spec, 0, 2.0, ns, 4000, 99);
  CHECK(rep.p == 2.0);
  CHECK(rep.per_n.size() == 2);
  // kappa(-2) = 2^-2 (1 + 2^-2) / 2 = 0.15625 for this spec.
  CHECK(rep.kappa_ci_low <= 0.15625);
  CHECK(rep.kappa_ci_high >= 0.15625);
  CHECK(rep.kappa_ci_high < 1.0);
  CHECK(rep.offspring_p_finite);
  CHECK(rep.immigration_p_finite);
  CHECK(rep.predicted == "bounded");
  CHECK((rep.observed == "stable" || rep.observed == "drifting"));
  for (const LpPoint& pt : rep.per_n) {
    CHECK(pt.estimate > 0.0);
    CHECK(pt.ci_low <= pt.estimate);
    CHECK(pt.ci_high >= pt.estimate);
  }

  CHECK_THROWS_AS(lp_sweep(spec, 0, 0.0, ns, 100, 1), SpecError);
  CHECK_THROWS_AS(lp_sweep(spec, 0, -1.0, ns, 100, 1), SpecError);
}

TEST_CASE("distribution probe: integrable supremum case") {
  const EnvironmentSpec spec = testspec::rank_one();
  const std::vector<int> ns = {3, 6};
  const NondegeneracyReport rep = limit_probe(spec, 0, ns, 3000, 5);
  CHECK(rep.kappa_minus_1 == doctest::Approx(0.375).epsilon(0.05));
  CHECK(rep.xlogx_all_finite);
  CHECK(rep.sup_integrable_guaranteed);
  CHECK(rep.overflow_replicates == 0);
  CHECK(rep.classification != "degenerate-consistent");
  for (const ProbePoint& pt : rep.per_n) {
    CHECK(pt.survival > 0.5);
    CHECK(pt.median > 0.0);
  }
  CHECK(rep.sup_proxy_ci_low <= rep.sup_proxy_mean);
  CHECK(rep.sup_proxy_ci_high >= rep.sup_proxy_mean);
}

TEST_CASE("distribution probe: collapsing medians under heavy tails") {
  const EnvironmentSpec spec = testspec::zeta_probe();
  const std::vector<int> ns = {4, 8, 16};
  const NondegeneracyReport rep = limit_probe(spec, 0, ns, 2000, 11);
  CHECK(!rep.xlogx_all_finite);
  CHECK(!rep.sup_integrable_guaranteed);
  CHECK(rep.classification == "degenerate-consistent");
  CHECK(rep.per_n.front().median > rep.per_n.back().median);
}

TEST_CASE("distribution probe refuses a non-growing spec") {
  const EnvironmentSpec spec = testspec::subcritical();
  const std::vector<int> ns = {3, 6};
  CHECK_THROWS_AS(limit_probe(spec, 0, ns, 100, 1), NumericalError);
}

TEST_CASE("distribution probe censors replicates that outgrow 64-bit counts") {
  // Type 0 quintuples itself every generation and additionally sprays
  // heavy-tailed type-1 bursts, so by generation 11 the per-generation
  // draw volume is guaranteed past the sampler's cap: every replicate is
  // censored to +inf rather than aborting the probe.
  EnvironmentSpec spec;
  spec.d = 2;
  spec.state_probs = Vector::Ones(1);
  EnvState st;
  st.offspring.push_back(
      DiscreteLaw::independent({{Family::Deterministic, 5.0}, {Family::Zeta, 2.0}}));
  st.offspring.push_back(
      DiscreteLaw::independent({{Family::Deterministic, 5.0}, {Family::Deterministic, 0.0}}));
  st.immigration = DiscreteLaw::independent(
      {{Family::Deterministic, 0.0}, {Family::Deterministic, 0.0}});
  st.mean_override = (Matrix(2, 2) << 5.0, 1.0, 5.0, 0.1).finished();
  spec.states.push_back(st);
  REQUIRE(validate_spec(spec).empty());

  const std::vector<int> ns = {4, 12};
  const NondegeneracyReport rep = limit_probe(spec, 0, ns, 8, 3);
  CHECK(rep.overflow_replicates == 8);
  CHECK(std::isinf(rep.per_n.back().median));
}
