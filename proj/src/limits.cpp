#include "mbprei/limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mbprei/parallel.hpp"
#include "mbprei/rng.hpp"

namespace mbprei {

namespace {

struct MeanStats {
  double mean = 0.0;
  double se = 0.0;
};

MeanStats mean_se(const std::vector<double>& xs) {
  MeanStats st;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return st;
  for (double x : xs) st.mean += x;
  st.mean /= n;
  if (xs.size() < 2) return st;
  double ss = 0.0;
  for (double x : xs) ss += (x - st.mean) * (x - st.mean);
  st.se = std::sqrt(ss / (n - 1.0) / n);
  return st;
}

double lower_median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>((xs.size() - 1) / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  return *mid;
}

double normalized_value(const PopVec& counts, const DirectionTable& dirs, int n, double u0i) {
  return counts.cast<double>().dot(dirs.u[static_cast<std::size_t>(n)]) / (dirs.cum(n) * u0i);
}

double initial_entry(const DirectionTable& dirs, int initial_type) {
  const double u0i = dirs.u[0][initial_type];
  if (!(u0i > 0.0)) throw NumericalError("initial direction entry vanishes");
  return u0i;
}

std::vector<int> sorted_n_list(std::span<const int> n_list) {
  if (n_list.empty()) throw SpecError("n list must not be empty");
  std::vector<int> ns(n_list.begin(), n_list.end());
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.front() < 1) throw SpecError("n values must be >= 1");
  return ns;
}

constexpr double kExactTol = 1e-12;
constexpr std::uint64_t kSubSeedKappa = kStreamSubEstimate;
constexpr std::uint64_t kSubSeedGamma = kStreamSubEstimate + 1;

}  // namespace

const char* to_string(MeanCheckMode m) {
  switch (m) {
    case MeanCheckMode::QuenchedEnvAndImmigration: return "quenched-env-immigration";
    case MeanCheckMode::QuenchedEnv: return "quenched-env";
    case MeanCheckMode::Annealed: return "annealed";
  }
  return "unknown";
}

MartingaleSeries normalized_series(const Trajectory& traj, const DirectionTable& dirs) {
  if (dirs.horizon < traj.generations)
    throw SpecError("direction table is shorter than the trajectory");
  const double u0i = initial_entry(dirs, traj.initial_type);
  const auto gens = static_cast<std::size_t>(traj.generations) + 1;

  MartingaleSeries series;
  series.horizon = dirs.horizon;
  series.w.assign(gens, 0.0);
  series.w_pure.assign(gens, 0.0);

  std::map<OriginTag, std::vector<double>> contrib;
  for (std::size_t n = 0; n < gens; ++n) {
    series.w[n] = normalized_value(traj.totals[n], dirs, static_cast<int>(n), u0i);
    for (const auto& [tag, counts] : traj.tagged[n].components) {
      const double value = normalized_value(counts, dirs, static_cast<int>(n), u0i);
      if (tag.is_initial()) {
        series.w_pure[n] = value;
      } else {
        auto [it, inserted] = contrib.try_emplace(tag);
        if (inserted) it->second.assign(gens, 0.0);
        it->second[n] = value;
      }
    }
  }
  series.contributions.reserve(contrib.size());
  for (auto& [tag, values] : contrib)
    series.contributions.push_back({tag, std::move(values)});
  return series;
}

double mean_formula(const DirectionTable& dirs, std::span<const PopVec> cohorts,
                    int initial_type, int n) {
  if (dirs.horizon < n) throw SpecError("direction table is shorter than the horizon");
  if (static_cast<int>(cohorts.size()) < n) throw SpecError("missing immigration cohorts");
  const double u0i = initial_entry(dirs, initial_type);
  double total = 1.0;
  for (int k = 0; k < n; ++k)
    total += cohorts[static_cast<std::size_t>(k)].cast<double>().dot(
                 dirs.u[static_cast<std::size_t>(k) + 1]) /
             (dirs.cum(k + 1) * u0i);
  return total;
}

double mean_formula_expected_cohorts(const DirectionTable& dirs,
                                     const EnvironmentSequence& env,
                                     int initial_type, int n) {
  if (dirs.horizon < n || env.length() < n)
    throw SpecError("direction table or environment shorter than the horizon");
  const double u0i = initial_entry(dirs, initial_type);
  double total = 1.0;
  for (int k = 0; k < n; ++k) {
    const Vector mean = env.state(k).immigration.mean_or_inf();
    if (!mean.allFinite())
      throw NumericalError("expected-cohort mean needs a finite immigration mean");
    total += mean.dot(dirs.u[static_cast<std::size_t>(k) + 1]) / (dirs.cum(k + 1) * u0i);
  }
  return total;
}

ResidualReport decomposition_identity_check(const Trajectory& traj, const DirectionTable& dirs) {
  const MartingaleSeries series = normalized_series(traj, dirs);
  ResidualReport rep;
  rep.rel_residual.reserve(series.w.size());
  for (std::size_t n = 0; n < series.w.size(); ++n) {
    double reassembled = series.w_pure[n];
    for (const auto& c : series.contributions) reassembled += c.by_generation[n];
    const double resid = std::abs(series.w[n] - reassembled);
    rep.rel_residual.push_back(series.w[n] > 0.0 ? resid / series.w[n] : resid);
  }
  rep.max_rel_residual = *std::max_element(rep.rel_residual.begin(), rep.rel_residual.end());
  rep.pass = rep.max_rel_residual <= 1e-10;
  return rep;
}

namespace {

MeanCheckReport run_mean_check(const EnvironmentSequence& env, const DirectionTable& dirs,
                               const std::optional<std::vector<PopVec>>& fixed_cohorts,
                               int initial_type, int n, int reps, std::uint64_t seed,
                               MeanCheckMode mode, int workers) {
  const double u0i = initial_entry(dirs, initial_type);
  const double formula =
      mode == MeanCheckMode::QuenchedEnv
          ? mean_formula_expected_cohorts(dirs, env, initial_type, n)
          : mean_formula(dirs, *fixed_cohorts, initial_type, n);

  std::vector<double> w(static_cast<std::size_t>(reps));
  parallel_replicates(reps, seed, workers, [&](int r, RngStream& g) {
    const std::vector<PopVec>* inject =
        mode == MeanCheckMode::QuenchedEnvAndImmigration ? &*fixed_cohorts : nullptr;
    const SplitTotals split = simulate_split_stream(env, initial_type, n, g, true, inject);
    const auto nn = static_cast<std::size_t>(n);
    w[static_cast<std::size_t>(r)] =
        normalized_value(split.pure[nn], dirs, n, u0i) +
        normalized_value(split.immigrant[nn], dirs, n, u0i);
  });

  std::vector<double> diff(w.size());
  for (std::size_t r = 0; r < w.size(); ++r) diff[r] = w[r] - formula;
  const MeanStats w_st = mean_se(w);
  const MeanStats d_st = mean_se(diff);

  MeanCheckReport rep;
  rep.mode = mode;
  rep.initial_type = initial_type;
  rep.n = n;
  rep.reps = reps;
  rep.formula = formula;
  rep.mc_mean = w_st.mean;
  rep.diff = d_st.mean;
  rep.std_error = d_st.se;
  rep.pass = std::abs(d_st.mean) <= 4.0 * d_st.se + kExactTol;
  return rep;
}

}  // namespace

MeanCheckReport quenched_mean_check_fixed(const EnvironmentSequence& env,
                                          const std::optional<std::vector<PopVec>>& fixed_immigration,
                                          int initial_type, int n, int reps,
                                          std::uint64_t seed, MeanCheckMode mode,
                                          int workers) {
  if (mode == MeanCheckMode::Annealed)
    throw SpecError("annealed mode redraws environments; use the spec-level entry");
  if (env.length() < n) throw SpecError("environment sequence shorter than the horizon");
  if (reps < 1) throw SpecError("reps must be >= 1");

  const DirectionTable dirs = forward_directions(env, uniform_direction(env.spec->d));

  std::optional<std::vector<PopVec>> cohorts = fixed_immigration;
  if (mode == MeanCheckMode::QuenchedEnvAndImmigration && !cohorts) {
    RngStream g = make_stream(seed, kStreamImmigrationSetup);
    std::vector<PopVec> drawn;
    drawn.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) drawn.push_back(env.state(k).immigration.sample(g));
    cohorts = std::move(drawn);
  }
  return run_mean_check(env, dirs, cohorts, initial_type, n, reps, seed, mode, workers);
}

MeanCheckReport quenched_mean_check(const EnvironmentSpec& spec, int initial_type, int n,
                                    int reps, std::uint64_t seed, MeanCheckMode mode,
                                    int workers, int horizon_cap) {
  if (reps < 1) throw SpecError("reps must be >= 1");
  if (n < 1) throw SpecError("n must be >= 1");

  if (mode != MeanCheckMode::Annealed) {
    const int margin = certified_margin(spec, horizon_cap, seed);
    const EnvironmentSequence env = sample_environment(spec, n + margin, seed);
    return quenched_mean_check_fixed(env, std::nullopt, initial_type, n, reps, seed, mode,
                                     workers);
  }

  // Annealed mean is finite only under kappa(-1) < 1 with an integrable
  // immigration-to-growth ratio; refuse otherwise.
  const int k_list[] = {10};
  const KappaReport kap =
      kappa_estimate(spec, -1.0, k_list, 20000, derive_seed(seed, kSubSeedKappa), workers);
  if (kap.kappa_hat >= 1.0)
    throw NumericalError("annealed mean check requires kappa(-1) < 1; estimate is " +
                         std::to_string(kap.kappa_hat));
  const double p_one[] = {1.0};
  const ConditionReport cond = check_conditions(spec, p_one);
  if (cond.immigration_p.front().second.classification == "infinite")
    throw NumericalError("annealed mean check requires a finite immigration/growth ratio");

  const int margin = certified_margin(spec, horizon_cap, seed);

  std::vector<double> w(static_cast<std::size_t>(reps));
  std::vector<double> formulas(static_cast<std::size_t>(reps));
  parallel_replicates(reps, seed, workers, [&](int r, RngStream& g) {
    EnvironmentSequence env;
    env.spec = &spec;
    env.seed = seed;
    env.indices = draw_state_indices(spec, n + margin, g);
    const DirectionTable dirs = forward_directions(env, uniform_direction(spec.d));
    const double u0i = initial_entry(dirs, initial_type);
    const SplitTotals split = simulate_split_stream(env, initial_type, n, g, true, nullptr);
    const auto nn = static_cast<std::size_t>(n);
    w[static_cast<std::size_t>(r)] =
        normalized_value(split.pure[nn], dirs, n, u0i) +
        normalized_value(split.immigrant[nn], dirs, n, u0i);
    formulas[static_cast<std::size_t>(r)] = mean_formula(dirs, split.immigration, initial_type, n);
  });

  std::vector<double> diff(w.size());
  for (std::size_t r = 0; r < w.size(); ++r) diff[r] = w[r] - formulas[r];
  const MeanStats w_st = mean_se(w);
  const MeanStats f_st = mean_se(formulas);
  const MeanStats d_st = mean_se(diff);

  MeanCheckReport rep;
  rep.mode = mode;
  rep.initial_type = initial_type;
  rep.n = n;
  rep.reps = reps;
  rep.formula = f_st.mean;
  rep.mc_mean = w_st.mean;
  rep.diff = d_st.mean;
  rep.std_error = d_st.se;
  rep.pass = std::abs(d_st.mean) <= 4.0 * d_st.se + kExactTol;
  return rep;
}

LpReport lp_sweep(const EnvironmentSpec& spec, int initial_type, double p,
                  std::span<const int> n_list, int reps, std::uint64_t seed,
                  int workers, int horizon_cap) {
  if (!(p > 0.0)) throw SpecError("p must be > 0");
  if (reps < 2) throw SpecError("reps must be >= 2");
  const std::vector<int> ns = sorted_n_list(n_list);
  const int max_n = ns.back();

  LpReport rep;
  rep.p = p;
  rep.initial_type = initial_type;
  rep.reps = reps;

  const int k_list[] = {12};
  const KappaReport kap =
      kappa_estimate(spec, -p, k_list, 20000, derive_seed(seed, kSubSeedKappa), workers);
  rep.kappa_minus_p = kap.kappa_hat;
  rep.kappa_ci_low = kap.ci_low;
  rep.kappa_ci_high = kap.ci_high;

  rep.offspring_p_finite = true;
  if (p > 1.0)
    for (const EnvState& st : spec.states)
      for (int i = 0; i < spec.d; ++i)
        for (int j = 0; j < spec.d; ++j)
          if (!st.offspring[static_cast<std::size_t>(i)].coord_p_moment(j, p).finite())
            rep.offspring_p_finite = false;

  const double p_arr[] = {p};
  const ConditionReport cond = check_conditions(spec, p_arr);
  rep.immigration_p_finite = cond.immigration_p.front().second.classification == "finite";

  if (!rep.immigration_p_finite || !rep.offspring_p_finite)
    rep.predicted = "unbounded";
  else if (rep.kappa_ci_high < 1.0)
    rep.predicted = "bounded";
  else if (rep.kappa_ci_low > 1.0)
    rep.predicted = "unbounded";
  else
    rep.predicted = "indeterminate";

  const int margin = certified_margin(spec, horizon_cap, seed);

  std::vector<std::vector<double>> wp(ns.size(),
                                      std::vector<double>(static_cast<std::size_t>(reps)));
  parallel_replicates(reps, seed, workers, [&](int r, RngStream& g) {
    EnvironmentSequence env;
    env.spec = &spec;
    env.seed = seed;
    env.indices = draw_state_indices(spec, max_n + margin, g);
    const DirectionTable dirs = forward_directions(env, uniform_direction(spec.d));
    const double u0i = initial_entry(dirs, initial_type);
    const SplitTotals split = simulate_split_stream(env, initial_type, max_n, g, true, nullptr);
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const int n = ns[i];
      const auto nn = static_cast<std::size_t>(n);
      const double w = normalized_value(split.pure[nn], dirs, n, u0i) +
                       normalized_value(split.immigrant[nn], dirs, n, u0i);
      wp[i][static_cast<std::size_t>(r)] = std::pow(w, p);
    }
  });

  for (std::size_t i = 0; i < ns.size(); ++i) {
    const MeanStats st = mean_se(wp[i]);
    rep.per_n.push_back({ns[i], st.mean, st.mean - kCiZ * st.se, st.mean + kCiZ * st.se});
  }

  const std::size_t half = ns.size() / 2;
  double lo = rep.per_n[half].estimate, hi = rep.per_n[half].estimate;
  std::vector<double> widths;
  for (std::size_t i = half; i < ns.size(); ++i) {
    lo = std::min(lo, rep.per_n[i].estimate);
    hi = std::max(hi, rep.per_n[i].estimate);
    widths.push_back(rep.per_n[i].ci_high - rep.per_n[i].ci_low);
  }
  rep.top_half_range = hi - lo;
  rep.top_half_ci_width = lower_median(widths);
  rep.observed = rep.top_half_range <= 3.0 * rep.top_half_ci_width ? "stable" : "drifting";
  return rep;
}

NondegeneracyReport limit_probe(const EnvironmentSpec& spec, int initial_type,
                                std::span<const int> n_list, int reps,
                                std::uint64_t seed, double eps, int workers,
                                int horizon_cap) {
  if (!(eps > 0.0)) throw SpecError("eps must be > 0");
  if (reps < 2) throw SpecError("reps must be >= 2");
  const std::vector<int> ns = sorted_n_list(n_list);
  const int max_n = ns.back();

  const SpectralReport gamma =
      lyapunov_estimate(spec, 200, 32, derive_seed(seed, kSubSeedGamma), workers);
  if (!(gamma.gamma_hat > 0.0))
    throw NumericalError("distribution probe requires a supercritical spec; gamma estimate is " +
                         std::to_string(gamma.gamma_hat));

  NondegeneracyReport rep;
  rep.initial_type = initial_type;
  rep.reps = reps;
  rep.eps = eps;

  const int k_list[] = {10};
  const KappaReport kap =
      kappa_estimate(spec, -1.0, k_list, 20000, derive_seed(seed, kSubSeedKappa), workers);
  rep.kappa_minus_1 = kap.kappa_hat;

  const MomentReport agg = aggregate_moments(spec, 1.0);
  rep.xlogx_all_finite = true;
  for (const auto& row : agg.xlogx)
    for (const MomentValue& v : row)
      if (!v.finite()) rep.xlogx_all_finite = false;
  rep.sup_integrable_guaranteed = rep.kappa_minus_1 < 1.0 && rep.xlogx_all_finite;

  const int margin = certified_margin(spec, horizon_cap, seed);

  std::vector<std::vector<double>> w(ns.size(),
                                     std::vector<double>(static_cast<std::size_t>(reps)));
  std::vector<double> sup(static_cast<std::size_t>(reps));
  std::vector<char> overflowed(static_cast<std::size_t>(reps), 0);
  parallel_replicates(reps, seed, workers, [&](int r, RngStream& g) {
    EnvironmentSequence env;
    env.spec = &spec;
    env.seed = seed;
    env.indices = draw_state_indices(spec, max_n + margin, g);
    const DirectionTable dirs = forward_directions(env, uniform_direction(spec.d));
    const double u0i = initial_entry(dirs, initial_type);
    try {
      const SplitTotals split = simulate_split_stream(env, initial_type, max_n, g, false, nullptr);
      double running_sup = 0.0;
      std::size_t next = 0;
      for (int m = 0; m <= max_n; ++m) {
        const double value =
            normalized_value(split.pure[static_cast<std::size_t>(m)], dirs, m, u0i);
        running_sup = std::max(running_sup, value);
        if (next < ns.size() && m == ns[next]) {
          w[next][static_cast<std::size_t>(r)] = value;
          ++next;
        }
      }
      sup[static_cast<std::size_t>(r)] = running_sup;
    } catch (const OverflowError&) {
      const double inf = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < ns.size(); ++i) w[i][static_cast<std::size_t>(r)] = inf;
      sup[static_cast<std::size_t>(r)] = inf;
      overflowed[static_cast<std::size_t>(r)] = 1;
    }
  });
  rep.overflow_replicates =
      static_cast<int>(std::count(overflowed.begin(), overflowed.end(), char(1)));

  for (std::size_t i = 0; i < ns.size(); ++i) {
    ProbePoint pt;
    pt.n = ns[i];
    const MeanStats st = mean_se(w[i]);
    pt.mean = st.mean;
    pt.median = lower_median(w[i]);
    std::size_t alive = 0;
    for (double x : w[i])
      if (x > eps) ++alive;
    pt.survival = static_cast<double>(alive) / static_cast<double>(reps);
    rep.per_n.push_back(pt);
  }

  const MeanStats sup_st = mean_se(sup);
  rep.sup_proxy_mean = sup_st.mean;
  rep.sup_proxy_ci_low = sup_st.mean - kCiZ * sup_st.se;
  rep.sup_proxy_ci_high = sup_st.mean + kCiZ * sup_st.se;

  bool strictly_decreasing = true;
  for (std::size_t i = 0; i + 1 < rep.per_n.size(); ++i)
    if (!(rep.per_n[i + 1].median < rep.per_n[i].median)) strictly_decreasing = false;
  const double first = rep.per_n.front().median;
  const double last = rep.per_n.back().median;
  const double ratio = first > 0.0 ? last / first : (last > 0.0 ? 1.0 : 0.0);
  if (strictly_decreasing && ratio < 0.5)
    rep.classification = "degenerate-consistent";
  else if (ratio >= 0.75)
    rep.classification = "non-degenerate-consistent";
  else
    rep.classification = "inconclusive";
  return rep;
}

}  // namespace mbprei
