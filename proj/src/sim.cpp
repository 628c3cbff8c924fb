#include "mbprei/sim.hpp"

#include "mbprei/rng.hpp"

namespace mbprei {

namespace {

void check_sim_args(const EnvironmentSequence& env, int initial_type, int n) {
  if (env.spec == nullptr) throw SpecError("environment sequence has no spec");
  if (initial_type < 0 || initial_type >= env.spec->d)
    throw SpecError("initial type out of range");
  if (n < 0) throw SpecError("generation count must be >= 0");
  if (env.length() < n) throw SpecError("environment sequence shorter than the horizon");
  for (int idx : env.indices)
    if (idx < 0 || idx >= static_cast<int>(env.spec->states.size()))
      throw SpecError("environment index addresses no state");
}

// Offspring of `count` particles of type r in the given state, pooled.
PopVec offspring_sum(const EnvState& state, int r, std::int64_t count, RngStream& g) {
  return state.offspring[static_cast<std::size_t>(r)].sample_sum(count, g);
}

}  // namespace

PopVec unit_population(int d, int type) {
  PopVec v = PopVec::Zero(d);
  v[type] = 1;
  return v;
}

PopVec TaggedPopulation::total(int d) const {
  PopVec t = PopVec::Zero(d);
  for (const auto& [tag, counts] : components) checked_add_inplace(t, counts);
  return t;
}

Trajectory simulate_trajectory(const EnvironmentSequence& env, int initial_type, int n,
                               std::uint64_t seed, bool immigration_enabled) {
  check_sim_args(env, initial_type, n);
  const EnvironmentSpec& spec = *env.spec;
  const int d = spec.d;

  Trajectory traj;
  traj.env = env;
  traj.initial_type = initial_type;
  traj.generations = n;
  traj.seed = seed;
  traj.immigration_enabled = immigration_enabled;

  RngStream g = make_stream(seed, 0);

  TaggedPopulation gen0;
  gen0.components[OriginTag::initial()] = unit_population(d, initial_type);
  traj.tagged.push_back(std::move(gen0));
  traj.totals.push_back(traj.tagged.back().total(d));

  for (int k = 0; k < n; ++k) {
    const EnvState& state = env.state(k);
    const TaggedPopulation& cur = traj.tagged.back();
    TaggedPopulation next;

    // Tags in key order, parent types ascending; empty offspring vectors are
    // dropped so extinct lines do not linger.
    for (const auto& [tag, counts] : cur.components) {
      PopVec child = PopVec::Zero(d);
      for (int r = 0; r < d; ++r)
        if (counts[r] > 0) checked_add_inplace(child, offspring_sum(state, r, counts[r], g));
      if ((child.array() != 0).any()) next.components[tag] = std::move(child);
    }

    // Immigration last: cohort Y_k joins generation k + 1, one tag per entry.
    PopVec y = PopVec::Zero(d);
    if (immigration_enabled) {
      y = state.immigration.sample(g);
      for (int r = 0; r < d; ++r)
        for (std::int64_t l = 1; l <= y[r]; ++l)
          next.components[OriginTag{k, r, l}] = unit_population(d, r);
    }
    traj.immigration.push_back(std::move(y));
    traj.totals.push_back(next.total(d));
    traj.tagged.push_back(std::move(next));
  }
  return traj;
}

TrajectoryDecomposition decompose_trajectory(const Trajectory& traj) {
  const int d = traj.env.spec->d;
  TrajectoryDecomposition dec;
  dec.pure.reserve(traj.tagged.size());

  for (std::size_t gen = 0; gen < traj.tagged.size(); ++gen) {
    PopVec pure = PopVec::Zero(d);
    PopVec check = PopVec::Zero(d);
    for (const auto& [tag, counts] : traj.tagged[gen].components) {
      checked_add_inplace(check, counts);
      if (tag.is_initial()) {
        checked_add_inplace(pure, counts);
        continue;
      }
      auto [it, inserted] = dec.by_arrival.try_emplace(tag.arrival);
      if (inserted || it->second.size() != traj.tagged.size())
        it->second.assign(traj.tagged.size(), PopVec::Zero(d));
      checked_add_inplace(it->second[gen], counts);
    }
    if ((check.array() != traj.totals[gen].array()).any())
      throw NumericalError("tagged components do not re-add to the recorded totals");
    dec.pure.push_back(std::move(pure));
  }
  return dec;
}

SplitTotals simulate_split(const EnvironmentSequence& env, int initial_type, int n,
                           std::uint64_t seed, bool immigration_enabled,
                           const std::vector<PopVec>* fixed_immigration) {
  RngStream g = make_stream(seed, 0);
  return simulate_split_stream(env, initial_type, n, g, immigration_enabled, fixed_immigration);
}

SplitTotals simulate_split_stream(const EnvironmentSequence& env, int initial_type, int n,
                                  RngStream& g, bool immigration_enabled,
                                  const std::vector<PopVec>* fixed_immigration) {
  check_sim_args(env, initial_type, n);
  if (fixed_immigration && static_cast<int>(fixed_immigration->size()) < n)
    throw SpecError("fixed immigration shorter than the horizon");
  const EnvironmentSpec& spec = *env.spec;
  const int d = spec.d;

  SplitTotals out;
  out.pure.push_back(unit_population(d, initial_type));
  out.immigrant.push_back(PopVec::Zero(d));

  for (int k = 0; k < n; ++k) {
    const EnvState& state = env.state(k);
    PopVec next_pure = PopVec::Zero(d);
    PopVec next_imm = PopVec::Zero(d);
    for (int r = 0; r < d; ++r) {
      if (out.pure.back()[r] > 0)
        checked_add_inplace(next_pure, offspring_sum(state, r, out.pure.back()[r], g));
      if (out.immigrant.back()[r] > 0)
        checked_add_inplace(next_imm, offspring_sum(state, r, out.immigrant.back()[r], g));
    }
    PopVec y = PopVec::Zero(d);
    if (immigration_enabled) {
      y = fixed_immigration ? (*fixed_immigration)[static_cast<std::size_t>(k)]
                            : state.immigration.sample(g);
      checked_add_inplace(next_imm, y);
    }
    out.immigration.push_back(std::move(y));
    out.pure.push_back(std::move(next_pure));
    out.immigrant.push_back(std::move(next_imm));
  }
  return out;
}

}  // namespace mbprei
