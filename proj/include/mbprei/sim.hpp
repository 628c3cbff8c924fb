#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mbprei/common.hpp"
#include "mbprei/envspec.hpp"

namespace mbprei {

// Provenance of a particle: the initial ancestor, or the immigrant that
// arrived as entry `index` of type `type` in the cohort Y_`arrival` (and so
// first appears in generation arrival + 1).
struct OriginTag {
  int arrival = -1;  // -1 encodes the initial ancestor
  int type = 0;
  std::int64_t index = 0;

  bool is_initial() const { return arrival < 0; }
  static OriginTag initial() { return OriginTag{}; }
  friend auto operator<=>(const OriginTag&, const OriginTag&) = default;
};

// One generation, split by provenance.  Component totals are combined with
// overflow-checked integer adds.
struct TaggedPopulation {
  std::map<OriginTag, PopVec> components;

  PopVec total(int d) const;
};

struct Trajectory {
  EnvironmentSequence env;
  int initial_type = 0;
  int generations = 0;
  std::uint64_t seed = 0;
  bool immigration_enabled = true;

  std::vector<PopVec> immigration;      // Y_0 .. Y_{n-1}; zeros when disabled
  std::vector<TaggedPopulation> tagged; // generations 0 .. n
  std::vector<PopVec> totals;           // X_0 .. X_n
};

// Simulates n generations from one ancestor of the given type.  Offspring
// inherit the parent's tag; cohort Y_k yields fresh tags (k, r, l) for
// l = 1..Y_k(r).  Draw order is fixed (tags in key order, parent types
// ascending, coordinates ascending, immigration last) so a (spec, env,
// seed) triple replays bit-identically.
Trajectory simulate_trajectory(const EnvironmentSequence& env, int initial_type, int n,
                               std::uint64_t seed, bool immigration_enabled = true);

// Regrouped view of a trajectory: the initial ancestor's line and, per
// arrival generation k, the descendants of cohort Y_k.  Grouping is exact
// integer arithmetic; totals re-add to X_n.
struct TrajectoryDecomposition {
  std::vector<PopVec> pure;                        // Z_0 .. Z_n
  std::map<int, std::vector<PopVec>> by_arrival;   // k -> cohort line by generation
};

TrajectoryDecomposition decompose_trajectory(const Trajectory& traj);

// Totals-only fast path for Monte Carlo work: tracks the initial line and
// the pooled immigrant lines, not individual tags.  Distribution of
// (pure, pure + immigrant) matches the tagged simulation.  When
// fixed_immigration is given those cohorts are injected instead of drawn.
struct SplitTotals {
  std::vector<PopVec> pure;         // Z_0 .. Z_n
  std::vector<PopVec> immigrant;    // X_n - Z_n
  std::vector<PopVec> immigration;  // realized Y_0 .. Y_{n-1}
};

SplitTotals simulate_split(const EnvironmentSequence& env, int initial_type, int n,
                           std::uint64_t seed, bool immigration_enabled = true,
                           const std::vector<PopVec>* fixed_immigration = nullptr);

// Same, drawing from a caller-owned stream (replicate streams in estimators).
SplitTotals simulate_split_stream(const EnvironmentSequence& env, int initial_type, int n,
                                  RngStream& g, bool immigration_enabled = true,
                                  const std::vector<PopVec>* fixed_immigration = nullptr);

PopVec unit_population(int d, int type);

}  // namespace mbprei
