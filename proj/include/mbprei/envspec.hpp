#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mbprei/common.hpp"
#include "mbprei/laws.hpp"

namespace mbprei {

// One environment state: d offspring laws (one per parent type) and one
// immigration law, all d-dimensional.  When an offspring mean is analytically
// infinite (heavy-tailed marginals) the state may carry mean_override, which
// replaces the analytic mean matrix as the normalization baseline; the laws
// themselves still drive sampling and moment reports.
struct EnvState {
  std::vector<DiscreteLaw> offspring;
  DiscreteLaw immigration;
  std::optional<Matrix> mean_override;
};

struct EnvironmentSpec {
  int d = 0;
  std::vector<EnvState> states;
  Vector state_probs;
};

// A realized i.i.d. draw of state indices; `spec` is non-owning.
struct EnvironmentSequence {
  const EnvironmentSpec* spec = nullptr;
  std::vector<int> indices;
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(indices.size()); }
  const EnvState& state(int n) const { return spec->states[indices[n]]; }
};

struct Violation {
  std::string where;
  std::string message;
};

std::vector<Violation> validate_spec(const EnvironmentSpec& spec);

// Row i = mean offspring vector of a type-i parent: M(i,j) = E N^i(j).
// Uses mean_override when present; throws InfiniteMeanError when an entry
// has no finite analytic mean and no override is given.
Matrix mean_matrix(const EnvState& state, int d);

// As above but +inf entries instead of throwing, and no override applied;
// this is the analytic view used in moment reports.
Matrix mean_matrix_or_inf(const EnvState& state, int d);

std::vector<Matrix> mean_matrices(const EnvironmentSequence& env);

EnvironmentSequence sample_environment(const EnvironmentSpec& spec, int n, std::uint64_t seed);

// i.i.d. state indices drawn from a caller-owned stream.
std::vector<int> draw_state_indices(const EnvironmentSpec& spec, int n, RngStream& g);

// Moment survey of one state (or the whole spec, weighted by state_probs).
//   mean          analytic mean matrix, +inf where undefined
//   offspring_p   per parent type, E |N^i|^p
//   xlogx         per (i,j), E (N^i(j)/M(i,j)) log+ (N^i(j)/M(i,j))
//   immigration_logplus  E log+ |Y|
//   immigration_p        E |Y|^p
struct MomentReport {
  double p = 1.0;
  Matrix mean;
  std::vector<MomentValue> offspring_p;
  std::vector<std::vector<MomentValue>> xlogx;
  MomentValue immigration_logplus;
  MomentValue immigration_p;
};

MomentReport law_moments(const EnvState& state, double p, int d);
MomentReport aggregate_moments(const EnvironmentSpec& spec, double p);

}  // namespace mbprei
