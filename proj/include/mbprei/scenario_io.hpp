#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mbprei/envspec.hpp"
#include "mbprei/limits.hpp"
#include "mbprei/ranmat.hpp"
#include "mbprei/sim.hpp"

namespace mbprei {

using Json = nlohmann::ordered_json;

// Scenario schema (documented in README.md):
// {
//   "d": 2,
//   "state_probs": [0.5, 0.5],
//   "states": [
//     {
//       "offspring": [law, law],
//       "immigration": law,
//       "mean_override": [[1.0, 4.0], [0.25, 2.5]]   // optional, row-major
//     }
//   ]
// }
// law: {"kind": "finite", "atoms": [{"v": [1, 0], "p": 0.5}, ...]}
//    | {"kind": "marginals", "marginals": [
//         {"family": "deterministic", "k": 1} | {"family": "poisson", "mu": 2.0}
//       | {"family": "geometric", "q": 0.5}   | {"family": "zeta", "alpha": 3.0}, ...]}
EnvironmentSpec spec_from_json(const Json& j);
Json spec_to_json(const EnvironmentSpec& spec);

EnvironmentSpec load_scenario(const std::string& path);

Json violations_to_json(const std::vector<Violation>& violations);
Json moment_value_to_json(const MomentValue& v);
Json moment_report_to_json(const MomentReport& r);
Json spectral_report_to_json(const SpectralReport& r);
Json kappa_report_to_json(const KappaReport& r);
Json condition_report_to_json(const ConditionReport& r);
Json horizon_result_to_json(const HorizonResult& r);
Json direction_table_to_json(const DirectionTable& t);
Json mean_check_report_to_json(const MeanCheckReport& r);
Json lp_report_to_json(const LpReport& r);
Json nondegeneracy_report_to_json(const NondegeneracyReport& r);

Json trajectory_to_json(const Trajectory& traj);
// Columns: generation, origin, arrival, type, index, count_0..count_{d-1};
// one row per (generation, tag) component plus a total row per generation.
std::string trajectory_to_csv(const Trajectory& traj);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace mbprei
