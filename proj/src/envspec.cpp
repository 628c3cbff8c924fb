#include "mbprei/envspec.hpp"

#include <cmath>
#include <limits>

#include "mbprei/rng.hpp"

namespace mbprei {

namespace {

// Combine per-state moment values into a state_probs-weighted mixture.
MomentValue mix(const std::vector<MomentValue>& parts, const Vector& weights) {
  MomentValue out{MomentStatus::Exact, 0.0};
  double sum = 0.0;
  bool have_value = true;
  for (std::size_t s = 0; s < parts.size(); ++s) {
    if (weights[static_cast<Eigen::Index>(s)] <= 0.0) continue;
    const MomentValue& v = parts[s];
    if (v.status == MomentStatus::Infinite) return {MomentStatus::Infinite, std::nullopt};
    if (v.status == MomentStatus::Estimated && out.status != MomentStatus::Infinite)
      out.status = MomentStatus::Estimated;
    if (v.status == MomentStatus::FiniteAnalytic) out.status = MomentStatus::FiniteAnalytic;
    if (v.value && have_value)
      sum += weights[static_cast<Eigen::Index>(s)] * *v.value;
    else
      have_value = false;
  }
  if (out.status == MomentStatus::FiniteAnalytic) have_value = false;
  out.value = have_value ? std::optional<double>(sum) : std::nullopt;
  return out;
}

}  // namespace

std::vector<Violation> validate_spec(const EnvironmentSpec& spec) {
  std::vector<Violation> out;
  auto add = [&out](std::string where, std::string message) {
    out.push_back({std::move(where), std::move(message)});
  };

  if (spec.d < 2) add("d", "type count must be >= 2");
  if (spec.states.empty()) add("states", "at least one environment state is required");
  if (spec.state_probs.size() != static_cast<Eigen::Index>(spec.states.size())) {
    add("state_probs", "length must match the number of states");
  } else if (spec.state_probs.size() > 0) {
    double total = 0.0;
    for (Eigen::Index s = 0; s < spec.state_probs.size(); ++s) {
      if (spec.state_probs[s] < 0.0)
        add("state_probs[" + std::to_string(s) + "]", "probability must be >= 0");
      total += spec.state_probs[s];
    }
    if (std::abs(total - 1.0) > kProbTol)
      add("state_probs", "probabilities sum to " + std::to_string(total));
  }

  for (std::size_t s = 0; s < spec.states.size(); ++s) {
    const EnvState& st = spec.states[s];
    const std::string base = "states[" + std::to_string(s) + "]";
    if (static_cast<int>(st.offspring.size()) != spec.d)
      add(base + ".offspring", "need one offspring law per type");
    for (std::size_t r = 0; r < st.offspring.size(); ++r) {
      const std::string where = base + ".offspring[" + std::to_string(r) + "]";
      if (st.offspring[r].dim() != spec.d) add(where, "law dimension must equal d");
      for (const std::string& why : st.offspring[r].invalid_reasons()) add(where, why);
    }
    if (st.immigration.dim() != spec.d) add(base + ".immigration", "law dimension must equal d");
    for (const std::string& why : st.immigration.invalid_reasons())
      add(base + ".immigration", why);
    if (st.mean_override) {
      if (st.mean_override->rows() != spec.d || st.mean_override->cols() != spec.d)
        add(base + ".mean_override", "must be a d x d matrix");
      else if (!(st.mean_override->array() >= 0.0).all() ||
               !st.mean_override->allFinite())
        add(base + ".mean_override", "entries must be finite and >= 0");
    }
  }
  return out;
}

Matrix mean_matrix(const EnvState& state, int d) {
  if (state.mean_override) return *state.mean_override;
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) {
    const DiscreteLaw& law = state.offspring[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) {
      if (!law.coord_mean_finite(j))
        throw InfiniteMeanError("infinite offspring mean at entry (" + std::to_string(i) +
                                ", " + std::to_string(j) + ") and no mean_override given");
      m(i, j) = law.coord_mean(j);
    }
  }
  return m;
}

Matrix mean_matrix_or_inf(const EnvState& state, int d) {
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) {
    const DiscreteLaw& law = state.offspring[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j)
      m(i, j) = law.coord_mean_finite(j) ? law.coord_mean(j)
                                         : std::numeric_limits<double>::infinity();
  }
  return m;
}

std::vector<Matrix> mean_matrices(const EnvironmentSequence& env) {
  std::vector<Matrix> mats;
  mats.reserve(env.indices.size());
  for (int n = 0; n < env.length(); ++n) mats.push_back(mean_matrix(env.state(n), env.spec->d));
  return mats;
}

std::vector<int> draw_state_indices(const EnvironmentSpec& spec, int n, RngStream& g) {
  if (n < 0) throw SpecError("environment length must be >= 0");
  std::vector<double> probs(spec.state_probs.data(),
                            spec.state_probs.data() + spec.state_probs.size());
  std::discrete_distribution<int> pick(probs.begin(), probs.end());
  std::vector<int> indices;
  indices.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) indices.push_back(pick(g));
  return indices;
}

EnvironmentSequence sample_environment(const EnvironmentSpec& spec, int n, std::uint64_t seed) {
  EnvironmentSequence env;
  env.spec = &spec;
  env.seed = seed;
  RngStream g = make_stream(seed, kStreamEnvSetup);
  env.indices = draw_state_indices(spec, n, g);
  return env;
}

MomentReport law_moments(const EnvState& state, double p, int d) {
  MomentReport r;
  r.p = p;
  r.mean = mean_matrix_or_inf(state, d);
  r.offspring_p.reserve(static_cast<std::size_t>(d));
  r.xlogx.assign(static_cast<std::size_t>(d), {});
  for (int i = 0; i < d; ++i) {
    const DiscreteLaw& law = state.offspring[static_cast<std::size_t>(i)];
    r.offspring_p.push_back(law.total_p_moment(p));
    auto& row = r.xlogx[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) row.push_back(law.coord_xlogx(j, r.mean(i, j)));
  }
  r.immigration_logplus = state.immigration.total_logplus_scaled(1.0);
  r.immigration_p = state.immigration.total_p_moment(p);
  return r;
}

MomentReport aggregate_moments(const EnvironmentSpec& spec, double p) {
  std::vector<MomentReport> parts;
  parts.reserve(spec.states.size());
  for (const EnvState& st : spec.states) parts.push_back(law_moments(st, p, spec.d));

  MomentReport r;
  r.p = p;
  r.mean = Matrix::Zero(spec.d, spec.d);
  for (std::size_t s = 0; s < parts.size(); ++s)
    r.mean += spec.state_probs[static_cast<Eigen::Index>(s)] * parts[s].mean;

  auto collect = [&](auto&& pick) {
    std::vector<MomentValue> vals;
    vals.reserve(parts.size());
    for (const MomentReport& part : parts) vals.push_back(pick(part));
    return mix(vals, spec.state_probs);
  };

  for (int i = 0; i < spec.d; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    r.offspring_p.push_back(collect([&](const MomentReport& m) { return m.offspring_p[ii]; }));
    r.xlogx.emplace_back();
    for (int j = 0; j < spec.d; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      r.xlogx.back().push_back(collect([&](const MomentReport& m) { return m.xlogx[ii][jj]; }));
    }
  }
  r.immigration_logplus = collect([](const MomentReport& m) { return m.immigration_logplus; });
  r.immigration_p = collect([](const MomentReport& m) { return m.immigration_p; });
  return r;
}

}  // namespace mbprei
