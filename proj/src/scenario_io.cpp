#include "mbprei/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mbprei {

namespace {

double require_number(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    throw SpecError(where + ": missing numeric field '" + key + "'");
  return j[key].get<double>();
}

Marginal marginal_from_json(const Json& j, const std::string& where) {
  if (!j.contains("family") || !j["family"].is_string())
    throw SpecError(where + ": marginal needs a 'family' string");
  const std::string fam = j["family"].get<std::string>();
  Marginal m;
  if (fam == "deterministic") {
    m.family = Family::Deterministic;
    m.param = require_number(j, "k", where);
  } else if (fam == "poisson") {
    m.family = Family::Poisson;
    m.param = require_number(j, "mu", where);
  } else if (fam == "geometric") {
    m.family = Family::Geometric;
    m.param = require_number(j, "q", where);
  } else if (fam == "zeta") {
    m.family = Family::Zeta;
    m.param = require_number(j, "alpha", where);
  } else {
    throw SpecError(where + ": unknown family '" + fam + "'");
  }
  return m;
}

Json marginal_to_json(const Marginal& m) {
  Json j;
  switch (m.family) {
    case Family::Deterministic:
      j["family"] = "deterministic";
      j["k"] = static_cast<std::int64_t>(m.param);
      break;
    case Family::Poisson:
      j["family"] = "poisson";
      j["mu"] = m.param;
      break;
    case Family::Geometric:
      j["family"] = "geometric";
      j["q"] = m.param;
      break;
    case Family::Zeta:
      j["family"] = "zeta";
      j["alpha"] = m.param;
      break;
  }
  return j;
}

DiscreteLaw law_from_json(const Json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw SpecError(where + ": law needs a 'kind' string");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "finite") {
    if (!j.contains("atoms") || !j["atoms"].is_array())
      throw SpecError(where + ": finite law needs an 'atoms' array");
    std::vector<Atom> atoms;
    for (std::size_t a = 0; a < j["atoms"].size(); ++a) {
      const Json& ja = j["atoms"][a];
      const std::string aw = where + ".atoms[" + std::to_string(a) + "]";
      if (!ja.contains("v") || !ja["v"].is_array())
        throw SpecError(aw + ": needs a count vector 'v'");
      Atom atom;
      atom.value = PopVec(ja["v"].size());
      for (std::size_t c = 0; c < ja["v"].size(); ++c) {
        if (!ja["v"][c].is_number_integer())
          throw SpecError(aw + ": counts must be integers");
        atom.value[static_cast<Eigen::Index>(c)] = ja["v"][c].get<std::int64_t>();
      }
      atom.prob = require_number(ja, "p", aw);
      atoms.push_back(std::move(atom));
    }
    return DiscreteLaw::finite(std::move(atoms));
  }
  if (kind == "marginals") {
    if (!j.contains("marginals") || !j["marginals"].is_array())
      throw SpecError(where + ": marginals law needs a 'marginals' array");
    std::vector<Marginal> ms;
    for (std::size_t c = 0; c < j["marginals"].size(); ++c)
      ms.push_back(marginal_from_json(j["marginals"][c],
                                      where + ".marginals[" + std::to_string(c) + "]"));
    return DiscreteLaw::independent(std::move(ms));
  }
  throw SpecError(where + ": unknown law kind '" + kind + "'");
}

Json law_to_json(const DiscreteLaw& law) {
  Json j;
  if (law.is_finite()) {
    j["kind"] = "finite";
    j["atoms"] = Json::array();
    for (const Atom& a : law.atoms()) {
      Json ja;
      ja["v"] = Json::array();
      for (Eigen::Index c = 0; c < a.value.size(); ++c) ja["v"].push_back(a.value[c]);
      ja["p"] = a.prob;
      j["atoms"].push_back(std::move(ja));
    }
  } else {
    j["kind"] = "marginals";
    j["marginals"] = Json::array();
    for (const Marginal& m : law.marginals()) j["marginals"].push_back(marginal_to_json(m));
  }
  return j;
}

Json finite_or_string(double x) {
  if (std::isfinite(x)) return Json(x);
  return Json(x > 0 ? "inf" : "-inf");
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(finite_or_string(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json popvec_to_json(const PopVec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json optional_to_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

EnvironmentSpec spec_from_json(const Json& j) {
  if (!j.is_object()) throw SpecError("scenario: top level must be an object");
  EnvironmentSpec spec;
  if (!j.contains("d") || !j["d"].is_number_integer())
    throw SpecError("scenario: missing integer field 'd'");
  spec.d = j["d"].get<int>();
  if (!j.contains("states") || !j["states"].is_array())
    throw SpecError("scenario: missing 'states' array");
  if (!j.contains("state_probs") || !j["state_probs"].is_array())
    throw SpecError("scenario: missing 'state_probs' array");

  spec.state_probs = Vector(j["state_probs"].size());
  for (std::size_t s = 0; s < j["state_probs"].size(); ++s) {
    if (!j["state_probs"][s].is_number())
      throw SpecError("scenario: state_probs must be numbers");
    spec.state_probs[static_cast<Eigen::Index>(s)] = j["state_probs"][s].get<double>();
  }

  for (std::size_t s = 0; s < j["states"].size(); ++s) {
    const Json& js = j["states"][s];
    const std::string where = "states[" + std::to_string(s) + "]";
    if (!js.is_object()) throw SpecError(where + ": must be an object");
    EnvState st;
    if (!js.contains("offspring") || !js["offspring"].is_array())
      throw SpecError(where + ": missing 'offspring' array");
    for (std::size_t r = 0; r < js["offspring"].size(); ++r)
      st.offspring.push_back(
          law_from_json(js["offspring"][r], where + ".offspring[" + std::to_string(r) + "]"));
    if (!js.contains("immigration"))
      throw SpecError(where + ": missing 'immigration' law");
    st.immigration = law_from_json(js["immigration"], where + ".immigration");
    if (js.contains("mean_override")) {
      const Json& jm = js["mean_override"];
      if (!jm.is_array() || jm.empty())
        throw SpecError(where + ".mean_override: must be a matrix (array of rows)");
      Matrix m(jm.size(), jm[0].size());
      for (std::size_t i = 0; i < jm.size(); ++i) {
        if (!jm[i].is_array() || jm[i].size() != jm[0].size())
          throw SpecError(where + ".mean_override: ragged rows");
        for (std::size_t c = 0; c < jm[i].size(); ++c) {
          if (!jm[i][c].is_number())
            throw SpecError(where + ".mean_override: entries must be numbers");
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
              jm[i][c].get<double>();
        }
      }
      st.mean_override = std::move(m);
    }
    spec.states.push_back(std::move(st));
  }
  return spec;
}

Json spec_to_json(const EnvironmentSpec& spec) {
  Json j;
  j["d"] = spec.d;
  j["state_probs"] = Json::array();
  for (Eigen::Index s = 0; s < spec.state_probs.size(); ++s)
    j["state_probs"].push_back(spec.state_probs[s]);
  j["states"] = Json::array();
  for (const EnvState& st : spec.states) {
    Json js;
    js["offspring"] = Json::array();
    for (const DiscreteLaw& law : st.offspring) js["offspring"].push_back(law_to_json(law));
    js["immigration"] = law_to_json(st.immigration);
    if (st.mean_override) js["mean_override"] = matrix_to_json(*st.mean_override);
    j["states"].push_back(std::move(js));
  }
  return j;
}

EnvironmentSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open scenario file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("scenario parse error in " + path + ": " + e.what());
  }
  return spec_from_json(j);
}

Json violations_to_json(const std::vector<Violation>& violations) {
  Json out = Json::array();
  for (const Violation& v : violations) out.push_back({{"where", v.where}, {"message", v.message}});
  return out;
}

Json moment_value_to_json(const MomentValue& v) {
  Json j;
  j["status"] = to_string(v.status);
  j["value"] = optional_to_json(v.value);
  return j;
}

Json moment_report_to_json(const MomentReport& r) {
  Json j;
  j["p"] = r.p;
  j["mean"] = matrix_to_json(r.mean);
  j["offspring_p"] = Json::array();
  for (const MomentValue& v : r.offspring_p) j["offspring_p"].push_back(moment_value_to_json(v));
  j["xlogx"] = Json::array();
  for (const auto& row : r.xlogx) {
    Json jr = Json::array();
    for (const MomentValue& v : row) jr.push_back(moment_value_to_json(v));
    j["xlogx"].push_back(std::move(jr));
  }
  j["immigration_logplus"] = moment_value_to_json(r.immigration_logplus);
  j["immigration_p"] = moment_value_to_json(r.immigration_p);
  return j;
}

Json spectral_report_to_json(const SpectralReport& r) {
  Json j;
  j["n"] = r.n;
  j["reps"] = r.reps;
  j["gamma_hat"] = r.gamma_hat;
  j["std_error"] = r.std_error;
  j["cross_check"] = r.cross_check;
  j["cross_check_std_error"] = r.cross_check_std_error;
  j["diff_std_error"] = r.diff_std_error;
  j["regime"] = r.regime;
  return j;
}

Json kappa_report_to_json(const KappaReport& r) {
  Json j;
  j["s"] = r.s;
  j["enumerated"] = r.enumerated;
  j["per_n"] = Json::array();
  for (const KappaPoint& pt : r.per_n)
    j["per_n"].push_back({{"n", pt.n},
                          {"estimate", pt.estimate},
                          {"ci_low", pt.ci_low},
                          {"ci_high", pt.ci_high}});
  j["kappa_hat"] = r.kappa_hat;
  j["ci_low"] = r.ci_low;
  j["ci_high"] = r.ci_high;
  j["monotone_in_n"] = r.monotone_in_n;
  return j;
}

namespace {

Json envelope_to_json(const MomentEnvelope& e) {
  Json j;
  j["classification"] = e.classification;
  j["lower"] = optional_to_json(e.lower);
  j["upper"] = optional_to_json(e.upper);
  return j;
}

}  // namespace

Json condition_report_to_json(const ConditionReport& r) {
  Json j;
  j["h1_log_norm_moment"] = r.h1_value;
  Json h2;
  h2["allowable_per_state"] = r.h2_allowable;
  h2["all_allowable"] = r.h2_all_allowable;
  h2["positive_product_witness"] =
      r.h2_positive_witness ? Json(*r.h2_positive_witness) : Json(nullptr);
  j["h2"] = std::move(h2);
  j["h3_entry_ratio_bound"] = r.h3_bound ? Json(*r.h3_bound) : Json("violated: zero entry");
  j["xlogx"] = Json::array();
  for (const auto& row : r.xlogx) {
    Json jr = Json::array();
    for (const MomentValue& v : row) jr.push_back(moment_value_to_json(v));
    j["xlogx"].push_back(std::move(jr));
  }
  j["xlogx_all_finite"] = r.xlogx_all_finite;
  j["immigration_logplus"] = envelope_to_json(r.immigration_logplus);
  j["immigration_p"] = Json::array();
  for (const auto& [p, env] : r.immigration_p) {
    Json je = envelope_to_json(env);
    je["p"] = p;
    j["immigration_p"].push_back(std::move(je));
  }
  return j;
}

Json horizon_result_to_json(const HorizonResult& r) {
  Json j;
  j["horizon"] = r.horizon;
  j["contraction_factor"] = r.contraction_factor;
  j["achieved_discrepancy"] = r.achieved_discrepancy;
  return j;
}

Json direction_table_to_json(const DirectionTable& t) {
  Json j;
  j["horizon"] = t.horizon;
  j["u_term"] = vector_to_json(t.u_term);
  j["u0"] = vector_to_json(t.u[0]);
  j["lambda"] = t.lambda;
  j["log_growth"] = t.log_lambda_cum.back();
  return j;
}

Json mean_check_report_to_json(const MeanCheckReport& r) {
  Json j;
  j["mode"] = to_string(r.mode);
  j["initial_type"] = r.initial_type;
  j["n"] = r.n;
  j["reps"] = r.reps;
  j["formula"] = r.formula;
  j["mc_mean"] = r.mc_mean;
  j["diff"] = r.diff;
  j["std_error"] = r.std_error;
  j["pass"] = r.pass;
  return j;
}

Json lp_report_to_json(const LpReport& r) {
  Json j;
  j["p"] = r.p;
  j["initial_type"] = r.initial_type;
  j["reps"] = r.reps;
  j["kappa_minus_p"] = r.kappa_minus_p;
  j["kappa_ci_low"] = r.kappa_ci_low;
  j["kappa_ci_high"] = r.kappa_ci_high;
  j["offspring_p_finite"] = r.offspring_p_finite;
  j["immigration_p_finite"] = r.immigration_p_finite;
  j["predicted"] = r.predicted;
  j["per_n"] = Json::array();
  for (const LpPoint& pt : r.per_n)
    j["per_n"].push_back({{"n", pt.n},
                          {"estimate", pt.estimate},
                          {"ci_low", pt.ci_low},
                          {"ci_high", pt.ci_high}});
  j["observed"] = r.observed;
  j["top_half_range"] = r.top_half_range;
  j["top_half_ci_width"] = r.top_half_ci_width;
  return j;
}

Json nondegeneracy_report_to_json(const NondegeneracyReport& r) {
  Json j;
  j["initial_type"] = r.initial_type;
  j["reps"] = r.reps;
  j["eps"] = r.eps;
  j["per_n"] = Json::array();
  for (const ProbePoint& pt : r.per_n)
    j["per_n"].push_back({{"n", pt.n},
                          {"survival", pt.survival},
                          {"mean", pt.mean},
                          {"median", pt.median}});
  j["classification"] = r.classification;
  j["sup_proxy_mean"] = r.sup_proxy_mean;
  j["sup_proxy_ci_low"] = r.sup_proxy_ci_low;
  j["sup_proxy_ci_high"] = r.sup_proxy_ci_high;
  j["kappa_minus_1"] = r.kappa_minus_1;
  j["xlogx_all_finite"] = r.xlogx_all_finite;
  j["sup_integrable_guaranteed"] = r.sup_integrable_guaranteed;
  j["overflow_replicates"] = r.overflow_replicates;
  return j;
}

namespace {

Json tag_to_json(const OriginTag& tag) {
  Json j;
  if (tag.is_initial()) {
    j["kind"] = "initial";
  } else {
    j["kind"] = "immigrant";
    j["arrival"] = tag.arrival;
    j["type"] = tag.type;
    j["index"] = tag.index;
  }
  return j;
}

}  // namespace

Json trajectory_to_json(const Trajectory& traj) {
  Json j;
  j["d"] = traj.env.spec->d;
  j["initial_type"] = traj.initial_type;
  j["generations"] = traj.generations;
  j["seed"] = traj.seed;
  j["immigration_enabled"] = traj.immigration_enabled;
  j["env_indices"] = traj.env.indices;
  j["immigration"] = Json::array();
  for (const PopVec& y : traj.immigration) j["immigration"].push_back(popvec_to_json(y));
  j["populations"] = Json::array();
  for (std::size_t n = 0; n < traj.tagged.size(); ++n) {
    Json jn;
    jn["generation"] = n;
    jn["total"] = popvec_to_json(traj.totals[n]);
    jn["components"] = Json::array();
    for (const auto& [tag, counts] : traj.tagged[n].components) {
      Json jc = tag_to_json(tag);
      jc["counts"] = popvec_to_json(counts);
      jn["components"].push_back(std::move(jc));
    }
    j["populations"].push_back(std::move(jn));
  }
  return j;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  const int d = traj.env.spec->d;
  std::ostringstream out;
  out << "generation,kind,arrival,type,index";
  for (int c = 0; c < d; ++c) out << ",count_" << c;
  out << "\n";
  auto row = [&](std::size_t gen, const char* kind, const OriginTag* tag, const PopVec& counts) {
    out << gen << ',' << kind << ',';
    if (tag && !tag->is_initial())
      out << tag->arrival << ',' << tag->type << ',' << tag->index;
    else
      out << ",,";
    for (int c = 0; c < d; ++c) out << ',' << counts[c];
    out << "\n";
  };
  for (std::size_t n = 0; n < traj.tagged.size(); ++n) {
    for (const auto& [tag, counts] : traj.tagged[n].components)
      row(n, tag.is_initial() ? "initial" : "immigrant", &tag, counts);
    row(n, "total", nullptr, traj.totals[n]);
  }
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot write file: " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mbprei
