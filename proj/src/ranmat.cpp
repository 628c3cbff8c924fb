#include "mbprei/ranmat.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "mbprei/parallel.hpp"
#include "mbprei/rng.hpp"

namespace mbprei {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

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

std::vector<int> positive_prob_states(const EnvironmentSpec& spec) {
  std::vector<int> idx;
  for (Eigen::Index s = 0; s < spec.state_probs.size(); ++s)
    if (spec.state_probs[s] > 0.0) idx.push_back(static_cast<int>(s));
  return idx;
}

std::vector<Matrix> effective_matrices(const EnvironmentSpec& spec) {
  std::vector<Matrix> mats;
  mats.reserve(spec.states.size());
  for (const EnvState& st : spec.states) mats.push_back(mean_matrix(st, spec.d));
  return mats;
}

std::discrete_distribution<int> state_picker(const EnvironmentSpec& spec) {
  std::vector<double> probs(spec.state_probs.data(),
                            spec.state_probs.data() + spec.state_probs.size());
  return std::discrete_distribution<int>(probs.begin(), probs.end());
}

std::vector<int> sorted_n_list(std::span<const int> n_list) {
  if (n_list.empty()) throw SpecError("n list must not be empty");
  std::vector<int> ns(n_list.begin(), n_list.end());
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.front() < 1) throw SpecError("n values must be >= 1");
  return ns;
}

}  // namespace

double l1_operator_norm(const Matrix& m) {
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

bool is_allowable(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (!(m.row(i).array() > 0.0).any()) return false;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (!(m.col(j).array() > 0.0).any()) return false;
  return true;
}

bool is_positive(const Matrix& m) { return (m.array() > 0.0).all(); }

Matrix matprod(std::span<const Matrix> mats) {
  if (mats.empty()) throw SpecError("matprod needs at least one matrix");
  Matrix p = mats[0];
  for (std::size_t k = 1; k < mats.size(); ++k) {
    if (p.cols() != mats[k].rows())
      throw SpecError("matprod dimension mismatch at factor " + std::to_string(k));
    p = (p * mats[k]).eval();
  }
  return p;
}

PerronTriple perron(const Matrix& m, double tol, int max_iters) {
  if (m.rows() != m.cols() || m.rows() < 1) throw SpecError("perron needs a square matrix");
  if ((m.array() < 0.0).any()) throw SpecError("perron needs a nonnegative matrix");
  if (!is_allowable(m)) throw NumericalError("perron: matrix is not allowable");
  const Eigen::Index d = m.rows();

  // Asymmetric positive start: a periodic matrix then oscillates instead of
  // sitting on its symmetric eigenvector.
  Vector start(d);
  for (Eigen::Index i = 0; i < d; ++i) start[i] = static_cast<double>(i + 1);
  start /= start.sum();

  auto iterate = [&](const Matrix& a) {
    Vector u = start;
    for (int t = 0; t < max_iters; ++t) {
      Vector v = a * u;
      const double lam = v.lpNorm<1>();
      if (!(lam > 0.0)) throw NumericalError("perron: power iteration collapsed to zero");
      if ((v - lam * u).lpNorm<1>() <= tol * lam) return u;
      u = v / lam;
    }
    throw ConvergenceError("perron: power iteration did not converge (imprimitive input?)");
  };

  PerronTriple out;
  out.u = iterate(m);
  out.u /= out.u.sum();
  Vector w = iterate(m.transpose());
  out.rho = w.dot(m * out.u) / w.dot(out.u);
  out.v = w / w.dot(out.u);
  return out;
}

double DirectionTable::cum(int n) const {
  const auto k = static_cast<std::size_t>(n);
  return std::isfinite(lambda_cum[k]) ? lambda_cum[k] : std::exp(log_lambda_cum[k]);
}

Vector uniform_direction(int d) { return Vector::Constant(d, 1.0 / static_cast<double>(d)); }

DirectionTable forward_directions(std::span<const Matrix> mats, const Vector& u_term) {
  if (mats.empty()) throw SpecError("direction sweep needs at least one matrix");
  const Eigen::Index d = mats[0].rows();
  for (const Matrix& m : mats)
    if (m.rows() != d || m.cols() != d) throw SpecError("direction sweep: mixed dimensions");
  if (u_term.size() != d) throw SpecError("terminal direction has wrong dimension");
  if ((u_term.array() < 0.0).any() || !(u_term.lpNorm<1>() > 0.0))
    throw SpecError("terminal direction must be nonnegative and nonzero");

  const int n = static_cast<int>(mats.size());
  DirectionTable t;
  t.horizon = n;
  t.u_term = u_term / u_term.lpNorm<1>();
  t.u.assign(static_cast<std::size_t>(n) + 1, Vector());
  t.lambda.assign(static_cast<std::size_t>(n), 0.0);
  t.u[static_cast<std::size_t>(n)] = t.u_term;
  for (int k = n - 1; k >= 0; --k) {
    Vector v = mats[static_cast<std::size_t>(k)] * t.u[static_cast<std::size_t>(k) + 1];
    const double lam = v.lpNorm<1>();
    if (!(lam > 0.0))
      throw NumericalError("direction sweep hit a zero vector at step " + std::to_string(k));
    t.lambda[static_cast<std::size_t>(k)] = lam;
    t.u[static_cast<std::size_t>(k)] = v / lam;
  }
  t.lambda_cum.assign(static_cast<std::size_t>(n) + 1, 1.0);
  t.log_lambda_cum.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 0; k < n; ++k) {
    t.lambda_cum[static_cast<std::size_t>(k) + 1] =
        t.lambda_cum[static_cast<std::size_t>(k)] * t.lambda[static_cast<std::size_t>(k)];
    t.log_lambda_cum[static_cast<std::size_t>(k) + 1] =
        t.log_lambda_cum[static_cast<std::size_t>(k)] + std::log(t.lambda[static_cast<std::size_t>(k)]);
  }
  return t;
}

DirectionTable forward_directions(const EnvironmentSequence& env, const Vector& u_term) {
  const std::vector<Matrix> mats = mean_matrices(env);
  return forward_directions(mats, u_term);
}

HorizonResult choose_horizon(const EnvironmentSpec& spec, double tol, int cap,
                             std::uint64_t seed, int samples) {
  if (cap < 1) throw SpecError("horizon cap must be >= 1");
  if (samples < 1) throw SpecError("horizon probe needs at least one sample");
  const std::vector<Matrix> mats = effective_matrices(spec);
  const int d = spec.d;

  const Vector u1 = uniform_direction(d);
  Vector u2(d);
  for (int i = 0; i < d; ++i) u2[i] = static_cast<double>(i + 1);
  u2 /= u2.sum();

  RngStream g = make_stream(seed, kStreamHorizonProbe);
  auto pick = state_picker(spec);

  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(samples));
  int required = 0;
  bool all_converged = true;
  double worst_at_cap = 0.0;

  for (int s = 0; s < samples; ++s) {
    auto& gap = gaps[static_cast<std::size_t>(s)];
    gap.reserve(static_cast<std::size_t>(cap));
    Matrix p = Matrix::Identity(d, d);
    int reached = -1;
    for (int k = 0; k < cap; ++k) {
      p = (p * mats[static_cast<std::size_t>(pick(g))]).eval();
      const double norm = l1_operator_norm(p);
      if (!(norm > 0.0)) throw NumericalError("horizon probe hit a zero product");
      p /= norm;
      Vector a = p * u1;
      Vector b = p * u2;
      const double an = a.lpNorm<1>();
      const double bn = b.lpNorm<1>();
      if (!(an > 0.0) || !(bn > 0.0))
        throw NumericalError("horizon probe collapsed a direction to zero");
      gap.push_back((a / an - b / bn).lpNorm<1>());
      if (reached < 0 && gap.back() < tol) reached = k + 1;
    }
    if (reached < 0) {
      all_converged = false;
      worst_at_cap = std::max(worst_at_cap, gap.back());
    } else {
      required = std::max(required, reached);
    }
  }

  if (!all_converged)
    throw HorizonCapError("terminal-insensitivity tolerance not reached within the horizon cap",
                          worst_at_cap);

  HorizonResult r;
  r.horizon = required;
  for (const auto& gap : gaps)
    r.achieved_discrepancy =
        std::max(r.achieved_discrepancy, gap[static_cast<std::size_t>(required) - 1]);

  std::vector<double> ratios;
  for (const auto& gap : gaps)
    for (std::size_t k = 0; k + 1 < gap.size(); ++k)
      if (gap[k] > 1e-14 && gap[k + 1] > 0.0 && gap[k + 1] < gap[k])
        ratios.push_back(gap[k + 1] / gap[k]);
  if (!ratios.empty()) {
    auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
    std::nth_element(ratios.begin(), mid, ratios.end());
    r.contraction_factor = *mid;
  }
  return r;
}

int certified_margin(const EnvironmentSpec& spec, int cap, std::uint64_t seed) {
  try {
    return choose_horizon(spec, 1e-10, cap, seed).horizon;
  } catch (const HorizonCapError&) {
    // No contraction certificate; identities stay exact, only the quality of
    // the limiting-direction approximation degrades.
    return std::min(cap, 50);
  }
}

SpectralReport lyapunov_estimate(const EnvironmentSpec& spec, int n, int reps,
                                 std::uint64_t seed, int workers) {
  if (n < 1) throw SpecError("n must be >= 1");
  if (reps < 1) throw SpecError("reps must be >= 1");
  const std::vector<Matrix> mats = effective_matrices(spec);
  const int d = spec.d;

  std::vector<double> g_norm(static_cast<std::size_t>(reps));
  std::vector<double> g_lambda(static_cast<std::size_t>(reps));

  parallel_replicates(reps, seed, workers, [&](int r, RngStream& g) {
    auto pick = state_picker(spec);
    std::vector<Matrix> path;
    path.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) path.push_back(mats[static_cast<std::size_t>(pick(g))]);

    Matrix q = Matrix::Identity(d, d);
    double log_norm = 0.0;
    for (const Matrix& m : path) {
      q = (q * m).eval();
      const double c = l1_operator_norm(q);
      if (!(c > 0.0)) throw NumericalError("matrix product collapsed to zero");
      log_norm += std::log(c);
      q /= c;
    }
    g_norm[static_cast<std::size_t>(r)] = log_norm / n;

    const DirectionTable t = forward_directions(path, uniform_direction(d));
    g_lambda[static_cast<std::size_t>(r)] =
        t.log_lambda_cum[static_cast<std::size_t>(n)] / n;
  });

  const MeanStats a = mean_se(g_norm);
  const MeanStats b = mean_se(g_lambda);
  std::vector<double> diff(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r)
    diff[static_cast<std::size_t>(r)] =
        g_norm[static_cast<std::size_t>(r)] - g_lambda[static_cast<std::size_t>(r)];
  const MeanStats dd = mean_se(diff);

  SpectralReport rep;
  rep.n = n;
  rep.reps = reps;
  rep.gamma_hat = a.mean;
  rep.std_error = a.se;
  rep.cross_check = b.mean;
  rep.cross_check_std_error = b.se;
  rep.diff_std_error = dd.se;
  if (std::abs(a.mean) <= 4.0 * a.se)
    rep.regime = "near-critical";
  else
    rep.regime = a.mean > 0.0 ? "supercritical" : "subcritical";
  return rep;
}

namespace {

void require_s_in_interval(const EnvironmentSpec& spec, double s,
                           const std::vector<Matrix>& mats) {
  if (s > 0.0) throw SpecError("s must be <= 0");
  if (s == 0.0) return;
  for (int idx : positive_prob_states(spec))
    if (!is_positive(mats[static_cast<std::size_t>(idx)]))
      throw NumericalError("s is outside the admissible interval: zero mean entry with s < 0");
}

}  // namespace

KappaReport kappa_estimate(const EnvironmentSpec& spec, double s,
                           std::span<const int> n_list, int reps,
                           std::uint64_t seed, int workers) {
  if (reps < 2) throw SpecError("reps must be >= 2");
  const std::vector<int> ns = sorted_n_list(n_list);
  const std::vector<Matrix> mats = effective_matrices(spec);
  require_s_in_interval(spec, s, mats);
  const int d = spec.d;
  const int max_n = ns.back();

  std::vector<std::vector<double>> vals(ns.size(),
                                        std::vector<double>(static_cast<std::size_t>(reps)));

  parallel_replicates(reps, seed, workers, [&](int r, RngStream& g) {
    auto pick = state_picker(spec);
    Matrix q = Matrix::Identity(d, d);
    double log_norm = 0.0;
    std::size_t next = 0;
    for (int k = 1; k <= max_n && next < ns.size(); ++k) {
      q = (q * mats[static_cast<std::size_t>(pick(g))]).eval();
      const double c = l1_operator_norm(q);
      if (!(c > 0.0)) throw NumericalError("matrix product collapsed to zero");
      log_norm += std::log(c);
      q /= c;
      if (k == ns[next]) {
        vals[next][static_cast<std::size_t>(r)] = std::exp(s * log_norm);
        ++next;
      }
    }
  });

  KappaReport rep;
  rep.s = s;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const MeanStats st = mean_se(vals[i]);
    KappaPoint pt;
    pt.n = ns[i];
    const double inv_n = 1.0 / ns[i];
    pt.estimate = std::pow(st.mean, inv_n);
    const double lo = st.mean - kCiZ * st.se;
    pt.ci_low = lo > 0.0 ? std::pow(lo, inv_n) : 0.0;
    pt.ci_high = std::pow(st.mean + kCiZ * st.se, inv_n);
    rep.per_n.push_back(pt);
  }
  rep.kappa_hat = rep.per_n.back().estimate;
  rep.ci_low = rep.per_n.back().ci_low;
  rep.ci_high = rep.per_n.back().ci_high;
  rep.monotone_in_n = true;
  for (std::size_t i = 0; i + 1 < rep.per_n.size(); ++i)
    if (rep.per_n[i].estimate > rep.per_n[i + 1].ci_high) rep.monotone_in_n = false;
  return rep;
}

KappaReport kappa_enumerate(const EnvironmentSpec& spec, double s,
                            std::span<const int> n_list) {
  const std::vector<int> ns = sorted_n_list(n_list);
  const std::vector<Matrix> mats = effective_matrices(spec);
  require_s_in_interval(spec, s, mats);
  const std::vector<int> live = positive_prob_states(spec);
  const int d = spec.d;
  const int max_n = ns.back();

  double words = 1.0;
  for (int k = 0; k < max_n; ++k) words *= static_cast<double>(live.size());
  if (words > 2.0e7)
    throw NumericalError("enumeration over environment words is too large");

  KappaReport rep;
  rep.s = s;
  rep.enumerated = true;

  for (int n : ns) {
    double total = 0.0;
    // Depth-first over words, carrying the renormalized product and weight.
    std::function<void(int, const Matrix&, double, double)> walk =
        [&](int depth, const Matrix& q, double log_norm, double weight) {
          if (depth == n) {
            total += weight * std::exp(s * log_norm);
            return;
          }
          for (int idx : live) {
            Matrix next = (q * mats[static_cast<std::size_t>(idx)]).eval();
            const double c = l1_operator_norm(next);
            if (!(c > 0.0)) throw NumericalError("matrix product collapsed to zero");
            next /= c;
            walk(depth + 1, next, log_norm + std::log(c),
                 weight * spec.state_probs[idx]);
          }
        };
    walk(0, Matrix::Identity(d, d), 0.0, 1.0);

    KappaPoint pt;
    pt.n = n;
    pt.estimate = std::pow(total, 1.0 / n);
    pt.ci_low = pt.estimate;
    pt.ci_high = pt.estimate;
    rep.per_n.push_back(pt);
  }
  rep.kappa_hat = rep.per_n.back().estimate;
  rep.ci_low = rep.kappa_hat;
  rep.ci_high = rep.kappa_hat;
  rep.monotone_in_n = true;
  for (std::size_t i = 0; i + 1 < rep.per_n.size(); ++i)
    if (rep.per_n[i].estimate > rep.per_n[i + 1].estimate + 1e-15) rep.monotone_in_n = false;
  return rep;
}

namespace {

using BoolPattern = std::vector<char>;  // row-major d x d

BoolPattern pattern_of(const Matrix& m) {
  const auto d = static_cast<std::size_t>(m.rows());
  BoolPattern p(d * d, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      p[i * d + j] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0 ? 1 : 0;
  return p;
}

BoolPattern bool_product(const BoolPattern& a, const BoolPattern& b, std::size_t d) {
  BoolPattern out(d * d, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      if (!a[i * d + k]) continue;
      for (std::size_t j = 0; j < d; ++j)
        if (b[k * d + j]) out[i * d + j] = 1;
    }
  return out;
}

bool all_ones(const BoolPattern& p) {
  return std::all_of(p.begin(), p.end(), [](char c) { return c != 0; });
}

// Shortest length of a product of positive-probability state matrices whose
// zero-pattern is strictly positive; capped at 2 d^2 factors.
std::optional<int> positive_product_witness(const std::vector<Matrix>& mats,
                                            const std::vector<int>& live, int d) {
  if (live.empty()) return std::nullopt;
  const auto dd = static_cast<std::size_t>(d);
  std::vector<BoolPattern> generators;
  generators.reserve(live.size());
  for (int idx : live) generators.push_back(pattern_of(mats[static_cast<std::size_t>(idx)]));

  std::set<BoolPattern> seen;
  std::vector<BoolPattern> frontier;
  for (const auto& gpat : generators)
    if (seen.insert(gpat).second) frontier.push_back(gpat);

  const int cap = 2 * d * d;
  for (int len = 1; len <= cap; ++len) {
    for (const auto& p : frontier)
      if (all_ones(p)) return len;
    std::vector<BoolPattern> next;
    for (const auto& p : frontier)
      for (const auto& gpat : generators) {
        BoolPattern q = bool_product(p, gpat, dd);
        if (seen.insert(q).second) next.push_back(std::move(q));
      }
    if (next.empty()) break;  // pattern semigroup exhausted
    frontier = std::move(next);
  }
  return std::nullopt;
}

}  // namespace

ConditionReport check_conditions(const EnvironmentSpec& spec, std::span<const double> p_list) {
  const std::vector<Matrix> mats = effective_matrices(spec);
  const std::vector<int> live = positive_prob_states(spec);
  const int d = spec.d;

  ConditionReport rep;

  for (int idx : live) {
    const double norm = l1_operator_norm(mats[static_cast<std::size_t>(idx)]);
    rep.h1_value += spec.state_probs[idx] * (norm > 1.0 ? std::log(norm) : 0.0);
  }

  rep.h2_allowable.reserve(spec.states.size());
  for (const Matrix& m : mats) rep.h2_allowable.push_back(is_allowable(m));
  rep.h2_all_allowable = true;
  for (int idx : live)
    if (!rep.h2_allowable[static_cast<std::size_t>(idx)]) rep.h2_all_allowable = false;
  rep.h2_positive_witness = positive_product_witness(mats, live, d);

  double ratio = 1.0;
  bool has_zero = false;
  for (int idx : live) {
    const Matrix& m = mats[static_cast<std::size_t>(idx)];
    const double lo = m.minCoeff();
    const double hi = m.maxCoeff();
    if (!(lo > 0.0)) {
      has_zero = true;
      break;
    }
    ratio = std::max(ratio, hi / lo);
  }
  rep.h3_bound = has_zero ? std::nullopt : std::optional<double>(ratio);

  const MomentReport agg = aggregate_moments(spec, p_list.empty() ? 1.0 : p_list.front());
  rep.xlogx = agg.xlogx;
  rep.xlogx_all_finite = true;
  for (const auto& row : rep.xlogx)
    for (const MomentValue& v : row)
      if (!v.finite()) rep.xlogx_all_finite = false;

  // Column-sum envelope: min col sum <= <M u, 1> <= max col sum for any
  // direction u with ||u||_1 = 1, u >= 0.
  std::vector<double> mincol(spec.states.size()), maxcol(spec.states.size());
  for (std::size_t s = 0; s < mats.size(); ++s) {
    mincol[s] = mats[s].colwise().sum().minCoeff();
    maxcol[s] = mats[s].colwise().sum().maxCoeff();
  }

  auto bracket = [&](auto&& state_value, bool value_is_infinite) {
    MomentEnvelope env;
    if (value_is_infinite) {
      env.classification = "infinite";
      return env;
    }
    double lo = 0.0, hi = 0.0;
    bool have_lo = true, have_hi = true;
    for (int idx : live) {
      const auto s = static_cast<std::size_t>(idx);
      const double w = spec.state_probs[idx];
      std::optional<double> vlo = state_value(s, maxcol[s]);
      if (vlo)
        lo += w * *vlo;
      else
        have_lo = false;
      if (mincol[s] > 0.0) {
        std::optional<double> vhi = state_value(s, mincol[s]);
        if (vhi)
          hi += w * *vhi;
        else
          have_hi = false;
      } else {
        have_hi = false;
        env.classification = "indeterminate-by-envelope";
      }
    }
    if (have_lo) env.lower = lo;
    if (have_hi) env.upper = hi;
    return env;
  };

  rep.immigration_logplus = bracket(
      [&](std::size_t s, double col) {
        return spec.states[s].immigration.total_logplus_scaled(col).value;
      },
      false);

  for (double p : p_list) {
    bool infinite = false;
    for (int idx : live)
      if (!spec.states[static_cast<std::size_t>(idx)].immigration.total_p_moment(p).finite())
        infinite = true;
    MomentEnvelope env = bracket(
        [&](std::size_t s, double col) -> std::optional<double> {
          const MomentValue v = spec.states[s].immigration.total_p_moment(p);
          if (!v.value) return std::nullopt;
          return *v.value / std::pow(col, p);
        },
        infinite);
    rep.immigration_p.emplace_back(p, env);
  }

  return rep;
}

}  // namespace mbprei
