#include "mbprei/laws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mbprei {

namespace {

constexpr double kTailEps = 1e-13;
constexpr std::size_t kPmfCap = 1 << 21;
constexpr std::int64_t kPerDrawCap = 10'000'000;

bool is_nonneg_integer(double x) {
  return x >= 0.0 && x == std::floor(x) && x <= 9.007199254740992e15;
}

double logplus(double x) { return x > 1.0 ? std::log(x) : 0.0; }

bool popvec_less(const PopVec& a, const PopVec& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(),
                                      b.data(), b.data() + b.size());
}

}  // namespace

const char* to_string(MomentStatus s) {
  switch (s) {
    case MomentStatus::Exact: return "exact";
    case MomentStatus::FiniteAnalytic: return "finite (analytic)";
    case MomentStatus::Estimated: return "estimated";
    case MomentStatus::Infinite: return "infinite";
  }
  return "unknown";
}

std::optional<std::string> Marginal::invalid_reason() const {
  switch (family) {
    case Family::Deterministic:
      if (!is_nonneg_integer(param)) return "deterministic value must be an integer >= 0";
      return std::nullopt;
    case Family::Poisson:
      if (!(param > 0.0) || !std::isfinite(param)) return "poisson mean must be > 0";
      return std::nullopt;
    case Family::Geometric:
      if (!(param > 0.0) || !(param <= 1.0)) return "geometric success probability must be in (0, 1]";
      return std::nullopt;
    case Family::Zeta:
      if (!(param > 1.0) || !std::isfinite(param)) return "zeta exponent must be > 1";
      return std::nullopt;
  }
  return "unknown marginal family";
}

bool Marginal::mean_finite() const {
  return family != Family::Zeta || param > 2.0;
}

double Marginal::mean() const {
  switch (family) {
    case Family::Deterministic: return param;
    case Family::Poisson: return param;
    case Family::Geometric: return (1.0 - param) / param;
    case Family::Zeta:
      if (param <= 2.0)
        throw InfiniteMeanError("infinite offspring mean: zeta exponent <= 2");
      return std::riemann_zeta(param - 1.0) / std::riemann_zeta(param);
  }
  throw SpecError("unknown marginal family");
}

bool Marginal::p_moment_finite(double p) const {
  if (p <= 0.0) return true;
  return family != Family::Zeta || p < param - 1.0;
}

bool Marginal::xlogx_finite() const {
  return family != Family::Zeta || param > 2.0;
}

std::int64_t sample_zeta(double alpha, RngStream& g) {
  // Devroye's rejection sampler with a Pareto envelope.
  const double am1 = alpha - 1.0;
  const double b = std::pow(2.0, am1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    const double u = 1.0 - unif(g);
    const double v = unif(g);
    const double x = std::floor(std::pow(u, -1.0 / am1));
    if (!(x >= 1.0) || x > 4.0e18) continue;
    const double t = std::pow(1.0 + 1.0 / x, am1);
    if (v * x * (t - 1.0) / (b - 1.0) <= t / b) return static_cast<std::int64_t>(x);
  }
}

std::int64_t Marginal::sample(RngStream& g) const {
  switch (family) {
    case Family::Deterministic:
      return static_cast<std::int64_t>(param);
    case Family::Poisson:
      return std::poisson_distribution<std::int64_t>(param)(g);
    case Family::Geometric:
      if (param >= 1.0) return 0;
      return std::geometric_distribution<std::int64_t>(param)(g);
    case Family::Zeta:
      return sample_zeta(param, g);
  }
  throw SpecError("unknown marginal family");
}

std::int64_t Marginal::sample_sum(std::int64_t count, RngStream& g) const {
  if (count < 0) throw SpecError("negative particle count");
  if (count == 0) return 0;
  if (count == 1) return sample(g);
  switch (family) {
    case Family::Deterministic:
      return checked_mul(count, static_cast<std::int64_t>(param));
    case Family::Poisson:
      return std::poisson_distribution<std::int64_t>(static_cast<double>(count) * param)(g);
    case Family::Geometric:
      if (param >= 1.0) return 0;
      return std::negative_binomial_distribution<std::int64_t>(count, param)(g);
    case Family::Zeta: {
      if (count > kPerDrawCap)
        throw OverflowError("zeta offspring population too large to sample per particle");
      std::int64_t total = 0;
      for (std::int64_t i = 0; i < count; ++i) total = checked_add(total, sample_zeta(param, g));
      return total;
    }
  }
  throw SpecError("unknown marginal family");
}

std::optional<std::vector<double>> Marginal::pmf_table(double tail_eps, std::size_t cap) const {
  std::vector<double> pmf;
  switch (family) {
    case Family::Deterministic: {
      const auto k = static_cast<std::size_t>(param);
      if (k + 1 > cap) return std::nullopt;
      pmf.assign(k + 1, 0.0);
      pmf[k] = 1.0;
      return pmf;
    }
    case Family::Poisson: {
      double term = std::exp(-param);
      double mass = term;
      pmf.push_back(term);
      for (std::size_t k = 1; mass < 1.0 - tail_eps; ++k) {
        if (k >= cap) return std::nullopt;
        term *= param / static_cast<double>(k);
        pmf.push_back(term);
        mass += term;
      }
      return pmf;
    }
    case Family::Geometric: {
      if (param >= 1.0) return std::vector<double>{1.0};
      double term = param;
      double mass = term;
      pmf.push_back(term);
      while (mass < 1.0 - tail_eps) {
        if (pmf.size() >= cap) return std::nullopt;
        term *= 1.0 - param;
        pmf.push_back(term);
        mass += term;
      }
      return pmf;
    }
    case Family::Zeta: {
      // Tail bound: sum_{k>K} k^-a <= K^(1-a) / (a-1).
      const double alpha = param;
      const double z = std::riemann_zeta(alpha);
      const double need = tail_eps * z;
      const double k_needed = std::pow(need * (alpha - 1.0), 1.0 / (1.0 - alpha));
      if (!(k_needed < static_cast<double>(cap))) return std::nullopt;
      const auto kmax = static_cast<std::size_t>(std::ceil(k_needed)) + 1;
      pmf.assign(kmax + 1, 0.0);
      for (std::size_t k = 1; k <= kmax; ++k)
        pmf[k] = std::pow(static_cast<double>(k), -alpha) / z;
      return pmf;
    }
  }
  return std::nullopt;
}

DiscreteLaw DiscreteLaw::finite(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return popvec_less(a.value, b.value); });
  FiniteData data;
  data.cum.reserve(atoms.size());
  double running = 0.0;
  for (const Atom& a : atoms) {
    running += a.prob;
    data.cum.push_back(running);
  }
  data.atoms = std::move(atoms);
  DiscreteLaw law;
  law.data_ = std::move(data);
  return law;
}

DiscreteLaw DiscreteLaw::independent(std::vector<Marginal> marginals) {
  DiscreteLaw law;
  law.data_ = std::move(marginals);
  return law;
}

int DiscreteLaw::dim() const {
  if (is_finite()) {
    const auto& a = atoms();
    return a.empty() ? 0 : static_cast<int>(a.front().value.size());
  }
  return static_cast<int>(marginals().size());
}

std::vector<std::string> DiscreteLaw::invalid_reasons() const {
  std::vector<std::string> reasons;
  if (is_finite()) {
    const auto& a = atoms();
    if (a.empty()) {
      reasons.push_back("finite pmf has no atoms");
      return reasons;
    }
    const auto d = a.front().value.size();
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].value.size() != d) reasons.push_back("finite pmf atoms have mixed dimensions");
      if ((a[i].value.array() < 0).any()) reasons.push_back("finite pmf atom has a negative count");
      if (!(a[i].prob > 0.0)) reasons.push_back("finite pmf probability must be > 0");
      if (i + 1 < a.size() && !popvec_less(a[i].value, a[i + 1].value) &&
          !popvec_less(a[i + 1].value, a[i].value))
        reasons.push_back("finite pmf has duplicate atoms");
      total += a[i].prob;
    }
    if (std::abs(total - 1.0) > kProbTol)
      reasons.push_back("finite pmf probabilities sum to " + std::to_string(total));
  } else {
    if (marginals().empty()) reasons.push_back("no marginals given");
    for (std::size_t j = 0; j < marginals().size(); ++j)
      if (auto why = marginals()[j].invalid_reason())
        reasons.push_back("marginal " + std::to_string(j) + ": " + *why);
  }
  return reasons;
}

bool DiscreteLaw::coord_mean_finite(int j) const {
  if (is_finite()) return true;
  return marginals()[j].mean_finite();
}

double DiscreteLaw::coord_mean(int j) const {
  if (is_finite()) {
    double m = 0.0;
    for (const Atom& a : atoms()) m += a.prob * static_cast<double>(a.value[j]);
    return m;
  }
  return marginals()[j].mean();
}

Vector DiscreteLaw::mean_or_inf() const {
  const int d = dim();
  Vector m(d);
  for (int j = 0; j < d; ++j)
    m[j] = coord_mean_finite(j) ? coord_mean(j) : std::numeric_limits<double>::infinity();
  return m;
}

MomentValue DiscreteLaw::coord_p_moment(int j, double p) const {
  if (is_finite()) {
    double v = 0.0;
    for (const Atom& a : atoms()) v += a.prob * std::pow(static_cast<double>(a.value[j]), p);
    return {MomentStatus::Exact, v};
  }
  const Marginal& m = marginals()[j];
  if (!m.p_moment_finite(p)) return {MomentStatus::Infinite, std::nullopt};
  if (m.family == Family::Deterministic)
    return {MomentStatus::Exact, std::pow(m.param, p)};
  if (m.family == Family::Zeta) {
    // E N^p = zeta(alpha - p) / zeta(alpha), defined since p < alpha - 1.
    return {MomentStatus::Estimated,
            std::riemann_zeta(m.param - p) / std::riemann_zeta(m.param)};
  }
  auto pmf = m.pmf_table(kTailEps, kPmfCap);
  if (!pmf) return {MomentStatus::FiniteAnalytic, std::nullopt};
  double v = 0.0;
  for (std::size_t k = 0; k < pmf->size(); ++k)
    v += (*pmf)[k] * std::pow(static_cast<double>(k), p);
  return {MomentStatus::Estimated, v};
}

MomentValue DiscreteLaw::coord_xlogx(int j, double m) const {
  if (!std::isfinite(m)) {
    // No finite mean to normalize by; the moment itself diverges here too.
    return {MomentStatus::Infinite, std::nullopt};
  }
  if (is_finite()) {
    double v = 0.0;
    if (m > 0.0)
      for (const Atom& a : atoms()) {
        const double x = static_cast<double>(a.value[j]) / m;
        v += a.prob * x * logplus(x);
      }
    return {MomentStatus::Exact, v};
  }
  const Marginal& mg = marginals()[j];
  if (!mg.xlogx_finite()) return {MomentStatus::Infinite, std::nullopt};
  if (mg.family == Family::Deterministic) {
    const double x = m > 0.0 ? mg.param / m : 0.0;
    return {MomentStatus::Exact, x * logplus(x)};
  }
  return {MomentStatus::FiniteAnalytic, std::nullopt};
}

std::optional<std::vector<double>> DiscreteLaw::total_pmf(double tail_eps) const {
  if (is_finite()) {
    std::int64_t max_total = 0;
    for (const Atom& a : atoms()) max_total = std::max(max_total, a.value.sum());
    std::vector<double> pmf(static_cast<std::size_t>(max_total) + 1, 0.0);
    for (const Atom& a : atoms()) pmf[static_cast<std::size_t>(a.value.sum())] += a.prob;
    return pmf;
  }
  std::vector<double> acc{1.0};
  for (const Marginal& m : marginals()) {
    auto pmf = m.pmf_table(tail_eps, kPmfCap);
    if (!pmf) return std::nullopt;
    if (acc.size() * pmf->size() > (std::size_t{1} << 26)) return std::nullopt;
    std::vector<double> next(acc.size() + pmf->size() - 1, 0.0);
    for (std::size_t a = 0; a < acc.size(); ++a) {
      if (acc[a] == 0.0) continue;
      for (std::size_t b = 0; b < pmf->size(); ++b) next[a + b] += acc[a] * (*pmf)[b];
    }
    acc = std::move(next);
  }
  return acc;
}

MomentValue DiscreteLaw::total_p_moment(double p) const {
  if (!is_finite())
    for (const Marginal& m : marginals())
      if (!m.p_moment_finite(p)) return {MomentStatus::Infinite, std::nullopt};
  auto pmf = total_pmf(kTailEps);
  if (!pmf) return {MomentStatus::FiniteAnalytic, std::nullopt};
  double v = 0.0;
  for (std::size_t k = 0; k < pmf->size(); ++k)
    v += (*pmf)[k] * std::pow(static_cast<double>(k), p);
  const bool exact = is_finite() ||
      std::all_of(marginals().begin(), marginals().end(),
                  [](const Marginal& m) { return m.family == Family::Deterministic; });
  return {exact ? MomentStatus::Exact : MomentStatus::Estimated, v};
}

MomentValue DiscreteLaw::total_logplus_scaled(double divisor) const {
  auto pmf = total_pmf(kTailEps);
  if (!pmf) return {MomentStatus::FiniteAnalytic, std::nullopt};
  double v = 0.0;
  for (std::size_t k = 1; k < pmf->size(); ++k)
    v += (*pmf)[k] * logplus(static_cast<double>(k) / divisor);
  const bool exact = is_finite() ||
      std::all_of(marginals().begin(), marginals().end(),
                  [](const Marginal& m) { return m.family == Family::Deterministic; });
  return {exact ? MomentStatus::Exact : MomentStatus::Estimated, v};
}

PopVec DiscreteLaw::sample(RngStream& g) const {
  if (is_finite()) {
    const auto& data = std::get<FiniteData>(data_);
    std::uniform_real_distribution<double> unif(0.0, data.cum.back());
    const double u = unif(g);
    const auto it = std::upper_bound(data.cum.begin(), data.cum.end(), u);
    const auto idx = std::min<std::size_t>(it - data.cum.begin(), data.atoms.size() - 1);
    return data.atoms[idx].value;
  }
  const auto& ms = marginals();
  PopVec v(static_cast<Eigen::Index>(ms.size()));
  for (std::size_t j = 0; j < ms.size(); ++j) v[static_cast<Eigen::Index>(j)] = ms[j].sample(g);
  return v;
}

PopVec DiscreteLaw::sample_sum(std::int64_t count, RngStream& g) const {
  const int d = dim();
  PopVec total = PopVec::Zero(d);
  if (count <= 0) return total;
  if (count == 1) return sample(g);
  if (is_finite()) {
    // Multinomial split over atoms via sequential binomials.
    const auto& data = std::get<FiniteData>(data_);
    std::int64_t remaining = count;
    double mass = data.cum.back();
    for (std::size_t a = 0; a < data.atoms.size() && remaining > 0; ++a) {
      std::int64_t n_a;
      if (a + 1 == data.atoms.size()) {
        n_a = remaining;
      } else {
        const double q = std::clamp(data.atoms[a].prob / mass, 0.0, 1.0);
        n_a = std::binomial_distribution<std::int64_t>(remaining, q)(g);
      }
      if (n_a > 0)
        for (int j = 0; j < d; ++j)
          total[j] = checked_add(total[j], checked_mul(n_a, data.atoms[a].value[j]));
      remaining -= n_a;
      mass -= data.atoms[a].prob;
    }
    return total;
  }
  const auto& ms = marginals();
  for (std::size_t j = 0; j < ms.size(); ++j)
    total[static_cast<Eigen::Index>(j)] = ms[j].sample_sum(count, g);
  return total;
}

}  // namespace mbprei
