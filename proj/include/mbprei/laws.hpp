#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mbprei/common.hpp"
#include "mbprei/rng.hpp"

namespace mbprei {

// Finiteness classification for a moment of a law.
//   Exact          closed finite sum, value bit-reproducible
//   FiniteAnalytic finite by the family's parameter range, no value computed
//   Estimated      value from a tail-truncated series (tail mass <= 1e-13)
//   Infinite       diverges for the given parameters
enum class MomentStatus { Exact, FiniteAnalytic, Estimated, Infinite };

struct MomentValue {
  MomentStatus status = MomentStatus::FiniteAnalytic;
  std::optional<double> value;

  bool finite() const { return status != MomentStatus::Infinite; }
};

const char* to_string(MomentStatus s);

enum class Family { Deterministic, Poisson, Geometric, Zeta };

// One-dimensional offspring-count family on {0,1,2,...} ({1,2,...} for Zeta).
//   Deterministic(k>=0)   point mass at k
//   Poisson(mu>0)
//   Geometric(q in (0,1]) P(k) = q(1-q)^k, mean (1-q)/q
//   Zeta(alpha>1)         P(k) = k^-alpha / zeta(alpha), k >= 1
struct Marginal {
  Family family = Family::Deterministic;
  double param = 0.0;

  std::optional<std::string> invalid_reason() const;
  bool mean_finite() const;
  double mean() const;  // throws InfiniteMeanError when undefined
  bool p_moment_finite(double p) const;
  bool xlogx_finite() const;  // E N log+ N

  std::int64_t sample(RngStream& g) const;
  // Sum of `count` independent draws, using the family's closure under
  // convolution where one exists.
  std::int64_t sample_sum(std::int64_t count, RngStream& g) const;

  // pmf[0..K] with tail mass <= tail_eps; nullopt when K would exceed cap.
  std::optional<std::vector<double>> pmf_table(double tail_eps, std::size_t cap) const;
};

std::int64_t sample_zeta(double alpha, RngStream& g);

struct Atom {
  PopVec value;
  double prob = 0.0;
};

// Joint law of a d-dimensional count vector: either an explicit finite pmf
// or independent per-coordinate marginals.
class DiscreteLaw {
 public:
  DiscreteLaw() = default;
  static DiscreteLaw finite(std::vector<Atom> atoms);
  static DiscreteLaw independent(std::vector<Marginal> marginals);

  bool is_finite() const { return std::holds_alternative<FiniteData>(data_); }
  const std::vector<Atom>& atoms() const { return std::get<FiniteData>(data_).atoms; }
  const std::vector<Marginal>& marginals() const { return std::get<Marginals>(data_); }

  int dim() const;
  std::vector<std::string> invalid_reasons() const;

  bool coord_mean_finite(int j) const;
  double coord_mean(int j) const;  // throws InfiniteMeanError
  Vector mean_or_inf() const;      // +inf where undefined

  // E N(j)^p and E (N(j)/m) log+ (N(j)/m) for the coordinate law.
  MomentValue coord_p_moment(int j, double p) const;
  MomentValue coord_xlogx(int j, double m) const;

  // Moments of the total |N| = sum_j N(j).
  MomentValue total_p_moment(double p) const;
  MomentValue total_logplus_scaled(double divisor) const;  // E log+(|N| / divisor)

  PopVec sample(RngStream& g) const;
  PopVec sample_sum(std::int64_t count, RngStream& g) const;

 private:
  struct FiniteData {
    std::vector<Atom> atoms;  // sorted lexicographically by value
    std::vector<double> cum;  // running probability sums
  };
  using Marginals = std::vector<Marginal>;

  // pmf of |N|; nullopt when the truncated support would be too large.
  std::optional<std::vector<double>> total_pmf(double tail_eps) const;

  std::variant<FiniteData, Marginals> data_;
};

}  // namespace mbprei
