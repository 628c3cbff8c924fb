#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "mbprei/laws.hpp"
#include "mbprei/rng.hpp"

using namespace mbprei;

namespace {

// Independent oracle for zeta(s): truncated series plus the Euler-Maclaurin
// tail K^(1-s)/(s-1) + K^(-s)/2, accurate to O(K^(-s-1)).
double zeta_oracle(double s) {
  const int kTerms = 200000;
  double sum = 0.0;
  for (int k = kTerms; k >= 1; --k) sum += std::pow(static_cast<double>(k), -s);
  const double K = kTerms;
  return sum + std::pow(K, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(K, -s);
}

PopVec pv(std::int64_t a) { return (PopVec(1) << a).finished(); }
PopVec pv(std::int64_t a, std::int64_t b) { return (PopVec(2) << a, b).finished(); }

struct SampleStats {
  double mean = 0.0;
  double var = 0.0;
};

template <typename Draw>
SampleStats sample_stats(int reps, Draw&& draw) {
  std::vector<double> xs(reps);
  for (int r = 0; r < reps; ++r) xs[r] = draw(r);
  SampleStats st;
  for (double x : xs) st.mean += x;
  st.mean /= reps;
  for (double x : xs) st.var += (x - st.mean) * (x - st.mean);
  st.var /= reps - 1;
  return st;
}

}  // namespace

TEST_CASE("zeta oracle reproduces reference values") {
  // pi^2/6 and the Apery constant, as cross-checks of the oracle itself.
  CHECK(zeta_oracle(2.0) == doctest::Approx(1.6449340668482264).epsilon(1e-10));
  CHECK(zeta_oracle(3.0) == doctest::Approx(1.2020569031595943).epsilon(1e-10));
  CHECK(zeta_oracle(4.0) == doctest::Approx(1.0823232337111382).epsilon(1e-10));
}

TEST_CASE("marginal means match closed forms") {
  CHECK(Marginal{Family::Deterministic, 3.0}.mean() == 3.0);
  CHECK(Marginal{Family::Poisson, 2.5}.mean() == 2.5);
  CHECK(Marginal{Family::Geometric, 0.25}.mean() == doctest::Approx(3.0).epsilon(1e-14));

  const double zeta_mean = zeta_oracle(2.0) / zeta_oracle(3.0);
  CHECK(zeta_mean == doctest::Approx(1.3684327776958591).epsilon(1e-9));
  CHECK(Marginal{Family::Zeta, 3.0}.mean() == doctest::Approx(zeta_mean).epsilon(1e-9));

  CHECK(!Marginal{Family::Zeta, 2.0}.mean_finite());
  CHECK_THROWS_AS((Marginal{Family::Zeta, 2.0}.mean()), InfiniteMeanError);
  CHECK_THROWS_AS((Marginal{Family::Zeta, 1.5}.mean()), InfiniteMeanError);
}

TEST_CASE("marginal parameter validation") {
  CHECK(!Marginal{Family::Deterministic, 4.0}.invalid_reason());
  CHECK(Marginal{Family::Deterministic, -2.0}.invalid_reason());
  CHECK(Marginal{Family::Deterministic, 2.5}.invalid_reason());
  CHECK(Marginal{Family::Poisson, -1.0}.invalid_reason());
  CHECK(Marginal{Family::Poisson, 0.0}.invalid_reason());
  CHECK(Marginal{Family::Geometric, 0.0}.invalid_reason());
  CHECK(Marginal{Family::Geometric, 1.5}.invalid_reason());
  CHECK(!Marginal{Family::Geometric, 1.0}.invalid_reason());
  CHECK(Marginal{Family::Zeta, 1.0}.invalid_reason());
  CHECK(!Marginal{Family::Zeta, 1.5}.invalid_reason());
}

TEST_CASE("coordinate p-moments match closed forms") {
  auto law = DiscreteLaw::independent({{Family::Poisson, 2.5},
                                       {Family::Geometric, 0.25},
                                       {Family::Deterministic, 3.0},
                                       {Family::Zeta, 3.0}});
  // Poisson second moment mu + mu^2.
  const MomentValue po = law.coord_p_moment(0, 2.0);
  CHECK(po.status == MomentStatus::Estimated);
  CHECK(*po.value == doctest::Approx(2.5 + 6.25).epsilon(1e-10));
  // Geometric second moment (1-q)(2-q)/q^2 = 21 at q = 1/4.
  const MomentValue geo = law.coord_p_moment(1, 2.0);
  CHECK(*geo.value == doctest::Approx(21.0).epsilon(1e-10));
  // Deterministic: exact power.
  const MomentValue det = law.coord_p_moment(2, 2.0);
  CHECK(det.status == MomentStatus::Exact);
  CHECK(*det.value == 9.0);
  // Zeta(3) first moment via the dedicated series.
  const MomentValue zm = law.coord_p_moment(3, 1.0);
  CHECK(zm.status == MomentStatus::Estimated);
  CHECK(*zm.value == doctest::Approx(zeta_oracle(2.0) / zeta_oracle(3.0)).epsilon(1e-9));
  // Zeta(3) second moment diverges (p >= alpha - 1).
  CHECK(law.coord_p_moment(3, 2.0).status == MomentStatus::Infinite);
  CHECK(!law.coord_p_moment(3, 2.0).finite());

  // Zeta(4) second moment = zeta(2)/zeta(4).
  auto z4 = DiscreteLaw::independent({{Family::Zeta, 4.0}});
  CHECK(*z4.coord_p_moment(0, 2.0).value ==
        doctest::Approx(zeta_oracle(2.0) / zeta_oracle(4.0)).epsilon(1e-9));
}

TEST_CASE("normalized x log+ x moments") {
  // Finite pmf {0, 4} equiprobable with normalizer 2: 0.5 * 2 log 2 = log 2.
  auto law = DiscreteLaw::finite({{pv(0), 0.5}, {pv(4), 0.5}});
  const MomentValue v = law.coord_xlogx(0, 2.0);
  CHECK(v.status == MomentStatus::Exact);
  CHECK(*v.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  auto po = DiscreteLaw::independent({{Family::Poisson, 1.0}});
  CHECK(po.coord_xlogx(0, 1.0).status == MomentStatus::FiniteAnalytic);
  CHECK(po.coord_xlogx(0, 1.0).finite());

  auto z2 = DiscreteLaw::independent({{Family::Zeta, 2.0}});
  CHECK(z2.coord_xlogx(0, 1.0).status == MomentStatus::Infinite);

  auto det = DiscreteLaw::independent({{Family::Deterministic, 4.0}});
  CHECK(*det.coord_xlogx(0, 2.0).value == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("total moments of a law") {
  auto law = DiscreteLaw::finite({{pv(1, 1), 0.5}, {pv(0, 0), 0.5}});
  const MomentValue m2 = law.total_p_moment(2.0);
  CHECK(m2.status == MomentStatus::Exact);
  CHECK(*m2.value == 2.0);

  auto point = DiscreteLaw::finite({{pv(3, 1), 1.0}});
  const MomentValue lp = point.total_logplus_scaled(2.0);
  CHECK(lp.status == MomentStatus::Exact);
  CHECK(*lp.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // Independent Poisson(1) + Poisson(2): total is Poisson(3), E total^2 = 12.
  auto po = DiscreteLaw::independent({{Family::Poisson, 1.0}, {Family::Poisson, 2.0}});
  CHECK(*po.total_p_moment(2.0).value == doctest::Approx(12.0).epsilon(1e-9));

  auto z2 = DiscreteLaw::independent({{Family::Zeta, 2.0}, {Family::Deterministic, 1.0}});
  CHECK(z2.total_p_moment(1.0).status == MomentStatus::Infinite);
}

TEST_CASE("finite pmf validation") {
  CHECK(DiscreteLaw::finite({{pv(1, 0), 0.5}, {pv(0, 1), 0.5}}).invalid_reasons().empty());
  CHECK(!DiscreteLaw::finite({{pv(1, 0), 0.5}, {pv(1, 0), 0.5}}).invalid_reasons().empty());
  CHECK(!DiscreteLaw::finite({{pv(1, 0), 0.5}, {pv(0, 1), 0.4}}).invalid_reasons().empty());
  CHECK(!DiscreteLaw::finite({{pv(1, 0), 1.5}, {pv(0, 1), -0.5}}).invalid_reasons().empty());
  CHECK(!DiscreteLaw::finite({{pv(-1, 0), 1.0}}).invalid_reasons().empty());
  CHECK(!DiscreteLaw::finite({{pv(1, 0), 0.5}, {pv(1), 0.5}}).invalid_reasons().empty());
  CHECK(!DiscreteLaw::finite({}).invalid_reasons().empty());
  CHECK(!DiscreteLaw::independent({{Family::Poisson, -1.0}}).invalid_reasons().empty());
}

TEST_CASE("sampling is reproducible from the stream") {
  auto law = DiscreteLaw::independent({{Family::Poisson, 2.0}, {Family::Geometric, 0.5}});
  RngStream g1 = make_stream(42, 7);
  RngStream g2 = make_stream(42, 7);
  for (int i = 0; i < 50; ++i) {
    CHECK((law.sample(g1) == law.sample(g2)));
  }
  RngStream g3 = make_stream(42, 8);
  bool all_equal = true;
  RngStream g4 = make_stream(42, 7);
  for (int i = 0; i < 50; ++i)
    if (law.sample(g4) != law.sample(g3)) all_equal = false;
  CHECK(!all_equal);
}

TEST_CASE("finite pmf sampling frequencies") {
  auto law = DiscreteLaw::finite({{pv(0, 0), 0.25}, {pv(1, 0), 0.25}, {pv(0, 1), 0.5}});
  RngStream g = make_stream(1001, 0);
  const int reps = 30000;
  int c00 = 0, c10 = 0, c01 = 0;
  for (int r = 0; r < reps; ++r) {
    const PopVec v = law.sample(g);
    if (v[0] == 0 && v[1] == 0) ++c00;
    else if (v[0] == 1) ++c10;
    else ++c01;
  }
  const double se = std::sqrt(0.25 * 0.75 / reps);
  CHECK(std::abs(c00 / double(reps) - 0.25) < 5 * se);
  CHECK(std::abs(c10 / double(reps) - 0.25) < 5 * se);
  CHECK(std::abs(c01 / double(reps) - 0.5) < 5 * std::sqrt(0.5 * 0.5 / reps));
}

TEST_CASE("pooled sums match the per-particle law: poisson") {
  // Sum of 50 Poisson(1.5) draws is Poisson(75).
  Marginal m{Family::Poisson, 1.5};
  RngStream g = make_stream(1002, 0);
  const auto st = sample_stats(20000, [&](int) { return double(m.sample_sum(50, g)); });
  CHECK(std::abs(st.mean - 75.0) < 5 * std::sqrt(75.0 / 20000));
  CHECK(st.var == doctest::Approx(75.0).epsilon(0.1));
}

TEST_CASE("pooled sums match the per-particle law: geometric") {
  // Sum of 40 Geometric(1/2) draws: mean 40, variance 80.
  Marginal m{Family::Geometric, 0.5};
  RngStream g = make_stream(1003, 0);
  const auto st = sample_stats(20000, [&](int) { return double(m.sample_sum(40, g)); });
  CHECK(std::abs(st.mean - 40.0) < 5 * std::sqrt(80.0 / 20000));
  CHECK(st.var == doctest::Approx(80.0).epsilon(0.1));
}

TEST_CASE("pooled sums match the per-particle law: deterministic and finite pmf") {
  Marginal det{Family::Deterministic, 3.0};
  RngStream g = make_stream(1004, 0);
  CHECK(det.sample_sum(7, g) == 21);

  // Multinomial split of 10000 particles over atoms (1,0) w.p. 0.3, (0,2) w.p. 0.7:
  // coordinate 0 is Binomial(10000, 0.3), coordinate 1 is 2*(10000 - that).
  auto law = DiscreteLaw::finite({{pv(1, 0), 0.3}, {pv(0, 2), 0.7}});
  const int m = 10000, reps = 400;
  double mean0 = 0.0, mean1 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const PopVec v = law.sample_sum(m, g);
    CHECK(v[0] + v[1] / 2 == m);  // split conserves the particle count
    mean0 += double(v[0]);
    mean1 += double(v[1]);
  }
  mean0 /= reps;
  mean1 /= reps;
  const double sd0 = std::sqrt(m * 0.3 * 0.7);
  CHECK(std::abs(mean0 - 3000.0) < 5 * sd0 / std::sqrt(double(reps)));
  CHECK(std::abs(mean1 - 14000.0) < 5 * 2 * sd0 / std::sqrt(double(reps)));
}

TEST_CASE("zeta sampler matches the law") {
  RngStream g = make_stream(1005, 0);
  const int reps = 200000;
  // P(X = 1) = 1/zeta(4), P(X = 2) = 2^-4/zeta(4).
  const double z4 = zeta_oracle(4.0);
  int c1 = 0, c2 = 0;
  double mean = 0.0;
  for (int r = 0; r < reps; ++r) {
    const std::int64_t x = sample_zeta(4.0, g);
    REQUIRE(x >= 1);
    if (x == 1) ++c1;
    if (x == 2) ++c2;
    mean += double(x);
  }
  mean /= reps;
  const double p1 = 1.0 / z4, p2 = std::pow(2.0, -4.0) / z4;
  CHECK(std::abs(c1 / double(reps) - p1) < 5 * std::sqrt(p1 * (1 - p1) / reps));
  CHECK(std::abs(c2 / double(reps) - p2) < 5 * std::sqrt(p2 * (1 - p2) / reps));
  // Mean zeta(3)/zeta(4), sd from the finite second moment zeta(2)/zeta(4).
  const double mu = zeta_oracle(3.0) / z4;
  const double sd = std::sqrt(zeta_oracle(2.0) / z4 - mu * mu);
  CHECK(std::abs(mean - mu) < 5 * sd / std::sqrt(double(reps)));
}

TEST_CASE("zeta pooled sum draws per particle and respects the cap") {
  Marginal m{Family::Zeta, 4.0};
  RngStream g = make_stream(1006, 0);
  const double mu = zeta_oracle(3.0) / zeta_oracle(4.0);
  const double var1 = zeta_oracle(2.0) / zeta_oracle(4.0) - mu * mu;
  const auto st = sample_stats(30000, [&](int) { return double(m.sample_sum(5, g)); });
  CHECK(std::abs(st.mean - 5 * mu) < 5 * std::sqrt(5 * var1 / 30000));

  CHECK_THROWS_AS(m.sample_sum(20'000'000, g), OverflowError);
}

TEST_CASE("deterministic pooled sum overflow is caught") {
  Marginal m{Family::Deterministic, 4.0e15};
  RngStream g = make_stream(1007, 0);
  CHECK_THROWS_AS(m.sample_sum(1'000'000, g), OverflowError);
}
