#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bbmlab/normalization.hpp"
#include "bbmlab/path.hpp"
#include "bbmlab/point_measure.hpp"
#include "bbmlab/rng.hpp"

using namespace bbm;

TEST_CASE("normalization presets and centering") {
  const auto std_norm = Normalization::standard();
  const auto tilt = Normalization::tilted();
  REQUIRE(std_norm.is_standard());
  REQUIRE(tilt.is_tilted());
  REQUIRE(std_norm.direction == Direction::Max);
  REQUIRE(tilt.direction == Direction::Min);

  const double t = 10.0;
  REQUIRE(std_norm.centering(t) ==
          Catch::Approx(kSqrt2 * t - 1.5 / kSqrt2 * std::log(t)));
  REQUIRE(tilt.centering(t) == Catch::Approx(1.5 * std::log(t)));

  Normalization bad = std_norm;
  bad.variance = -1.0;
  REQUIRE_THROWS_AS(bad.validate(), Error);
  Normalization custom{2.0, 1.0, 1.0, Direction::Max};
  REQUIRE_THROWS_AS(custom.centering(1.0), Error);
}

TEST_CASE("point measure shift") {
  REQUIRE(shift(PointMeasure{0.0, 1.0, 3.0}, -1.0) ==
          PointMeasure{-1.0, 0.0, 2.0});
  REQUIRE(shift(PointMeasure{}, 5.0) == PointMeasure{});
  REQUIRE(shift(PointMeasure{2.5}, 0.0) == PointMeasure{2.5});
}

TEST_CASE("point measure superpose") {
  REQUIRE(superpose({PointMeasure{0.0, 2.0}, PointMeasure{1.0}}) ==
          PointMeasure{0.0, 1.0, 2.0});
  REQUIRE(superpose({PointMeasure{}, PointMeasure{}}) == PointMeasure{});
  REQUIRE(superpose({PointMeasure{1.0, 1.0}, PointMeasure{1.0}}) ==
          PointMeasure{1.0, 1.0, 1.0});
}

TEST_CASE("point measure extremum") {
  const PointMeasure pm{-1.0, 0.0, 2.0};
  REQUIRE(extremum(pm, Direction::Max) == 2.0);
  REQUIRE(extremum(pm, Direction::Min) == -1.0);
  REQUIRE_THROWS_AS(extremum(PointMeasure{}, Direction::Max), Error);
}

TEST_CASE("laplace functional") {
  const auto indicator = [](double x) { return x >= -1.0 && x <= 1.0 ? 1.0 : 0.0; };
  REQUIRE(laplace_functional(PointMeasure{0.0}, indicator) ==
          Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
  REQUIRE(laplace_functional(PointMeasure{}, indicator) == 1.0);
  REQUIRE(laplace_functional(PointMeasure{5.0}, indicator) == 1.0);
}

TEST_CASE("point measure algebra properties") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  std::uniform_int_distribution<int> size_dist(0, 12);
  const auto indicator = [](double x) { return x >= -1.0 && x <= 1.5 ? 0.7 : 0.0; };
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> xs(size_dist(gen));
    for (auto& x : xs) x = unif(gen);
    const PointMeasure p(xs);
    std::vector<double> ys(size_dist(gen));
    for (auto& y : ys) y = unif(gen);
    const PointMeasure q(ys);
    const double a = unif(gen), b = unif(gen);

    const auto s1 = shift(shift(p, a), b);
    const auto s2 = shift(p, a + b);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i)
      REQUIRE(s1[i] == Catch::Approx(s2[i]).margin(1e-12));
    if (!p.empty()) {
      REQUIRE(extremum(shift(p, a), Direction::Max) ==
              Catch::Approx(extremum(p, Direction::Max) + a).margin(1e-12));
    }
    const double lhs = laplace_functional(superpose({p, q}), indicator);
    const double rhs =
        laplace_functional(p, indicator) * laplace_functional(q, indicator);
    REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12));
    const auto sp = superpose({p, q});
    REQUIRE(sp.size() == p.size() + q.size());
    REQUIRE(std::is_sorted(sp.atoms().begin(), sp.atoms().end()));
  }
}

TEST_CASE("point measure cap") {
  REQUIRE_THROWS_AS(PointMeasure(std::vector<double>(10, 0.0), 5), Error);
}

TEST_CASE("path reversal") {
  Path p;
  p.times = {0.0, 1.0, 3.0};
  p.values = {0.0, 2.0, 1.0};
  p.validate();
  const Path y = reverse_recentre(p);
  y.validate();
  REQUIRE(y.values.front() == 0.0);
  REQUIRE(y.times.back() == 3.0);
  REQUIRE(y.values.back() == Catch::Approx(-1.0));
}

TEST_CASE("estimate invariants") {
  Estimate e;
  e.n = 0;
  REQUIRE_THROWS_AS(e.validate(), Error);
  e.n = 10;
  e.half_width = -1.0;
  REQUIRE_THROWS_AS(e.validate(), Error);
  e.half_width = 0.5;
  REQUIRE_NOTHROW(e.validate());
}

TEST_CASE("rng determinism and seed derivation") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.gaussian() == b.gaussian());
  REQUIRE(derive_seed(1, 0) != derive_seed(1, 1));
  REQUIRE(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("rng moments") {
  Rng rng(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    s += g;
    s2 += g * g;
  }
  REQUIRE(s / n == Catch::Approx(0.0).margin(0.01));
  REQUIRE(s2 / n == Catch::Approx(1.0).margin(0.02));

  double es = 0;
  for (int i = 0; i < n; ++i) es += rng.exponential(2.0);
  REQUIRE(es / n == Catch::Approx(0.5).margin(0.01));

  double ps = 0;
  for (int i = 0; i < 20000; ++i) ps += static_cast<double>(rng.poisson(3.7));
  REQUIRE(ps / 20000 == Catch::Approx(3.7).margin(0.06));
  double pl = 0;
  for (int i = 0; i < 20000; ++i) pl += static_cast<double>(rng.poisson(120.0));
  REQUIRE(pl / 20000 == Catch::Approx(120.0).margin(0.5));
}
