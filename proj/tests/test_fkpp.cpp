#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bbmlab/fkpp.hpp"
#include "bbmlab/parallel.hpp"
#include "bbmlab/simulator.hpp"
#include "bbmlab/stats.hpp"

using namespace bbm;

namespace {

Grid small_grid(double x_min = -30.0, double x_max = 50.0, double dx = 0.02,
                double dt = 0.01) {
  Grid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.dx = dx;
  g.dt = dt;
  return g;
}

}  // namespace

TEST_CASE("exact logistic reaction step") {
  // closed form: starting from 1/2 and running for ln 2 gives 2/3
  REQUIRE(logistic_reaction(0.5, std::log(2.0)) == Catch::Approx(2.0 / 3.0).epsilon(1e-14));
  REQUIRE(logistic_reaction(0.0, 1.7) == 0.0);
  REQUIRE(logistic_reaction(1.0, 1.7) == 1.0);
}

TEST_CASE("equilibria are fixed points of the full step") {
  // u = 0 via a zero bump
  CompactBump zero;
  auto fields = evolve(InitialCondition::exp_phi(zero), 0.5, small_grid(), {0.5});
  for (double v : fields[0].values) REQUIRE(v == 0.0);

  // u = 1 on the plateau behind a Heaviside front
  fields = evolve(InitialCondition::heaviside(0.0), 2.0, small_grid(), {2.0});
  const auto& f = fields[0];
  for (int i = 0; i < f.grid.n(); ++i) {
    REQUIRE(f.values[i] >= 0.0);
    REQUIRE(f.values[i] <= 1.0);
    if (f.grid.x(i) < -10.0)
      REQUIRE(f.values[i] == Catch::Approx(1.0).margin(5e-15));
  }
  REQUIRE(f.clamp_count == 0);  // Rannacher startup suppresses the ringing
}

TEST_CASE("short evolve stays in range and monotone") {
  const Grid g = small_grid();
  const auto fields = evolve(InitialCondition::heaviside(0.0), g.dt, g, {g.dt});
  const auto& f = fields[0];
  for (int i = 0; i + 1 < f.grid.n(); ++i) {
    REQUIRE(f.values[i] >= f.values[i + 1] - 1e-9);  // nonincreasing front
  }
}

TEST_CASE("median front of initial data sits at the jump") {
  FkppSolver solver(small_grid(), InitialCondition::heaviside(0.0));
  const auto f0 = solver.field();
  REQUIRE(median_front(f0) == Catch::Approx(0.0).margin(f0.grid.dx));
  CompactBump zero;
  FkppSolver zsolver(small_grid(), InitialCondition::exp_phi(zero));
  REQUIRE_THROWS_AS(median_front(zsolver.field()), Error);
}

TEST_CASE("front speed and log drift over a moderate horizon") {
  const Grid g = small_grid(-40.0, 60.0, 0.02, 0.01);
  std::vector<double> times{30.0, 45.0, 60.0, 80.0, 100.0, 120.0};
  const auto fields = evolve(InitialCondition::heaviside(0.0), 120.0, g, times);
  std::vector<double> lnt, dev;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const double med = median_front(fields[i]);
    lnt.push_back(std::log(fields[i].t));
    dev.push_back(med - kSqrt2 * fields[i].t);
  }
  const auto fit = least_squares_slope(lnt, dev);
  REQUIRE(fit.slope == Catch::Approx(-1.5 / kSqrt2).epsilon(0.15));
  const double speed =
      (median_front(fields.back()) - median_front(fields.front())) / 90.0;
  REQUIRE(speed == Catch::Approx(kSqrt2).epsilon(0.015));
}

TEST_CASE("grid refinement convergence of the front position") {
  const double t = 4.0;
  auto med_at = [&](double dx, double dt) {
    const Grid g = small_grid(-20.0, 30.0, dx, dt);
    return median_front(evolve(InitialCondition::heaviside(0.0), t, g, {t})[0]);
  };
  const double coarse = med_at(0.16, 0.08);
  const double mid = med_at(0.08, 0.04);
  const double fine = med_at(0.04, 0.02);
  const double e1 = std::fabs(coarse - mid);
  const double e2 = std::fabs(mid - fine);
  REQUIRE(e2 > 0.0);
  const double order = std::log2(e1 / e2);
  REQUIRE(order >= 1.8);
}

TEST_CASE("comparison principle for ordered initial data") {
  const Grid g = small_grid();
  CompactBump phi = CompactBump::cosine(-1.0, 1.5, 0.8);
  const auto lower = evolve(InitialCondition::exp_phi(phi), 3.0, g, {1.0, 3.0});
  const auto upper =
      evolve(InitialCondition::truncated_exp(phi, 2.0), 3.0, g, {1.0, 3.0});
  for (std::size_t k = 0; k < lower.size(); ++k)
    for (int i = 0; i < g.n(); ++i)
      REQUIRE(lower[k].values[i] <= upper[k].values[i] + 1e-9);
}

TEST_CASE("front escape raises an error") {
  const Grid g = small_grid(-2.0, 8.0, 0.02, 0.01);
  REQUIRE_THROWS_WITH(evolve(InitialCondition::heaviside(0.0), 40.0, g, {40.0}),
                      Catch::Matchers::ContainsSubstring("front escaped"));
}

TEST_CASE("wave profile shape and tail") {
  const auto wp = wave_profile();
  REQUIRE(wp.value_at(0.0) == Catch::Approx(0.5).margin(1e-3));
  for (std::size_t i = 1; i < wp.w.size(); ++i)
    REQUIRE(wp.w[i] >= wp.w[i - 1] - 1e-12);  // distribution function
  // 1 - w(x) ~ C x e^{-sqrt2 x}: log(1-w) + sqrt2 x - ln x flattens, with
  // the O(1/x) subleading term still visible at moderate x
  // stay below x ~ 18 where 1 - w is still representable in doubles
  std::vector<double> c_vals;
  for (double x = 10.0; x <= 17.0; x += 1.0)
    c_vals.push_back(std::log(1.0 - wp.value_at(x)) + kSqrt2 * x - std::log(x));
  for (std::size_t i = 2; i < c_vals.size(); ++i) {
    const double d_prev = std::fabs(c_vals[i - 1] - c_vals[i - 2]);
    const double d_cur = std::fabs(c_vals[i] - c_vals[i - 1]);
    REQUIRE(d_cur <= d_prev + 1e-9);
  }
  REQUIRE(std::fabs(c_vals.back() - c_vals[c_vals.size() - 2]) < 0.03);
}

TEST_CASE("evolved front converges to the traveling wave") {
  const Grid g = small_grid(-40.0, 60.0, 0.04, 0.02);
  const auto fields =
      evolve(InitialCondition::heaviside(0.0), 800.0, g, {50.0, 200.0, 800.0});
  const auto wp = wave_profile();
  std::vector<double> dists;
  for (const auto& f : fields) {
    const double med = median_front(f) - kSqrt2 * f.t;  // frame coordinates
    double sup = 0.0;
    for (double x = -8.0; x <= 12.0; x += 0.05) {
      // u is the survival form: compare with 1 - w
      const double uval = f.value_at(med + x);
      sup = std::max(sup, std::fabs(uval - (1.0 - wp.value_at(x))));
    }
    dists.push_back(sup);
  }
  REQUIRE(dists[1] < dists[0]);
  REQUIRE(dists[2] < dists[1]);
  REQUIRE(dists[2] < 0.01);
}

TEST_CASE("c integral basics, cauchy trend, and translation") {
  const Grid g;  // default window reaches far enough for r = 320
  CompactBump zero;
  FkppSolver zsolver(g, InitialCondition::exp_phi(zero));
  REQUIRE(c_integral(zsolver.field()) == 0.0);

  // convergence is logarithmically slow (corrections ~ ln r / sqrt r), so
  // absolute differences only start shrinking beyond r ~ 40; relative
  // differences shrink from the start
  const std::vector<double> rs{5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0};
  const auto base = evolve(InitialCondition::heaviside(0.0), 320.0, g, rs);
  std::vector<double> cs;
  for (const auto& f : base) cs.push_back(c_integral(f));
  for (double c : cs) REQUIRE(c > 0.0);
  CAPTURE(cs[0], cs[1], cs[2], cs[3], cs[4], cs[5], cs[6]);
  for (std::size_t i = 2; i < cs.size(); ++i)
    REQUIRE(std::fabs(cs[i] - cs[i - 1]) / cs[i] <
            std::fabs(cs[i - 1] - cs[i - 2]) / cs[i - 1]);
  REQUIRE(std::fabs(cs[6] - cs[5]) < std::fabs(cs[5] - cs[4]));
  REQUIRE(std::fabs(cs[5] - cs[4]) < std::fabs(cs[4] - cs[3]));

  // windowed quadrature: y ~ sqrt(r) carries the mass
  const auto& at40 = base[3];
  const double full = c_integral(at40);
  REQUIRE(windowed_c_integral(at40, 0.1, 10.0) > 0.9 * full);
  REQUIRE(windowed_c_integral(at40, 20.0, 40.0) < 0.01 * full);
  REQUIRE(windowed_c_integral(at40, 0.0, 1e9) == Catch::Approx(full).epsilon(1e-12));
  REQUIRE(windowed_c_integral(at40, 1e-9, 1e9) == Catch::Approx(full).epsilon(1e-4));

  // translated initial data: C scales by e^{-sqrt2 x}. The identity is a
  // limit statement; at finite r the ratio carries a ~0.92/sqrt(r) deficit
  // from the zeroth-moment term of the substitution, so r = 40 sits about
  // 15% low. The 2% check at large r lives in the acceptance suite.
  const auto shifted = evolve(InitialCondition::heaviside(-1.0), 40.0, g, {40.0});
  const double ratio = c_integral(shifted[0]) / full / std::exp(-kSqrt2);
  CAPTURE(full, ratio);
  REQUIRE(ratio > 0.78);
  REQUIRE(ratio < 0.97);
}

TEST_CASE("psi regime checks and basic values") {
  const Grid g = small_grid(-40.0, 120.0, 0.02, 0.01);
  CompactBump zero;
  FkppSolver zsolver(g, InitialCondition::exp_phi(zero));
  auto zf = zsolver.field();
  zf.t = 2.0;  // pretend it is at r=2
  REQUIRE(psi(2.0, 16.0, Normalization::standard().centering(16.0) + 16.0, zf) == 0.0);

  const auto fields = evolve(InitialCondition::heaviside(0.0), 16.0, g, {2.0, 16.0});
  const double m16 = Normalization::standard().centering(16.0);
  REQUIRE_THROWS_WITH(psi(2.0, 10.0, m16 + 16.0, fields[0]),
                      Catch::Matchers::ContainsSubstring("t >= 8r"));
  REQUIRE_THROWS_WITH(psi(2.0, 16.0, m16 + 10.0, fields[0]),
                      Catch::Matchers::ContainsSubstring("x >= m(t) + 8r"));
  const double x = m16 + 16.0;
  const double p = psi(2.0, 16.0, x, fields[0]);
  const double u_direct = fields[1].value_at(x - kSqrt2 * 16.0);
  REQUIRE(p > 0.0);
  REQUIRE(u_direct / p > 0.3);
  REQUIRE(u_direct / p < 3.0);
}

TEST_CASE("laplace prediction endpoints and monte carlo duality") {
  const Grid g = small_grid();
  CompactBump zero;
  REQUIRE(laplace_prediction(zero, 2.0, 1.0, g) == Catch::Approx(1.0).margin(1e-12));

  // duality with the particle system at a short horizon
  const double t = 3.0;
  CompactBump phi = CompactBump::cosine(-0.5, 2.0, 1.2);
  const double x_eval = Normalization::standard().centering(t);
  const double pde = laplace_prediction(phi, t, x_eval, g);
  const auto vals = parallel_map<double>(4000, default_threads(), [&](std::size_t i) {
    SimConfig cfg;
    cfg.norm = Normalization::standard();
    cfg.t_end = t;
    cfg.seed = derive_seed(1234, i);
    const auto snap = simulate(cfg);
    double s = 0.0;
    for (auto l : snap.leaves) s += phi(snap.particles[l].position - x_eval);
    return std::exp(-s);
  });
  const auto est = estimate_from(vals);
  REQUIRE(std::fabs(est.mean - pde) < 3.0 * est.half_width / 1.96 + 2e-3);
}

TEST_CASE("tail constant fit consistency") {
  const Grid g = small_grid(-40.0, 120.0, 0.02, 0.01);
  REQUIRE_THROWS_AS(
      tail_constant_fit({FkppSolver(g, InitialCondition::exp_phi(CompactBump{})).field()}),
      Error);

  const Grid gd;  // default window
  const auto base = evolve(InitialCondition::heaviside(0.0), 200.0, gd, {200.0});
  const auto shifted =
      evolve(InitialCondition::heaviside(-1.0), 200.0, gd, {200.0});
  const auto fit_base = tail_constant_fit(base);
  // the shifted solution samples the base profile one unit higher, so the
  // matched window is one unit lower and the finite-horizon bend cancels
  const auto fit_shifted = tail_constant_fit(shifted, 2.0, 7.0);
  CAPTURE(fit_base.amplitude, fit_base.offset, fit_base.residual,
          fit_shifted.amplitude);
  REQUIRE(fit_shifted.amplitude / fit_base.amplitude ==
          Catch::Approx(std::exp(-kSqrt2)).epsilon(0.03));
  // amplitude consistent with the c integral at the same horizon within 10%
  REQUIRE(fit_base.amplitude == Catch::Approx(c_integral(base[0])).epsilon(0.10));
}

TEST_CASE("evolve validates snapshot times") {
  const Grid g = small_grid();
  REQUIRE_THROWS_AS(evolve(InitialCondition::heaviside(0.0), -1.0, g, {}), Error);
  REQUIRE_THROWS_AS(evolve(InitialCondition::heaviside(0.0), 1.0, g, {2.0}), Error);
  REQUIRE_THROWS_AS(evolve(InitialCondition::heaviside(0.0), 1.0, g, {-0.5}), Error);
}
