#pragma once

#include <cstdio>
#include <functional>
#include <map>
#include <memory>

#include "bbmlab/experiments.hpp"

// Acceptance suite: every tolerance is pinned here. Criteria marked by the
// experiment plan as sharing data reuse one simulator ensemble. Each entry
// prints a single pass/fail line.
namespace bbm::experiments {

struct AcceptanceState {
  RunContext ctx;
  std::shared_ptr<MaxEnsemble> ensemble;  // shared by criteria 7-10

  const MaxEnsemble& shared_ensemble() {
    if (!ensemble) {
      MaxEnsembleConfig cfg;  // t = 12, 1e4 replicas, alpha 0.3, A = 2
      ensemble = std::make_shared<MaxEnsemble>(max_ensemble(cfg, ctx));
    }
    return *ensemble;
  }
};

inline CriterionResult c01_front_median_slope(AcceptanceState&) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 1;
  r.name = "front median log-slope";
  std::vector<double> times;
  for (int i = 0; i < 9; ++i)
    times.push_back(200.0 * std::pow(10.0, i / 8.0));
  const auto scan = front_median_scan(times);
  const double target = -1.5 / kSqrt2;
  r.value = scan.log_slope.slope;
  r.pass = std::fabs(r.value - target) <= 0.05 * std::fabs(target);
  r.detail = "slope " + std::to_string(r.value) + " vs " + std::to_string(target) +
             " (5%)";
  r.metrics = {{"slope", r.value},
               {"target", target},
               {"stderr", scan.log_slope.stderr},
               {"medians", scan.medians},
               {"times", scan.times}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c02_independent_median_slope(AcceptanceState&) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 2;
  r.name = "independent-particles median log-slope";
  std::vector<double> times;
  for (int i = 0; i < 9; ++i) times.push_back(100.0 * std::pow(100.0, i / 8.0));
  const auto scan = independent_median_scan(times);
  const double target = -0.5 / kSqrt2;
  r.value = scan.log_slope.slope;
  r.pass = std::fabs(r.value - target) <= 0.05 * std::fabs(target);
  r.detail = "slope " + std::to_string(r.value) + " vs " + std::to_string(target) +
             " (5%)";
  r.metrics = {{"slope", r.value}, {"target", target}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c03_first_moment_asymptotic(AcceptanceState&) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 3;
  r.name = "gaussian first-moment asymptotic";
  const double t = 1e4;
  const double q = kSqrt2 * t - std::log(t) / (2.0 * kSqrt2);
  r.value = expected_exceedance(t, q);
  const double target = 1.0 / (2.0 * std::sqrt(kPi));
  r.pass = std::fabs(r.value - target) <= 0.02 * target;
  r.detail = std::to_string(r.value) + " vs 1/(2 sqrt pi) = " +
             std::to_string(target) + " (2%)";
  r.metrics = {{"value", r.value}, {"target", target}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c04_cycle_lemma(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 4;
  r.name = "cycle lemma single rotation";
  const auto res = rotation_lemma(12, 10000, st.ctx.seed ^ 0xc4c1e);
  r.value = static_cast<double>(res.single_rotation);
  r.pass = res.single_rotation == res.samples;
  r.detail = std::to_string(res.single_rotation) + "/" +
             std::to_string(res.samples) + " samples with exactly one rotation";
  r.metrics = {{"samples", res.samples},
               {"single_rotation", res.single_rotation},
               {"redraws", res.redraws}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c05_mckean_duality(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 5;
  r.name = "duality of the laplace functional";
  const double t = 6.0;
  const CompactBump phi = CompactBump::cosine(-1.0, 2.0, 1.2);
  const double x_eval = Normalization::standard().centering(t);
  const auto res = mckean_duality(phi, t, x_eval, 10000, st.ctx);
  r.value = std::fabs(res.mc.mean - res.pde_value);
  r.pass = res.pass;
  r.detail = "mc " + std::to_string(res.mc.mean) + " vs pde " +
             std::to_string(res.pde_value) + " (tol " +
             std::to_string(res.tolerance) + ")";
  r.metrics = {{"mc_mean", res.mc.mean},
               {"mc_half_width", res.mc.half_width},
               {"pde", res.pde_value},
               {"tolerance", res.tolerance}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c06_martingale_means(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 6;
  r.name = "martingale means at t=5";
  // 1e6 replicas for the derivative-martingale side: the compensating
  // negative tail is only resolved once the median-of-means blocks are large
  const auto res = martingale_means(5.0, 10000, st.ctx, 1000000);
  r.pass = res.pass_tilted && res.pass_standard;
  r.value = res.tilted_additive.mean;
  r.detail = "E M(5) = " + std::to_string(res.tilted_additive.mean) +
             " (3 stderr " + std::to_string(3.0 * res.tilted_additive.half_width / 1.96) +
             "); Z(5) MoM band [" + std::to_string(res.band_lo) + ", " +
             std::to_string(res.band_hi) + "]";
  r.metrics = {{"tilted_additive_mean", res.tilted_additive.mean},
               {"tilted_additive_half_width", res.tilted_additive.half_width},
               {"standard_derivative_mom", res.standard_derivative.median_of_means},
               {"band_lo", res.band_lo},
               {"band_hi", res.band_hi}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c07_max_tail_slope(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 7;
  r.name = "maximum right-tail slope at t=12";
  const auto maxes = st.shared_ensemble().maxes();
  const auto fit = tail_slope(maxes, 1.5, 3.5, /*divide_by_x=*/true);
  r.value = fit.slope;
  r.pass = std::fabs(fit.slope + kSqrt2) <= 0.10 * kSqrt2;
  // deterministic cross-check: the same statistic on the exact finite-t law
  // from the dual equation (grid solution of the Heaviside problem)
  double exact_slope = 0.0;
  try {
    Grid g;
    const auto f =
        evolve(InitialCondition::heaviside(0.0), 12.0, g, {12.0}).front();
    const double m_frame =
        Normalization::standard().centering(12.0) - kSqrt2 * 12.0;
    std::vector<double> xs, ys;
    for (double x = 1.5; x <= 3.5 + 1e-9; x += 0.1) {
      xs.push_back(x);
      ys.push_back(std::log(f.value_at(m_frame + x) / x));
    }
    exact_slope = least_squares_slope(xs, ys).slope;
  } catch (const Error&) {
  }
  r.detail = "slope " + std::to_string(fit.slope) + " vs -sqrt2 (10%); exact finite-t law gives " +
             std::to_string(exact_slope) + " in the same window";
  r.metrics = {{"slope", fit.slope},
               {"stderr", fit.stderr},
               {"window", {1.5, 3.5}},
               {"n", maxes.size()},
               {"exact_finite_t_slope", exact_slope}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c08_gumbel_mixture(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 8;
  r.name = "gumbel mixture of the recentred maximum";
  const auto maxes = st.shared_ensemble().maxes_even();
  const auto zs = st.shared_ensemble().z_odd();
  const auto fit = gumbel_mixture_check(maxes, zs);
  r.value = fit.ks;
  r.pass = fit.ks < 0.05;
  r.detail = "ks " + std::to_string(fit.ks) + " (< 0.05), fitted c " +
             std::to_string(fit.fitted_c);
  r.metrics = {{"ks", fit.ks},
               {"fitted_c", fit.fitted_c},
               {"dropped_nonpositive_z", fit.dropped_nonpositive_fraction}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c09_genealogy_dichotomy(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 9;
  r.name = "genealogy dichotomy of extremal pairs";
  long total = 0, narrow = 0, wide = 0, total_t = 0, narrow_t = 0;
  for (const auto& rep : st.shared_ensemble().replicas) {
    total += rep.pairs_total;
    narrow += rep.pairs_mid_narrow;
    wide += rep.pairs_mid_wide;
    total_t += rep.pairs_total_tight;
    narrow_t += rep.pairs_mid_narrow_tight;
  }
  const double f_narrow = total ? static_cast<double>(narrow) / total : 0.0;
  const double f_wide = total ? static_cast<double>(wide) / total : 0.0;
  const double f_tight = total_t ? static_cast<double>(narrow_t) / total_t : 0.0;
  r.value = f_narrow;
  r.pass = total > 0 && f_narrow < 0.15 && f_narrow < f_wide;
  r.detail = "tau in [3,9]: " + std::to_string(f_narrow) + " (< 0.15), in [1,11]: " +
             std::to_string(f_wide) + ", pairs " + std::to_string(total) +
             "; narrow band A=0.5 gives " + std::to_string(f_tight);
  r.metrics = {{"pairs", total},
               {"fraction_3_9", f_narrow},
               {"fraction_1_11", f_wide},
               {"pairs_tight", total_t},
               {"fraction_3_9_tight_band", f_tight}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c10_localization_trend(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 10;
  r.name = "upper envelope exceedance trend";
  long n1 = 0, n2 = 0, n3 = 0;
  const auto& reps = st.shared_ensemble().replicas;
  for (const auto& rep : reps) {
    n1 += rep.upper_r1 ? 1 : 0;
    n2 += rep.upper_r2 ? 1 : 0;
    n3 += rep.upper_r3 ? 1 : 0;
  }
  const double f1 = static_cast<double>(n1) / reps.size();
  const double f2 = static_cast<double>(n2) / reps.size();
  const double f3 = static_cast<double>(n3) / reps.size();
  r.value = f1 - f3;
  r.pass = f3 < f1;
  r.detail = "exceedance freq r=1: " + std::to_string(f1) + ", r=2: " +
             std::to_string(f2) + ", r=3: " + std::to_string(f3);
  r.metrics = {{"freq_r1", f1}, {"freq_r2", f2}, {"freq_r3", f3}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c11_conditioned_overshoot(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 11;
  r.name = "conditioned overshoot mean";
  ConditionedTailConfig cfg;
  cfg.t = 9.0;
  cfg.a = 0.7;
  cfg.b = 0.0;
  cfg.n_target = 1500;
  cfg.replica_cap = 2'000'000;
  const auto res = conditioned_overshoot(cfg, st.ctx);
  const double target = 1.0 / kSqrt2;
  r.value = res.overshoot.mean;
  r.pass = res.accepted >= 1000 &&
           std::fabs(res.overshoot.mean - target) <= 0.15 * target &&
           res.recentred_max_zero;
  r.detail = "mean overshoot " + std::to_string(res.overshoot.mean) + " vs " +
             std::to_string(target) + " (15%), accepted " +
             std::to_string(res.accepted) + ", acceptance rate " +
             std::to_string(res.acceptance_rate);
  r.metrics = {{"mean", res.overshoot.mean},
               {"half_width", res.overshoot.half_width},
               {"accepted", res.accepted},
               {"replicas_used", res.replicas_used},
               {"acceptance_rate", res.acceptance_rate}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c12_decoration_cross_validation(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 12;
  r.name = "decoration cross-validation";
  DecorationConfig dcfg;  // zeta 3, horizon 19, b_max 8, dt 0.005
  const auto res = decoration_compare(3000, 12.0, dcfg, st.ctx);
  r.value = res.ks;
  r.pass = res.ks < 0.05;
  r.detail = "gap ECDF ks " + std::to_string(res.ks) + " (< 0.05), acceptance " +
             std::to_string(res.sampler_acceptance);
  r.metrics = {{"ks", res.ks},
               {"n_each", res.n_each},
               {"sampler_acceptance", res.sampler_acceptance},
               {"sim_no_gap_fraction", res.sim_no_gap_fraction},
               {"sampler_no_gap_fraction", res.sampler_no_gap_fraction}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c13_superposability(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 13;
  r.name = "superposability of the assembled process";
  const auto bank = standard_decoration_bank(4000, 10.0, 2.5, st.ctx);
  const auto res = superposability(10000, -2.0,
                                   DecorationSource::from_bank(bank), st.ctx);
  r.value = res.ks;
  r.pass = res.ks < 0.02;
  r.detail = "extremum ks " + std::to_string(res.ks) + " (< 0.02) at n=" +
             std::to_string(res.n);
  r.metrics = {{"ks", res.ks}, {"n", res.n}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c14_auxiliary_process(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 14;
  r.name = "auxiliary process extremum";
  const auto res = auxiliary_compare(10.0, 4000, st.ctx);
  r.value = res.ks;
  r.pass = res.ks < 0.07;
  r.detail = "ks " + std::to_string(res.ks) +
             " (< 0.07); deterministic finite-horizon distance " +
             std::to_string(res.deterministic_ks_bound);
  r.metrics = {{"ks", res.ks},
               {"n", res.n},
               {"deterministic_ks_bound", res.deterministic_ks_bound},
               {"z_positive_fraction", res.z_positive_fraction}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c15_c_translation(AcceptanceState&) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 15;
  r.name = "tail-integral translation covariance";
  const auto res = c_translation();
  r.value = res.ratio;
  r.pass = res.pass;
  r.detail = "ratio " + std::to_string(res.ratio) + " vs e^{-sqrt2} = " +
             std::to_string(res.expected) + " (2%) at r=" + std::to_string(res.r);
  r.metrics = {{"ratio", res.ratio}, {"expected", res.expected}, {"r", res.r}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c16_psi_sandwich(AcceptanceState&) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 16;
  r.name = "gaussian tail estimate sandwich";
  const auto res = psi_sandwich();
  r.value = res.ratio_fine;
  r.pass = res.pass;
  r.detail = "u/psi at (4,32): " + std::to_string(res.ratio_fine) +
             " in [0.5,2]; at (2,16): " + std::to_string(res.ratio_coarse);
  r.metrics = {{"ratio_fine", res.ratio_fine}, {"ratio_coarse", res.ratio_coarse}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c17_many_to_one(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 17;
  r.name = "many-to-one identity";
  const auto res = many_to_one(3.0, 10000, st.ctx);
  r.value = res.direct.mean - res.weighted.mean;
  r.pass = res.pass;
  r.detail = "direct " + std::to_string(res.direct.mean) + " +- " +
             std::to_string(res.direct.half_width) + " vs weighted " +
             std::to_string(res.weighted.mean) + " +- " +
             std::to_string(res.weighted.half_width);
  r.metrics = {{"direct_mean", res.direct.mean},
               {"direct_half_width", res.direct.half_width},
               {"weighted_mean", res.weighted.mean},
               {"weighted_half_width", res.weighted.half_width}};
  r.seconds = timer.seconds();
  return r;
}

inline CriterionResult c18_stopping_lines(AcceptanceState& st) {
  detail::Timer timer;
  CriterionResult r;
  r.id = 18;
  r.name = "stopping line / fixed-time coupling";
  const auto res = stopping_coupling(6.0, 10.0, 2000, st.ctx);
  r.value = res.log_correlation;
  r.pass = res.log_correlation > 0.5;
  r.detail = "log-scale pearson(Z_6, Z(10)) = " +
             std::to_string(res.log_correlation) + " (> 0.5), raw pearson " +
             std::to_string(res.raw_correlation) +
             " (unstable: infinite second moments)";
  r.metrics = {{"log_correlation", res.log_correlation},
               {"raw_correlation", res.raw_correlation},
               {"z_k_mom", res.z_k.median_of_means},
               {"z_t_mom", res.z_t.median_of_means}};
  r.seconds = timer.seconds();
  return r;
}

using CriterionFn = std::function<CriterionResult(AcceptanceState&)>;

inline const std::map<int, CriterionFn>& criterion_table() {
  static const std::map<int, CriterionFn> table{
      {1, c01_front_median_slope},   {2, c02_independent_median_slope},
      {3, c03_first_moment_asymptotic}, {4, c04_cycle_lemma},
      {5, c05_mckean_duality},       {6, c06_martingale_means},
      {7, c07_max_tail_slope},       {8, c08_gumbel_mixture},
      {9, c09_genealogy_dichotomy},  {10, c10_localization_trend},
      {11, c11_conditioned_overshoot}, {12, c12_decoration_cross_validation},
      {13, c13_superposability},     {14, c14_auxiliary_process},
      {15, c15_c_translation},       {16, c16_psi_sandwich},
      {17, c17_many_to_one},         {18, c18_stopping_lines}};
  return table;
}

inline std::vector<CriterionResult> run_criteria(const std::vector<int>& ids,
                                                 const RunContext& ctx) {
  AcceptanceState state;
  state.ctx = ctx;
  std::vector<CriterionResult> out;
  for (int id : ids) {
    const auto it = criterion_table().find(id);
    if (it == criterion_table().end())
      throw Error("unknown acceptance criterion: " + std::to_string(id));
    CriterionResult res;
    try {
      res = it->second(state);
    } catch (const std::exception& e) {
      res.id = id;
      res.name = "criterion " + std::to_string(id);
      res.pass = false;
      res.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] C%02d %s: %s (%.1fs)\n", res.pass ? "PASS" : "FAIL",
                res.id, res.name.c_str(), res.detail.c_str(), res.seconds);
    std::fflush(stdout);
    out.push_back(std::move(res));
  }
  return out;
}

inline std::vector<int> all_criterion_ids() {
  std::vector<int> ids;
  for (const auto& [id, fn] : criterion_table()) ids.push_back(id);
  return ids;
}

}  // namespace bbm::experiments
