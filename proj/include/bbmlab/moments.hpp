#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bbmlab/common.hpp"
#include "bbmlab/path.hpp"
#include "bbmlab/rng.hpp"
#include "bbmlab/special_functions.hpp"
#include "bbmlab/stats.hpp"

namespace bbm {

// First moment of the number of particles at or above q at time t for a
// rate-1 binary branching cloud of independent centred Gaussians:
//   E N_q(t) = e^t P(N(0,t) >= q),
// evaluated in log space so it survives q ~ sqrt2 t at t = 1e4. The
// branching cloud has the same first moment.
inline double expected_exceedance(double t, double q) {
  if (!(t > 0.0)) throw Error("expected_exceedance: t must be > 0");
  return std::exp(t + log_normal_sf(q / std::sqrt(t)));
}

// Median of the maximum of N(t) independent centred Gaussians of variance t,
// N(t) geometric with mean e^t: solves E[(Phi(q/sqrt t))^{N(t)}] = 1/2 by
// bracketed bisection. The generating function is evaluated through the
// ratio r = sf / e^{-t}, which stays representable at any t.
inline double independent_median(double t) {
  if (!(t > 0.0)) throw Error("independent_median: t must be > 0");
  const auto pgf_minus_half = [&](double q) {
    const double log_sf = log_normal_sf(q / std::sqrt(t));
    const double r = std::exp(log_sf + t);  // sf / e^{-t}
    const double s = 1.0 - std::exp(log_sf);
    // E[s^N] = s p / (1 - s(1-p)) = s / (1 + r(1-p)) with p = e^{-t}
    const double value = s / (1.0 + r * (1.0 - std::exp(-t)));
    return value - 0.5;
  };
  // the generating function is increasing in q
  double lo = kSqrt2 * t - 30.0, hi = kSqrt2 * t + 30.0;
  if (lo <= 0.0) lo = 1e-12;
  if (!(pgf_minus_half(lo) < 0.0) || !(pgf_minus_half(hi) > 0.0))
    throw Error("independent_median: root not bracketed");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (pgf_minus_half(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-11 * (1.0 + std::fabs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

struct RotationSample {
  std::vector<double> increments;
  double q = 0.0;

  void validate() const {
    if (increments.size() < 2)
      throw Error("rotation sample: need at least 2 increments");
  }
};

// Number of cyclic rotations of the increments keeping every partial sum
// below or on the chord to the total: S_s <= (s/t) S_t. For continuous
// i.i.d. draws exactly one rotation qualifies.
inline int rotation_census(const RotationSample& sample) {
  sample.validate();
  const auto& x = sample.increments;
  const std::size_t t = x.size();
  double total = 0.0;
  for (double v : x) total += v;
  int count = 0;
  for (std::size_t r = 0; r < t; ++r) {
    double s = 0.0;
    bool ok = true;
    // the final partial sum equals the chord endpoint identically, so only
    // proper prefixes are compared (summation order would otherwise create
    // spurious one-ulp ties)
    for (std::size_t i = 0; i + 1 < t; ++i) {
      s += x[(r + i) % t];
      const double chord = static_cast<double>(i + 1) / t * total;
      if (s == chord)
        throw Error("rotation_census: tie with the chord; re-draw");
      if (s > chord) {
        ok = false;
        break;
      }
    }
    if (ok) ++count;
  }
  return count;
}

// Monte Carlo estimate of t * P(Brownian bridge of length t from 0 to 0
// stays below the constant level `offset`). Within-segment crossings are
// resolved by the exact bridge crossing probability, so the estimate has no
// discretization bias. The closed form is P = 1 - e^{-2 offset^2 / t}.
inline Estimate chord_bridge_probability(double t, double offset, long n,
                                         std::uint64_t seed,
                                         int grid_segments = 64) {
  if (!(t > 0.0) || n < 1) throw Error("chord_bridge_probability: bad arguments");
  if (offset <= 0.0) {
    Estimate e;
    e.n = n;
    return e;  // the bridge starts at 0, on or above the barrier
  }
  std::vector<double> hits(static_cast<std::size_t>(n), 0.0);
  Rng rng(seed);
  const double ds = t / grid_segments;
  for (long rep = 0; rep < n; ++rep) {
    double pos = 0.0;
    bool below = true;
    for (int sgm = 0; sgm < grid_segments && below; ++sgm) {
      const double s0 = sgm * ds;
      const double s1 = s0 + ds;
      double next;
      if (sgm == grid_segments - 1) {
        next = 0.0;
      } else {
        const double span = t - s0;
        const double mean = pos * (t - s1) / span;
        const double var = ds * (t - s1) / span;
        next = mean + std::sqrt(var) * rng.gaussian();
      }
      if (next >= offset) {
        below = false;
        break;
      }
      const double p_cross = bridge_upcross_prob(pos, next, ds, offset, 1.0);
      if (rng.uniform() < p_cross) below = false;
      pos = next;
    }
    hits[rep] = below ? 1.0 : 0.0;
  }
  Estimate e = estimate_from(hits);
  e.mean *= t;
  e.median_of_means *= t;
  e.half_width *= t;
  return e;
}

}  // namespace bbm
