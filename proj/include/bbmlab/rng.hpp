#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bbmlab/common.hpp"

namespace bbm {

// SplitMix64, used only to derive well-separated per-replica seeds from a
// master seed and a stream index. Replica n of experiment (seed s) always
// gets the same stream regardless of thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t h = splitmix64(master ^ 0xA3EC4E9ED0C1F2B5ULL);
  h = splitmix64(h + stream);
  return h ? h : 0x853C49E6748FEA9BULL;
}

// Deterministic variate source. All distributions are built on top of
// mt19937_64 by hand so that streams are reproducible bit-for-bit across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed ? seed : 0x9E3779B97F4A7C15ULL) {}

  // Uniform on (0,1), never returns 0 or 1.
  double uniform() {
    const std::uint64_t r = gen_();
    return (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Poisson variate; inversion for small means, Hormann's transformed
  // rejection (PTRS) above.
  long poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      double prod = uniform();
      long k = 0;
      while (prod > limit) {
        prod *= uniform();
        ++k;
      }
      return k;
    }
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
      double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<long>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
      const double rhs = -mean + k * log_mean - std::lgamma(k + 1.0);
      if (lhs <= rhs) return static_cast<long>(k);
    }
  }

  std::mt19937_64& raw() { return gen_; }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Brownian bridge value at an interior time, for a motion with the given
// variance per unit time. Drift cancels once both endpoints are fixed.
inline double bridge_sample(Rng& rng, double t_a, double x_a, double t_b,
                            double x_b, double t_mid, double var_rate) {
  const double span = t_b - t_a;
  const double frac = (t_mid - t_a) / span;
  const double mean = x_a + frac * (x_b - x_a);
  const double var = var_rate * (t_mid - t_a) * (t_b - t_mid) / span;
  return mean + std::sqrt(var) * rng.gaussian();
}

// P(max of the bridge over [t_a,t_b] >= level) given both endpoints below.
inline double bridge_upcross_prob(double x_a, double x_b, double dt,
                                  double level, double var_rate) {
  if (x_a >= level || x_b >= level) return 1.0;
  return std::exp(-2.0 * (level - x_a) * (level - x_b) / (var_rate * dt));
}

inline double bridge_downcross_prob(double x_a, double x_b, double dt,
                                    double level, double var_rate) {
  return bridge_upcross_prob(-x_a, -x_b, dt, -level, var_rate);
}

}  // namespace bbm
