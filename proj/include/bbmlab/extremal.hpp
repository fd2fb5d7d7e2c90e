#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bbmlab/common.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/normalization.hpp"
#include "bbmlab/path.hpp"
#include "bbmlab/point_measure.hpp"
#include "bbmlab/rng.hpp"
#include "bbmlab/simulator.hpp"

namespace bbm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Poisson point process sample on a window. Intensities:
//   standard preset: sqrt2 e^{-sqrt2 x} dx (integrable towards +inf)
//   tilted preset:   e^{x} dx              (integrable towards -inf)
inline PointMeasure sample_ppp(double x_lo, double x_hi,
                               const Normalization& norm, std::uint64_t seed,
                               std::size_t cap = kDefaultAtomCap) {
  if (!(x_lo <= x_hi)) throw Error("sample_ppp: empty window bounds");
  Rng rng(seed);
  std::vector<double> atoms;
  if (norm.is_standard()) {
    if (std::isinf(x_lo))
      throw Error("sample_ppp: window not integrable towards -inf");
    const double lo_mass = std::exp(-kSqrt2 * x_lo);
    const double hi_mass = std::isinf(x_hi) ? 0.0 : std::exp(-kSqrt2 * x_hi);
    const double mean = lo_mass - hi_mass;
    const long n = rng.poisson(mean);
    if (static_cast<std::size_t>(n) > cap) throw Error("sample_ppp: cap exceeded");
    atoms.reserve(n);
    for (long i = 0; i < n; ++i)
      atoms.push_back(-std::log(lo_mass - rng.uniform() * mean) / kSqrt2);
  } else if (norm.is_tilted()) {
    if (std::isinf(x_hi))
      throw Error("sample_ppp: window not integrable towards +inf");
    const double lo_mass = std::isinf(x_lo) ? 0.0 : std::exp(x_lo);
    const double mean = std::exp(x_hi) - lo_mass;
    const long n = rng.poisson(mean);
    if (static_cast<std::size_t>(n) > cap) throw Error("sample_ppp: cap exceeded");
    atoms.reserve(n);
    for (long i = 0; i < n; ++i)
      atoms.push_back(std::log(lo_mass + rng.uniform() * mean));
  } else {
    throw Error("sample_ppp: standard/tilted presets only");
  }
  return PointMeasure(std::move(atoms));
}

// Spine process: Brownian motion until it first hits b, then b minus an
// independent Bessel(3) started at 0 (realized as the norm of three
// Brownian coordinates, exact in law at grid times).
struct SpineSample {
  double b = 0.0;
  Path path;
  double t_b = kInf;
  bool hit_level = false;
};

namespace detail {

// First-crossing time of `level` inside a step, refined by conditional
// Brownian-bridge bisection. `x1 >= level` or an interior crossing must
// already be established.
inline double refine_crossing(Rng& rng, double t0, double x0, double t1,
                              double x1, double level, int iters = 10) {
  for (int it = 0; it < iters; ++it) {
    const double tm = 0.5 * (t0 + t1);
    const double xm = bridge_sample(rng, t0, x0, t1, x1, tm, 1.0);
    if (xm >= level) {
      t1 = tm;
      x1 = xm;
      continue;
    }
    double p_left = bridge_upcross_prob(x0, xm, tm - t0, level, 1.0);
    if (x1 >= level) {
      // right half crosses for sure; left first with probability p_left
      if (rng.uniform() < p_left) {
        t1 = tm;
        x1 = xm;
      } else {
        t0 = tm;
        x0 = xm;
      }
    } else {
      const double p_right = bridge_upcross_prob(xm, x1, t1 - tm, level, 1.0);
      const double p_any = p_left + (1.0 - p_left) * p_right;
      if (rng.uniform() * p_any < p_left) {
        t1 = tm;
        x1 = xm;
      } else {
        t0 = tm;
        x0 = xm;
      }
    }
  }
  return 0.5 * (t0 + t1);
}

// Gamma^(b) evaluated at the given increasing times.
struct GammaPath {
  std::vector<double> values;
  double t_b = kInf;
  bool hit = false;
};

inline GammaPath gamma_spine_path(std::span<const double> times, double b,
                                  Rng& rng) {
  GammaPath out;
  out.values.reserve(times.size());
  double prev_t = 0.0, prev_x = 0.0;
  double bx = 0.0, by = 0.0, bz = 0.0;  // Bessel(3) coordinates
  double bessel_t = 0.0;
  for (double t : times) {
    if (t <= prev_t + 1e-15 && !out.values.empty()) {
      out.values.push_back(out.values.back());
      continue;
    }
    if (!out.hit) {
      const double dt = t - prev_t;
      const double x = prev_x + std::sqrt(dt) * rng.gaussian();
      bool crossed = x >= b;
      if (!crossed && rng.uniform() < bridge_upcross_prob(prev_x, x, dt, b, 1.0))
        crossed = true;
      if (crossed) {
        out.hit = true;
        out.t_b = refine_crossing(rng, prev_t, prev_x, t, x >= b ? x : b, b);
        if (out.t_b > t) out.t_b = t;
        bessel_t = out.t_b;
        const double gap = t - out.t_b;
        if (gap > 0.0) {
          const double sd = std::sqrt(gap);
          bx = sd * rng.gaussian();
          by = sd * rng.gaussian();
          bz = sd * rng.gaussian();
          bessel_t = t;
        }
        out.values.push_back(b - std::sqrt(bx * bx + by * by + bz * bz));
      } else {
        out.values.push_back(x);
        prev_x = x;
      }
      prev_t = t;
    } else {
      const double gap = t - bessel_t;
      if (gap > 0.0) {
        const double sd = std::sqrt(gap);
        bx += sd * rng.gaussian();
        by += sd * rng.gaussian();
        bz += sd * rng.gaussian();
        bessel_t = t;
      }
      out.values.push_back(b - std::sqrt(bx * bx + by * by + bz * bz));
      prev_t = t;
    }
  }
  return out;
}

}  // namespace detail

inline SpineSample sample_spine_path(double b, double horizon, double dt,
                                     std::uint64_t seed) {
  if (!(b > 0.0) || !(dt > 0.0) || !(horizon > 0.0))
    throw Error("sample_spine_path: bad arguments");
  std::vector<double> times{0.0};
  const long steps = std::lround(std::ceil(horizon / dt));
  for (long i = 1; i <= steps; ++i) times.push_back(std::min(i * dt, horizon));
  Rng rng(seed);
  const auto gp = detail::gamma_spine_path(times, b, rng);
  SpineSample out;
  out.b = b;
  out.t_b = gp.t_b;
  out.hit_level = gp.hit;
  out.path.times = std::move(times);
  out.path.values = gp.values;
  out.path.validate();
  return out;
}

struct DecorationSample {
  PointMeasure atoms;
  double b = 0.0;
  bool accepted = false;
  double horizon = 0.0;
  double zeta = 0.0;
  long attempts = 0;
};

struct DecorationConfig {
  double zeta = 3.0;
  double horizon = 0.0;  // 0 -> 3 zeta + 10
  double b_max = 8.0;
  double dt = 0.005;
  long attempt_cap = 200000;
  std::size_t population_cap = kDefaultPopulationCap;
  double prune_gap = 12.0;

  double effective_horizon() const {
    return horizon > 0.0 ? horizon : 3.0 * zeta + 10.0;
  }
  void validate() const {
    if (!(zeta > 0.0) || !(b_max > 0.0) || !(dt > 0.0))
      throw Error("decoration: bad parameters");
    if (zeta > effective_horizon())
      throw Error("decoration: zeta must not exceed the horizon");
  }
};

// One proposal of the spine-dressed cluster at a fixed level b: builds
// Y = -sigma Gamma^(b), emits independent tilted-law copies at rate 2 on
// [0, horizon], each evaluated at its own age and recentred by Y at its
// birth time, and accepts iff min of the assembled cluster (including the
// atom at 0) is >= 0. On acceptance the returned atoms are the copies born
// before zeta plus the atom at 0.
//
// Copies born after zeta only matter through their minimum, so they are
// simulated under reach-floor pruning; copies are processed youngest first,
// which makes rejected proposals cheap.
inline std::optional<DecorationSample> try_decoration(double b,
                                                      const DecorationConfig& cfg,
                                                      Rng& rng) {
  cfg.validate();
  const double horizon = cfg.effective_horizon();
  const double sigma = std::sqrt(Normalization::tilted().variance);

  // emission clock of rate 2
  std::vector<double> emissions;
  const long n_emit = rng.poisson(2.0 * horizon);
  emissions.reserve(n_emit);
  for (long i = 0; i < n_emit; ++i) emissions.push_back(rng.uniform() * horizon);
  std::sort(emissions.begin(), emissions.end());

  // spine on the merged grid
  std::vector<double> times;
  const long steps = std::lround(std::ceil(horizon / cfg.dt));
  times.reserve(steps + emissions.size() + 1);
  times.push_back(0.0);
  for (long i = 1; i <= steps; ++i) times.push_back(std::min(i * cfg.dt, horizon));
  times.insert(times.end(), emissions.begin(), emissions.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const auto gp = detail::gamma_spine_path(times, b, rng);

  const auto y_at = [&](double s) {
    const auto it = std::lower_bound(times.begin(), times.end(), s);
    return -sigma * gp.values[it - times.begin()];
  };

  std::vector<double> atoms{0.0};
  for (double s : emissions) {
    const double y = y_at(s);
    const double target = -y;  // copy minimum must stay >= target
    SimConfig sub;
    sub.norm = Normalization::tilted();
    sub.t_end = s;
    sub.seed = rng.raw()();
    sub.population_cap = cfg.population_cap;
    const bool keep_atoms = s < cfg.zeta;
    if (!keep_atoms)
      sub.pruning = PruningPolicy::reach_floor(target, cfg.prune_gap);
    GenealogySnapshot snap = simulate(sub);
    double mn = kInf;
    for (auto l : snap.leaves)
      mn = std::min(mn, snap.particles[l].position);
    if (mn < target) return std::nullopt;
    if (keep_atoms)
      for (auto l : snap.leaves) atoms.push_back(snap.particles[l].position + y);
  }

  DecorationSample out;
  out.atoms = PointMeasure(std::move(atoms));
  out.b = b;
  out.accepted = true;
  out.horizon = horizon;
  out.zeta = cfg.zeta;
  return out;
}

// Rejection sampler for the finite-zeta decoration: b uniform on (0, b_max],
// proposals as above, repeated until acceptance.
inline DecorationSample sample_decoration(const DecorationConfig& cfg,
                                          std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  for (long attempt = 1; attempt <= cfg.attempt_cap; ++attempt) {
    const double b = cfg.b_max * rng.uniform();
    auto res = try_decoration(b, cfg, rng);
    if (res) {
      res->attempts = attempt;
      return *res;
    }
  }
  throw Error("sample_decoration: attempt cap reached; acceptance rate below " +
              std::to_string(1.0 / static_cast<double>(cfg.attempt_cap)));
}

// Decoration source for assembled processes.
struct DecorationSource {
  enum class Kind { Delta0, Sampler, Bank };
  Kind kind = Kind::Delta0;
  DecorationConfig sampler_config;                  // Kind::Sampler
  std::shared_ptr<std::vector<PointMeasure>> bank;  // Kind::Bank

  static DecorationSource delta0() { return {}; }
  static DecorationSource sampler(DecorationConfig cfg) {
    DecorationSource s;
    s.kind = Kind::Sampler;
    s.sampler_config = cfg;
    return s;
  }
  static DecorationSource from_bank(std::shared_ptr<std::vector<PointMeasure>> b) {
    if (!b || b->empty()) throw Error("decoration bank is empty");
    DecorationSource s;
    s.kind = Kind::Bank;
    s.bank = std::move(b);
    return s;
  }
};

// Decorated Poisson point process on a window: backbone atoms, one
// independent decoration per atom, superposed and restricted to the window.
inline PointMeasure assemble(const Normalization& norm, double x_lo, double x_hi,
                             const DecorationSource& source, std::uint64_t seed) {
  const PointMeasure backbone = sample_ppp(x_lo, x_hi, norm, derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));
  std::vector<double> atoms;
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    const double x = backbone[i];
    PointMeasure dec;
    switch (source.kind) {
      case DecorationSource::Kind::Delta0:
        dec = PointMeasure{0.0};
        break;
      case DecorationSource::Kind::Sampler:
        dec = sample_decoration(source.sampler_config, rng.raw()()).atoms;
        break;
      case DecorationSource::Kind::Bank: {
        const auto& bank = *source.bank;
        dec = bank[static_cast<std::size_t>(rng.uniform() * bank.size()) %
                   bank.size()];
        break;
      }
    }
    for (double d : dec.atoms()) {
      const double v = x + d;
      if (v >= x_lo && (std::isinf(x_hi) || v <= x_hi)) atoms.push_back(v);
    }
  }
  return PointMeasure(std::move(atoms));
}

struct ConditionedSample {
  double overshoot = 0.0;
  PointMeasure recentred;  // cloud seen from its maximum, atoms <= 0
};

struct ConditionedTailConfig {
  double t = 9.0;
  double a = 0.7;
  double b = 0.0;
  long n_target = 1000;
  long replica_cap = 2'000'000;
  double depth = 20.0;  // keep recentred atoms within [-depth, 0]
  double prune_gap = 12.0;

  double threshold() const { return kSqrt2 * t + a * std::sqrt(t) + b; }
};

// Single replica of the conditioned-overshoot experiment; empty unless the
// maximum clears sqrt2 t + a sqrt t + b.
inline std::optional<ConditionedSample> conditioned_tail_replica(
    const ConditionedTailConfig& cfg, std::uint64_t seed) {
  SimConfig sc;
  sc.norm = Normalization::standard();
  sc.t_end = cfg.t;
  sc.pruning = PruningPolicy::gap_to_extremum(cfg.prune_gap);
  sc.seed = seed;
  const GenealogySnapshot snap = simulate(sc);
  double mx = -kInf;
  for (auto l : snap.leaves) mx = std::max(mx, snap.particles[l].position);
  const double thr = cfg.threshold();
  if (!(mx > thr)) return std::nullopt;
  ConditionedSample out;
  out.overshoot = mx - thr;
  std::vector<double> atoms;
  for (auto l : snap.leaves) {
    const double v = snap.particles[l].position - mx;
    if (v >= -cfg.depth) atoms.push_back(v);
  }
  out.recentred = PointMeasure(std::move(atoms));
  return out;
}

struct ConditionedTailResult {
  std::vector<ConditionedSample> samples;
  long replicas_used = 0;
  double acceptance_rate = 0.0;
};

inline ConditionedTailResult conditioned_tail_experiment(
    const ConditionedTailConfig& cfg, std::uint64_t seed) {
  ConditionedTailResult out;
  for (long rep = 0; rep < cfg.replica_cap; ++rep) {
    auto s = conditioned_tail_replica(cfg, derive_seed(seed, rep));
    ++out.replicas_used;
    if (s) out.samples.push_back(std::move(*s));
    if (static_cast<long>(out.samples.size()) >= cfg.n_target) break;
  }
  if (out.samples.empty())
    throw Error("conditioned_tail_experiment: no acceptances within the replica cap; "
                "reduce a or t");
  out.acceptance_rate =
      static_cast<double>(out.samples.size()) / out.replicas_used;
  return out;
}

struct AuxiliaryOptions {
  double x_cap = 12.0;       // backbone truncation depth
  double near_depth = 3.0;   // backbone atoms above -near_depth carry simulated copies
  double window_depth = 4.0; // output restricted to [ln(z)/sqrt2 - window_depth, inf)
  double prune_gap = 12.0;
};

// Sampler for the auxiliary process at time t: Poisson backbone of intensity
// sqrt(2/pi) (-x) e^{-sqrt2 x} on [-x_cap, 0), each atom carrying an
// independent centred copy N(t) - sqrt2 t, everything shifted by
// ln(z)/sqrt2. The extremum is what the process is compared on, and the
// output is restricted to a window below the extremum:
//   - atoms in the near zone carry fully simulated copies;
//   - the far zone enters through the exact law of its maximum,
//     P(max <= u) = exp(-int lambda(x) p(u-x) dx), with the reach
//     probability p taken from the F-KPP solution with Heaviside data.
// Far-zone atoms below the far maximum are not emitted; they lie below the
// window with overwhelming probability.
class AuxiliarySampler {
 public:
  AuxiliarySampler(double t, const Field* heaviside_field_at_t,
                   AuxiliaryOptions opt = {})
      : t_(t), opt_(opt) {
    if (t_ < 0.0) throw Error("auxiliary sampler: t must be >= 0");
    if (t_ > 0.0) {
      if (!heaviside_field_at_t ||
          std::fabs(heaviside_field_at_t->t - t_) > 1e-9)
        throw Error("auxiliary sampler: need the Heaviside F-KPP field at time t");
      field_ = *heaviside_field_at_t;
    }
    build_near_cdf();
    build_far_nodes();
  }

  double near_mass() const { return near_mass_; }

  // P(max over far-zone contributions <= u), u relative to the unshifted
  // frame (no ln z term).
  double far_max_cdf(double u) const {
    double lam = 0.0;
    for (const auto& [x, w] : far_nodes_) lam += w * reach_prob(u - x);
    return std::exp(-lam);
  }

  // Exact law of the overall extremum (marked-PPP formula over the whole
  // truncated backbone), u again relative to the unshifted frame. The
  // sampled extremum must follow this law up to grid and pruning error.
  double max_cdf(double u) const {
    double lam = 0.0;
    for (const auto& [x, w] : far_nodes_) lam += w * reach_prob(u - x);
    const int n = 1200;
    const double a = -opt_.near_depth, h = -a / n;
    for (int i = 0; i <= n; ++i) {
      const double x = a + h * i;
      const double dens = std::sqrt(2.0 / kPi) * (-x) * std::exp(-kSqrt2 * x);
      lam += ((i == 0 || i == n) ? 0.5 * h : h) * dens * reach_prob(u - x);
    }
    return std::exp(-lam);
  }

  PointMeasure sample(double z_sample, std::uint64_t seed) const {
    if (!(z_sample > 0.0)) throw Error("auxiliary sampler: z must be > 0");
    Rng rng(seed);
    const double shift = std::log(z_sample) / kSqrt2;
    const double w_lo = -opt_.window_depth;  // relative floor
    std::vector<double> atoms;

    // near zone: simulated copies
    const long n_near = rng.poisson(near_mass_);
    for (long i = 0; i < n_near; ++i) {
      const double x = sample_near_atom(rng);
      if (t_ == 0.0) {
        if (x >= w_lo) atoms.push_back(x + shift);
        continue;
      }
      SimConfig sc;
      sc.norm = Normalization::standard();
      sc.t_end = t_;
      sc.pruning = PruningPolicy::gap_to_extremum(opt_.prune_gap);
      sc.seed = rng.raw()();
      const GenealogySnapshot snap = simulate(sc);
      for (auto l : snap.leaves) {
        const double v = x + snap.particles[l].position - kSqrt2 * t_;
        if (v >= w_lo) atoms.push_back(v + shift);
      }
    }

    // far zone: exact inverse-CDF draw of its maximum
    const double u01 = rng.uniform();
    if (u01 > far_max_cdf(w_lo)) {
      double lo = w_lo, hi = w_lo + 1.0;
      while (far_max_cdf(hi) < u01 && hi < 60.0) hi += 4.0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (far_max_cdf(mid) < u01 ? lo : hi) = mid;
      }
      atoms.push_back(0.5 * (lo + hi) + shift);
    }
    return PointMeasure(std::move(atoms));
  }

 private:
  double reach_prob(double v) const {
    if (t_ == 0.0) return v < 0.0 ? 1.0 : 0.0;
    const double lo = field_.grid.x_min, hi = field_.grid.x_max;
    if (v <= lo) return 1.0;
    if (v >= hi) return 0.0;
    return field_.value_at(v);
  }

  void build_near_cdf() {
    const int n = 8192;
    near_cdf_x_.resize(n + 1);
    near_cdf_.resize(n + 1);
    const double a = -opt_.near_depth, b = 0.0;
    double acc = 0.0;
    double prev = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double x = a + (b - a) * i / n;
      const double dens = std::sqrt(2.0 / kPi) * (-x) * std::exp(-kSqrt2 * x);
      if (i > 0) acc += 0.5 * (prev + dens) * (b - a) / n;
      prev = dens;
      near_cdf_x_[i] = x;
      near_cdf_[i] = acc;
    }
    near_mass_ = acc;
  }

  double sample_near_atom(Rng& rng) const {
    const double target = rng.uniform() * near_mass_;
    auto it = std::lower_bound(near_cdf_.begin(), near_cdf_.end(), target);
    const std::size_t i =
        std::min<std::size_t>(std::max<std::ptrdiff_t>(it - near_cdf_.begin(), 1),
                              near_cdf_.size() - 1);
    const double c0 = near_cdf_[i - 1], c1 = near_cdf_[i];
    const double f = c1 > c0 ? (target - c0) / (c1 - c0) : 0.5;
    return near_cdf_x_[i - 1] + f * (near_cdf_x_[i] - near_cdf_x_[i - 1]);
  }

  void build_far_nodes() {
    const double a = -opt_.x_cap, b = -opt_.near_depth;
    if (!(a < b)) return;
    const int n = 1800;
    const double h = (b - a) / n;
    for (int i = 0; i <= n; ++i) {
      const double x = a + h * i;
      const double dens = std::sqrt(2.0 / kPi) * (-x) * std::exp(-kSqrt2 * x);
      const double w = (i == 0 || i == n) ? 0.5 * h : h;
      far_nodes_.push_back({x, dens * w});
    }
  }

  double t_;
  AuxiliaryOptions opt_;
  Field field_;
  std::vector<double> near_cdf_x_, near_cdf_;
  double near_mass_ = 0.0;
  std::vector<std::pair<double, double>> far_nodes_;
};

}  // namespace bbm
