#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "bbmlab/common.hpp"
#include "bbmlab/genealogy.hpp"
#include "bbmlab/normalization.hpp"
#include "bbmlab/rng.hpp"

namespace bbm {

struct PruningPolicy {
  enum class Mode { None, GapToExtremum, ReachFloor };
  Mode mode = Mode::None;
  // GapToExtremum: discard a particle observed more than `gap` on the wrong
  // side of the running extremum. Crossing back over gap=12 has probability
  // ~e^{-12..17}, negligible for extremal statistics; exposure is reported.
  double gap = 12.0;
  // ReachFloor (Min direction): discard a particle that would need to fall
  // more than `gap` below the typical reachable minimum to ever touch
  // `floor`. Used by min-reachability checks where only atoms near `floor`
  // matter.
  double floor = 0.0;

  static PruningPolicy none() { return {}; }
  static PruningPolicy gap_to_extremum(double g = 12.0) {
    PruningPolicy p;
    p.mode = Mode::GapToExtremum;
    p.gap = g;
    return p;
  }
  static PruningPolicy reach_floor(double floor, double g = 12.0) {
    PruningPolicy p;
    p.mode = Mode::ReachFloor;
    p.gap = g;
    p.floor = floor;
    return p;
  }
};

struct SimConfig {
  Normalization norm;
  double t_end = 1.0;
  std::vector<double> checkpoints;  // within [0, t_end]
  PruningPolicy pruning;
  std::uint64_t seed = 1;
  std::size_t population_cap = kDefaultPopulationCap;
  // internal extensions: start from an arbitrary population
  double t_start = 0.0;
  std::vector<double> initial_positions{0.0};
};

// Default checkpoint grid: n uniform points on (0, t] plus t/2 and t - zeta.
inline std::vector<double> default_checkpoints(double t, int n = 64,
                                               double zeta = 0.0) {
  std::vector<double> cps;
  for (int i = 1; i <= n; ++i) cps.push_back(t * i / n);
  cps.push_back(0.5 * t);
  if (zeta > 0.0 && zeta < t) cps.push_back(t - zeta);
  cps.push_back(0.0);
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  return cps;
}

// Exact event-driven simulation. Each particle lives an Exp(branch_rate)
// lifetime, moves by a single Gaussian displacement per lifetime segment,
// and splits into exactly two. Positions at checkpoint times interior to a
// segment are filled in by Brownian-bridge interpolation, which is exact in
// law given the segment endpoints. Events are processed in time order so
// that the running extremum used for pruning is coherent.
inline GenealogySnapshot simulate(const SimConfig& cfg) {
  cfg.norm.validate();
  if (cfg.t_end < cfg.t_start) throw Error("simulate: t_end before start time");
  GenealogySnapshot snap;
  snap.norm = cfg.norm;
  snap.final_time = cfg.t_end;
  snap.rng_seed = cfg.seed;
  snap.checkpoint_times = cfg.checkpoints;
  std::sort(snap.checkpoint_times.begin(), snap.checkpoint_times.end());
  for (double c : snap.checkpoint_times)
    if (c < cfg.t_start - 1e-12 || c > cfg.t_end + 1e-12)
      throw Error("simulate: checkpoint outside [t_start, t_end]");
  const auto& cps = snap.checkpoint_times;

  Rng rng(cfg.seed);
  const double sigma2 = cfg.norm.variance;
  const double drift = cfg.norm.drift;
  const bool dir_max = cfg.norm.direction == Direction::Max;

  struct Event {
    double time;
    std::int32_t idx;
    bool operator>(const Event& o) const { return time > o.time; }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;

  auto spawn = [&](double birth, double pos, std::int32_t parent) {
    if (snap.particles.size() >= cfg.population_cap)
      throw PopulationCapError(cfg.population_cap, birth);
    ParticleRecord r;
    r.birth_time = birth;
    r.birth_position = pos;
    r.parent = parent;
    const std::int32_t idx = static_cast<std::int32_t>(snap.particles.size());
    snap.particles.push_back(r);
    const double death = birth + rng.exponential(cfg.norm.branch_rate);
    queue.push({std::min(death, cfg.t_end), idx});
    return idx;
  };

  // Running extremum for pruning. For Max the population maximum is
  // nondecreasing, so the all-history maximum of observed endpoints tracks
  // it. For Min under upward drift the population minimum rises, so a stale
  // all-history minimum would eventually prune everything (e.g. a root that
  // happens not to branch for several units); the minimum is therefore taken
  // over endpoints observed in the last few unit-time buckets only.
  double run_ext = dir_max ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
  constexpr double kBucketWidth = 1.0;
  constexpr int kBucketLookback = 3;
  std::vector<double> min_buckets;
  if (!dir_max && cfg.pruning.mode == PruningPolicy::Mode::GapToExtremum)
    min_buckets.assign(
        static_cast<std::size_t>((cfg.t_end - cfg.t_start) / kBucketWidth) + 2,
        std::numeric_limits<double>::infinity());
  const auto recent_min = [&](double time, double endpoint) {
    const auto k = static_cast<std::size_t>((time - cfg.t_start) / kBucketWidth);
    auto& slot = min_buckets[std::min(k, min_buckets.size() - 1)];
    slot = std::min(slot, endpoint);
    double m = std::numeric_limits<double>::infinity();
    for (int back = 0; back <= kBucketLookback; ++back) {
      if (k < static_cast<std::size_t>(back)) break;
      m = std::min(m, min_buckets[std::min(k - back, min_buckets.size() - 1)]);
    }
    return m;
  };
  for (double p0 : cfg.initial_positions) {
    run_ext = dir_max ? std::max(run_ext, p0) : std::min(run_ext, p0);
    spawn(cfg.t_start, p0, -1);
  }

  // degenerate horizon: the initial particles are the leaves
  if (cfg.t_end == cfg.t_start) {
    while (!queue.empty()) queue.pop();
    for (std::size_t i = 0; i < snap.particles.size(); ++i) {
      auto& r = snap.particles[i];
      r.end_time = cfg.t_end;
      r.position = r.birth_position;
      r.status = ParticleStatus::Leaf;
      snap.leaves.push_back(static_cast<std::int32_t>(i));
      // cover all checkpoints (== t_end) with the birth position
      r.cp_begin = 0;
      r.cp_count = static_cast<std::int32_t>(cps.size());
      r.cp_offset = static_cast<std::int64_t>(snap.checkpoint_values.size());
      for (std::size_t c = 0; c < cps.size(); ++c)
        snap.checkpoint_values.push_back(r.birth_position);
    }
    return snap;
  }

  while (!queue.empty()) {
    const Event ev = queue.top();
    queue.pop();
    auto& rec = snap.particles[ev.idx];
    const double dt = ev.time - rec.birth_time;
    const double endpoint =
        rec.birth_position + drift * dt + std::sqrt(sigma2 * dt) * rng.gaussian();
    rec.end_time = ev.time;
    rec.position = endpoint;

    // checkpoints covered by this segment: (birth, end], or [birth, end] for
    // roots so that a checkpoint at the start time is covered.
    {
      auto lo = std::upper_bound(cps.begin(), cps.end(), rec.birth_time);
      if (rec.parent < 0 && lo != cps.begin() && *(lo - 1) == rec.birth_time)
        --lo;
      auto hi = std::upper_bound(lo, cps.end(), ev.time);
      rec.cp_begin = static_cast<std::int32_t>(lo - cps.begin());
      rec.cp_count = static_cast<std::int32_t>(hi - lo);
      rec.cp_offset = static_cast<std::int64_t>(snap.checkpoint_values.size());
      double prev_t = rec.birth_time, prev_x = rec.birth_position;
      for (auto it = lo; it != hi; ++it) {
        double x;
        if (*it >= ev.time)
          x = endpoint;
        else if (*it <= prev_t)
          x = prev_x;
        else
          x = bridge_sample(rng, prev_t, prev_x, ev.time, endpoint, *it, sigma2);
        snap.checkpoint_values.push_back(x);
        prev_t = *it;
        prev_x = x;
      }
    }

    run_ext = dir_max ? std::max(run_ext, endpoint) : std::min(run_ext, endpoint);

    bool pruned = false;
    switch (cfg.pruning.mode) {
      case PruningPolicy::Mode::None:
        break;
      case PruningPolicy::Mode::GapToExtremum:
        if (dir_max) {
          pruned = endpoint < run_ext - cfg.pruning.gap;
        } else {
          pruned = endpoint > recent_min(ev.time, endpoint) + cfg.pruning.gap;
        }
        break;
      case PruningPolicy::Mode::ReachFloor: {
        // A particle this far above the floor would have to beat the typical
        // reachable dip by more than `gap` for any descendant to touch it.
        const double remaining = cfg.t_end - ev.time;
        const double reachable_dip = 1.5 * std::log1p(remaining);
        pruned = endpoint - reachable_dip - cfg.pruning.gap > cfg.pruning.floor;
        break;
      }
    }
    if (pruned) {
      rec.status = ParticleStatus::Pruned;
      ++snap.pruned_count;
      continue;
    }

    if (ev.time >= cfg.t_end) {
      rec.status = ParticleStatus::Leaf;
      snap.leaves.push_back(ev.idx);
    } else {
      rec.status = ParticleStatus::Branched;
      spawn(ev.time, endpoint, ev.idx);
      spawn(ev.time, endpoint, ev.idx);
    }
  }

  if (snap.leaves.empty() && cfg.pruning.mode != PruningPolicy::Mode::ReachFloor)
    throw Error("simulate: pruning removed the whole population");
  return snap;
}

inline GenealogySnapshot simulate(const Normalization& norm, double t_end,
                                  std::vector<double> checkpoints,
                                  const PruningPolicy& pruning,
                                  std::uint64_t seed) {
  if (t_end < 0.0) throw Error("simulate: t_end must be >= 0");
  SimConfig cfg;
  cfg.norm = norm;
  cfg.t_end = t_end;
  cfg.checkpoints = std::move(checkpoints);
  cfg.pruning = pruning;
  cfg.seed = seed;
  return simulate(cfg);
}

// Trajectory of the particle realizing the extremum, sampled at checkpoints.
inline Path extremal_path(const GenealogySnapshot& snap) {
  if (snap.leaves.empty()) throw Error("extremal_path: empty snapshot");
  if (snap.checkpoint_times.empty())
    throw Error("extremal_path: snapshot has no checkpoints");
  return snap.ancestral_path(snap.extremal_leaf());
}

struct MartingaleReadout {
  double z_value = 0.0;  // derivative martingale
  double m_value = 0.0;  // additive martingale
  double time = 0.0;
  bool approximate = false;  // true when pruning invalidates exactness
};

// Martingale readouts from occupied leaf positions.
//   standard: z = sum (sqrt2 t - x) e^{-sqrt2 (sqrt2 t - x)},
//             m = sum e^{-sqrt2 (sqrt2 t - x)}
//   tilted:   z = sum x e^{-x},  m = sum e^{-x}
inline MartingaleReadout martingales(const GenealogySnapshot& snap) {
  MartingaleReadout out;
  out.time = snap.final_time;
  out.approximate = snap.pruning_exposed();
  const double t = snap.final_time;
  if (snap.norm.is_standard()) {
    for (auto i : snap.leaves) {
      const double d = kSqrt2 * t - snap.particles[i].position;
      const double w = std::exp(-kSqrt2 * d);
      out.z_value += d * w;
      out.m_value += w;
    }
  } else if (snap.norm.is_tilted()) {
    for (auto i : snap.leaves) {
      const double x = snap.particles[i].position;
      const double w = std::exp(-x);
      out.z_value += x * w;
      out.m_value += w;
    }
  } else {
    throw Error("martingales: defined for the standard/tilted presets");
  }
  return out;
}

struct EnvelopeReport {
  bool upper_exceeded = false;
  bool lower_half_minus = false;
  bool lower_half_plus = false;
};

// Path localization diagnostics against the envelopes
//   U+-(s) = (s/t) m(t) +- min(s, t-s)^alpha
// evaluated on checkpoints s in [r, t-r]. The upper check scans every
// ancestor of a surviving leaf; the lower checks only lineages of leaves
// within [m(t)-A, m(t)+A] (Max direction; mirrored for Min).
inline EnvelopeReport envelope_check(const GenealogySnapshot& snap, double alpha,
                                     double r, double band_halfwidth = 2.0) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw Error("envelope_check: alpha must lie in (0, 1/2)");
  if (!(r > 0.0 && r < snap.final_time / 3.0))
    throw Error("envelope_check: require 0 < r < final_time/3");
  const double t = snap.final_time;
  const auto& cps = snap.checkpoint_times;
  std::vector<std::int32_t> active;
  for (std::size_t c = 0; c < cps.size(); ++c)
    if (cps[c] >= r && cps[c] <= t - r)
      active.push_back(static_cast<std::int32_t>(c));
  if (active.size() < 8)
    throw Error("envelope_check: fewer than 8 checkpoints in [r, t-r]; use a denser grid");

  const double mt = snap.norm.centering(t);
  const bool dir_max = snap.norm.direction == Direction::Max;
  const auto envelope = [&](double s, double expo) {
    return s / t * mt + std::min(std::pow(s, expo), std::pow(t - s, expo));
  };

  // mark ancestors of surviving leaves
  std::vector<char> feeds_leaf(snap.particles.size(), 0);
  for (auto i : snap.leaves) feeds_leaf[i] = 1;
  for (std::size_t i = snap.particles.size(); i-- > 0;) {
    if (feeds_leaf[i] && snap.particles[i].parent >= 0)
      feeds_leaf[snap.particles[i].parent] = 1;
  }

  EnvelopeReport rep;
  for (std::size_t i = 0; i < snap.particles.size() && !rep.upper_exceeded; ++i) {
    if (!feeds_leaf[i]) continue;
    const auto& rec = snap.particles[i];
    for (std::int32_t c = 0; c < rec.cp_count; ++c) {
      const std::int32_t cp = rec.cp_begin + c;
      const double s = cps[cp];
      if (s < r || s > t - r) continue;
      const double x = snap.checkpoint_values[rec.cp_offset + c];
      const double v = dir_max ? x : -x;
      if (v >= envelope(s, alpha)) {
        rep.upper_exceeded = true;
        break;
      }
    }
  }

  for (auto leaf : snap.leaves) {
    const double pos = snap.particles[leaf].position;
    const double v_end = dir_max ? pos : -pos;
    if (std::fabs(v_end - mt) > band_halfwidth) continue;
    for (auto cp : active) {
      const double s = cps[cp];
      const double x = snap.ancestral_position(leaf, cp);
      const double v = dir_max ? x : -x;
      if (v >= s / t * mt - std::min(std::pow(s, 0.5 - alpha),
                                     std::pow(t - s, 0.5 - alpha)))
        rep.lower_half_minus = true;
      if (v <= s / t * mt - std::min(std::pow(s, 0.5 + alpha),
                                     std::pow(t - s, 0.5 + alpha)))
        rep.lower_half_plus = true;
    }
    if (rep.lower_half_minus && rep.lower_half_plus) break;
  }
  return rep;
}

struct BarrierCensus {
  long n_q = 0;  // leaves at or above q
  long b_q = 0;  // those whose path stayed below the chord + c_low
  long h_q = 0;  // those whose path touched the chord + c_high
};

// Low/high particle census against chords s -> q s/t + c, evaluated on the
// checkpoint grid.
inline BarrierCensus barrier_census(const GenealogySnapshot& snap, double q,
                                    double c_low = 2.0, double c_high = 1.0) {
  if (!snap.norm.is_standard())
    throw Error("barrier_census: standard normalization required");
  BarrierCensus out;
  const double t = snap.final_time;
  const auto& cps = snap.checkpoint_times;
  for (auto leaf : snap.leaves) {
    if (snap.particles[leaf].position < q) continue;
    ++out.n_q;
    bool stayed_low = true, touched_high = false;
    for (std::size_t cp = 0; cp < cps.size(); ++cp) {
      const double s = cps[cp];
      if (s > t) break;
      const double chord = q * s / t;
      const double x = snap.ancestral_position(leaf, static_cast<std::int32_t>(cp));
      if (x > chord + c_low) stayed_low = false;
      if (x >= chord + c_high) touched_high = true;
    }
    if (stayed_low) ++out.b_q;
    if (touched_high) ++out.h_q;
  }
  return out;
}

struct StoppingLineReadout {
  double level = 0.0;
  long h_count = 0;
  double z_k = 0.0;
};

// First-passage stopping line at level k under the tilted normalization:
// simulate until every surviving lineage has hit k once, freezing particles
// at the hitting point. Within-segment crossings are detected by the exact
// Brownian-bridge crossing probability.
inline StoppingLineReadout stopping_line(const Normalization& norm, double k,
                                         std::uint64_t seed,
                                         std::size_t event_cap = 10'000'000) {
  if (!norm.is_tilted())
    throw Error("stopping_line: tilted normalization required");
  if (!(k > 0.0)) throw Error("stopping_line: level must be > 0");
  Rng rng(seed);
  const double sigma2 = norm.variance, drift = norm.drift;
  struct Item {
    double time, pos;
  };
  std::vector<Item> alive{{0.0, 0.0}};
  long hits = 0;
  std::size_t events = 0;
  while (!alive.empty()) {
    if (++events > event_cap)
      throw PopulationCapError(event_cap, alive.back().time);
    const Item it = alive.back();
    alive.pop_back();
    const double dt = rng.exponential(norm.branch_rate);
    const double end = it.pos + drift * dt + std::sqrt(sigma2 * dt) * rng.gaussian();
    bool crossed = end >= k;
    if (!crossed) {
      const double p = bridge_upcross_prob(it.pos, end, dt, k, sigma2);
      crossed = rng.uniform() < p;
    }
    if (crossed) {
      ++hits;
      continue;  // frozen at the hitting point
    }
    alive.push_back({it.time + dt, end});
    alive.push_back({it.time + dt, end});
  }
  StoppingLineReadout out;
  out.level = k;
  out.h_count = hits;
  out.z_k = k * std::exp(-k) * static_cast<double>(hits);
  return out;
}

struct CoupledStoppingReadout {
  std::vector<double> z_k;      // k e^{-k} H_k per requested level
  std::vector<long> h_counts;
  double z_at_t = 0.0;          // derivative martingale readout at t_end
  double m_at_t = 0.0;
};

// One run serving several stopping lines and a fixed-time readout at once:
// lineages are never frozen; each particle carries the lowest level its
// lineage has not yet hit. Within a segment the nested crossing indicators
// {max >= level} are driven by a single uniform, which reproduces their
// exact joint law. Lineages continue past t_end until every level is hit.
inline CoupledStoppingReadout coupled_stopping_lines(
    const Normalization& norm, std::vector<double> levels, double t_end,
    std::uint64_t seed, std::size_t event_cap = 50'000'000) {
  if (!norm.is_tilted())
    throw Error("coupled_stopping_lines: tilted normalization required");
  std::sort(levels.begin(), levels.end());
  for (double k : levels)
    if (!(k > 0.0)) throw Error("coupled_stopping_lines: levels must be > 0");
  const std::size_t n_levels = levels.size();
  Rng rng(seed);
  const double sigma2 = norm.variance, drift = norm.drift;
  CoupledStoppingReadout out;
  out.h_counts.assign(n_levels, 0);
  struct Item {
    double time, pos;
    std::uint32_t next_level;
  };
  std::vector<Item> alive{{0.0, 0.0, 0}};
  std::size_t events = 0;
  while (!alive.empty()) {
    if (++events > event_cap)
      throw PopulationCapError(event_cap, alive.back().time);
    Item it = alive.back();
    alive.pop_back();
    double dt = rng.exponential(norm.branch_rate);
    bool branch = true;
    if (it.time < t_end && it.time + dt >= t_end) {
      dt = t_end - it.time;  // pause at the readout time, no branching
      branch = false;
    }
    const double end =
        it.pos + drift * dt + std::sqrt(sigma2 * dt) * rng.gaussian();
    if (it.next_level < n_levels) {
      const double u = rng.uniform();
      while (it.next_level < n_levels) {
        const double k = levels[it.next_level];
        const bool crossed =
            end >= k || u < bridge_upcross_prob(it.pos, end, dt, k, sigma2);
        if (!crossed) break;
        ++out.h_counts[it.next_level];
        ++it.next_level;
      }
    }
    if (!branch) {
      // readout at t_end, then resume the lineage
      out.z_at_t += end * std::exp(-end);
      out.m_at_t += std::exp(-end);
      if (it.next_level < n_levels)
        alive.push_back({t_end, end, it.next_level});
      continue;
    }
    if (it.next_level >= n_levels && it.time + dt >= t_end)
      continue;  // nothing left to resolve on this lineage
    alive.push_back({it.time + dt, end, it.next_level});
    alive.push_back({it.time + dt, end, it.next_level});
  }
  for (std::size_t i = 0; i < n_levels; ++i)
    out.z_k.push_back(levels[i] * std::exp(-levels[i]) *
                      static_cast<double>(out.h_counts[i]));
  return out;
}

struct SpineResult {
  GenealogySnapshot snapshot;
  std::int32_t spine_leaf = -1;
  long emission_count = 0;
};

// Simulation under the martingale change of measure: one distinguished line
// moves as a driftless Brownian motion with the tilted variance and emits
// independent tilted-law copies at rate 2; everything is merged into one
// genealogy with the spine leaf marked.
inline SpineResult spine_simulate(const Normalization& norm, double t_end,
                                  std::uint64_t seed,
                                  std::vector<double> checkpoints = {},
                                  std::size_t population_cap = kDefaultPopulationCap) {
  if (!norm.is_tilted())
    throw Error("spine_simulate: tilted normalization required");
  if (!(t_end > 0.0)) throw Error("spine_simulate: t_end must be > 0");
  Rng rng(seed);
  SpineResult out;
  GenealogySnapshot& snap = out.snapshot;
  snap.norm = norm;
  snap.final_time = t_end;
  snap.rng_seed = seed;
  snap.checkpoint_times = std::move(checkpoints);
  std::sort(snap.checkpoint_times.begin(), snap.checkpoint_times.end());
  const auto& cps = snap.checkpoint_times;

  // emission clock: rate 2
  std::vector<double> emission_times;
  double s = 0.0;
  for (;;) {
    s += rng.exponential(2.0);
    if (s >= t_end) break;
    emission_times.push_back(s);
  }
  out.emission_count = static_cast<long>(emission_times.size());

  // spine segments between consecutive emissions
  const double sigma2 = norm.variance;
  double seg_start = 0.0, seg_pos = 0.0;
  std::int32_t prev_idx = -1;
  auto add_segment = [&](double seg_end) {
    const double dt = seg_end - seg_start;
    const double end_pos = seg_pos + std::sqrt(sigma2 * dt) * rng.gaussian();
    ParticleRecord r;
    r.birth_time = seg_start;
    r.birth_position = seg_pos;
    r.end_time = seg_end;
    r.position = end_pos;
    r.parent = prev_idx;
    r.status = ParticleStatus::Branched;
    auto lo = std::upper_bound(cps.begin(), cps.end(), seg_start);
    if (prev_idx < 0 && lo != cps.begin() && *(lo - 1) == seg_start) --lo;
    auto hi = std::upper_bound(lo, cps.end(), seg_end);
    r.cp_begin = static_cast<std::int32_t>(lo - cps.begin());
    r.cp_count = static_cast<std::int32_t>(hi - lo);
    r.cp_offset = static_cast<std::int64_t>(snap.checkpoint_values.size());
    double pt = seg_start, px = seg_pos;
    for (auto it = lo; it != hi; ++it) {
      double x;
      if (*it >= seg_end)
        x = end_pos;
      else if (*it <= pt)
        x = px;
      else
        x = bridge_sample(rng, pt, px, seg_end, end_pos, *it, sigma2);
      snap.checkpoint_values.push_back(x);
      pt = *it;
      px = x;
    }
    prev_idx = static_cast<std::int32_t>(snap.particles.size());
    snap.particles.push_back(r);
    seg_start = seg_end;
    seg_pos = end_pos;
  };

  for (double et : emission_times) {
    add_segment(et);
    // independent tilted-law copy started at the spine position
    SimConfig sub;
    sub.norm = norm;
    sub.t_start = et;
    sub.t_end = t_end;
    sub.seed = derive_seed(seed, 0x5eed0000 + snap.particles.size());
    sub.population_cap = population_cap;
    sub.initial_positions = {seg_pos};
    for (double c : cps)
      if (c >= et) sub.checkpoints.push_back(c);
    GenealogySnapshot part = simulate(sub);
    const std::int32_t base = static_cast<std::int32_t>(snap.particles.size());
    const std::int64_t voffset =
        static_cast<std::int64_t>(snap.checkpoint_values.size());
    const std::int32_t cp_shift =
        static_cast<std::int32_t>(cps.size() - part.checkpoint_times.size());
    for (auto rec : part.particles) {
      rec.parent = rec.parent < 0 ? prev_idx : rec.parent + base;
      rec.cp_begin += cp_shift;
      rec.cp_offset += voffset;
      snap.particles.push_back(rec);
    }
    snap.checkpoint_values.insert(snap.checkpoint_values.end(),
                                  part.checkpoint_values.begin(),
                                  part.checkpoint_values.end());
    for (auto l : part.leaves) snap.leaves.push_back(l + base);
    if (snap.particles.size() > population_cap)
      throw PopulationCapError(population_cap, et);
  }
  add_segment(t_end);
  snap.particles.back().status = ParticleStatus::Leaf;
  snap.leaves.push_back(prev_idx);
  out.spine_leaf = prev_idx;
  snap.spine_leaf = prev_idx;
  return out;
}

}  // namespace bbm
