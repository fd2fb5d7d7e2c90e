#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "bbmlab/common.hpp"
#include "bbmlab/normalization.hpp"
#include "bbmlab/path.hpp"
#include "bbmlab/point_measure.hpp"

namespace bbm {

enum class ParticleStatus : std::uint8_t { Branched = 0, Leaf = 1, Pruned = 2 };

struct ParticleRecord {
  double birth_time = 0.0;
  double birth_position = 0.0;
  double end_time = 0.0;
  double position = 0.0;  // position at end_time (branch point, leaf, or prune)
  std::int32_t parent = -1;
  ParticleStatus status = ParticleStatus::Leaf;
  // checkpoint coverage of this particle's own lifetime segment
  std::int32_t cp_begin = 0;
  std::int32_t cp_count = 0;
  std::int64_t cp_offset = 0;
};

// Full record of one simulation run: every particle segment with ancestry,
// plus positions along each segment at the requested checkpoint times.
struct GenealogySnapshot {
  Normalization norm;
  double final_time = 0.0;
  std::uint64_t rng_seed = 0;
  std::vector<ParticleRecord> particles;
  std::vector<double> checkpoint_times;
  std::vector<double> checkpoint_values;  // flat, indexed via cp_offset
  std::vector<std::int32_t> leaves;       // indices of surviving leaves
  std::int64_t pruned_count = 0;
  std::int32_t spine_leaf = -1;  // set by the spine-measure simulation

  bool pruning_exposed() const { return pruned_count > 0; }

  PointMeasure leaf_positions() const {
    std::vector<double> xs;
    xs.reserve(leaves.size());
    for (auto i : leaves) xs.push_back(particles[i].position);
    return PointMeasure(std::move(xs));
  }

  std::int32_t extremal_leaf() const {
    if (leaves.empty()) throw Error("snapshot has no leaves");
    std::int32_t best = leaves.front();
    for (auto i : leaves) {
      const bool better = norm.direction == Direction::Max
                              ? particles[i].position > particles[best].position
                              : particles[i].position < particles[best].position;
      if (better) best = i;
    }
    return best;
  }

  // Root-to-leaf chain of particle indices.
  std::vector<std::int32_t> lineage(std::int32_t leaf) const {
    std::vector<std::int32_t> chain;
    for (std::int32_t i = leaf; i >= 0; i = particles[i].parent)
      chain.push_back(i);
    std::reverse(chain.begin(), chain.end());
    return chain;
  }

  // Time at which the lineages of two leaves separated: the birth time of
  // the children of their last common ancestor.
  double split_time(std::int32_t i, std::int32_t j) const {
    if (i == j) throw Error("split_time: undefined for a leaf with itself");
    const auto chain_i = lineage(i);
    const auto chain_j = lineage(j);
    std::size_t k = 0;
    const std::size_t lim = std::min(chain_i.size(), chain_j.size());
    while (k < lim && chain_i[k] == chain_j[k]) ++k;
    if (k == 0) throw Error("split_time: leaves do not share a root");
    if (k == lim && chain_i.size() == chain_j.size())
      throw Error("split_time: arguments are the same lineage");
    // chain[k] is the first differing record on each side; both children of
    // the common ancestor chain[k-1] share a birth time.
    const std::int32_t child = k < chain_i.size() ? chain_i[k] : chain_j[k];
    return particles[child].birth_time;
  }

  // Position of the ancestor of `idx` alive at checkpoint `cp`.
  double ancestral_position(std::int32_t idx, std::int32_t cp) const {
    const double t = checkpoint_times[cp];
    std::int32_t node = idx;
    while (node >= 0) {
      const auto& r = particles[node];
      if (cp >= r.cp_begin && cp < r.cp_begin + r.cp_count)
        return checkpoint_values[r.cp_offset + (cp - r.cp_begin)];
      if (r.parent < 0 && t <= r.birth_time) return r.birth_position;
      node = r.parent;
    }
    throw Error("ancestral_position: checkpoint not covered");
  }

  // Trajectory of a leaf sampled at the checkpoints, with the birth of the
  // root and the final time appended when missing.
  Path ancestral_path(std::int32_t leaf) const {
    Path p;
    // collect (time, value) climbing up, then reverse
    std::vector<std::pair<double, double>> pts;
    std::int32_t node = leaf;
    pts.push_back({particles[leaf].end_time, particles[leaf].position});
    while (node >= 0) {
      const auto& r = particles[node];
      for (std::int32_t c = r.cp_count - 1; c >= 0; --c) {
        const double t = checkpoint_times[r.cp_begin + c];
        if (t < pts.back().first)
          pts.push_back({t, checkpoint_values[r.cp_offset + c]});
      }
      if (r.parent < 0 && pts.back().first > r.birth_time)
        pts.push_back({r.birth_time, r.birth_position});
      node = r.parent;
    }
    std::reverse(pts.begin(), pts.end());
    for (auto& [t, v] : pts) {
      p.times.push_back(t);
      p.values.push_back(v);
    }
    p.validate();
    return p;
  }

  // Leaves (positions recentred at the extremal one) that separated from the
  // extremal lineage after final_time - zeta, plus the atom 0.
  PointMeasure window_decoration(double zeta) const {
    if (!(zeta > 0.0) || zeta > final_time + 1e-12)
      throw Error("window_decoration: zeta must lie in (0, final_time]");
    const std::int32_t top = extremal_leaf();
    const double x_top = particles[top].position;
    const double cutoff = final_time - zeta;
    // mark the extremal lineage with each node's subtree-entry time
    std::vector<std::int32_t> top_chain = lineage(top);
    std::vector<double> atoms{0.0};
    for (auto leaf : leaves) {
      if (leaf == top) continue;
      // last common ancestor = deepest shared node with top_chain
      const auto chain = lineage(leaf);
      std::size_t k = 0;
      const std::size_t lim = std::min(chain.size(), top_chain.size());
      while (k < lim && chain[k] == top_chain[k]) ++k;
      const std::int32_t child = k < chain.size() ? chain[k] : top_chain[k];
      const double tau = particles[child].birth_time;
      if (tau > cutoff) atoms.push_back(particles[leaf].position - x_top);
    }
    return PointMeasure(std::move(atoms));
  }

  // Population extremum at every checkpoint time (over particles alive then,
  // including segments later pruned while they lived).
  std::vector<double> checkpoint_population_extremum(Direction dir) const {
    std::vector<double> out(checkpoint_times.size(),
                            dir == Direction::Max
                                ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity());
    for (const auto& r : particles) {
      for (std::int32_t c = 0; c < r.cp_count; ++c) {
        const double v = checkpoint_values[r.cp_offset + c];
        auto& slot = out[r.cp_begin + c];
        slot = dir == Direction::Max ? std::max(slot, v) : std::min(slot, v);
      }
    }
    return out;
  }
};

}  // namespace bbm
