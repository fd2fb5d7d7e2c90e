#pragma once

#include <cmath>
#include <string>

#include "bbmlab/common.hpp"

namespace bbm {

enum class Direction { Max, Min };

// Model parameter set: Brownian variance and drift per unit time, branching
// rate, and which extremum of the cloud is tracked. Two presets are the
// tested surface:
//   standard : variance 1, no drift, maximum; centering sqrt(2)t - 3/(2 sqrt2) ln t
//   tilted   : variance 2, drift 2, minimum; centering (3/2) ln t. In this
//              normalization the natural additive weights are e^{-x}.
struct Normalization {
  double variance = 1.0;
  double drift = 0.0;
  double branch_rate = 1.0;
  Direction direction = Direction::Max;

  static Normalization standard() { return {1.0, 0.0, 1.0, Direction::Max}; }
  static Normalization tilted() { return {2.0, 2.0, 1.0, Direction::Min}; }

  bool is_standard() const {
    return variance == 1.0 && drift == 0.0 && branch_rate == 1.0 &&
           direction == Direction::Max;
  }
  bool is_tilted() const {
    return variance == 2.0 && drift == 2.0 && branch_rate == 1.0 &&
           direction == Direction::Min;
  }

  void validate() const {
    if (!(variance > 0.0)) throw Error("normalization: variance must be > 0");
    if (!(branch_rate > 0.0)) throw Error("normalization: branch_rate must be > 0");
  }

  // Second-order location of the tracked extremum. Defined for the presets.
  double centering(double t) const {
    if (is_standard()) return kSqrt2 * t - 1.5 / kSqrt2 * std::log(t);
    if (is_tilted()) return 1.5 * std::log(t);
    throw Error("centering is defined only for the standard/tilted presets");
  }

  std::string name() const {
    if (is_standard()) return "standard";
    if (is_tilted()) return "tilted";
    return "custom";
  }

  static Normalization from_name(const std::string& s) {
    if (s == "standard") return standard();
    if (s == "tilted") return tilted();
    throw ConfigError("unknown normalization preset: " + s);
  }
};

}  // namespace bbm
