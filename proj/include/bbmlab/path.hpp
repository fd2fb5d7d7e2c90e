#pragma once

#include <vector>

#include "bbmlab/common.hpp"

namespace bbm {

// Piecewise-sampled trajectory: checkpoint times (strictly increasing,
// starting at 0) and the positions at those times.
struct Path {
  std::vector<double> times;
  std::vector<double> values;

  void validate() const {
    if (times.size() != values.size()) throw Error("path: size mismatch");
    if (times.empty() || times.front() != 0.0)
      throw Error("path: first time must be 0");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1]))
        throw Error("path: times must be strictly increasing");
  }

  double final_time() const { return times.back(); }
  double final_value() const { return values.back(); }
};

// Reversed, recentred trajectory: s -> path(T - s) - path(T). Starts at 0.
inline Path reverse_recentre(const Path& p) {
  Path out;
  const double T = p.times.back();
  const double xT = p.values.back();
  out.times.reserve(p.times.size());
  out.values.reserve(p.times.size());
  for (std::size_t i = p.times.size(); i-- > 0;) {
    out.times.push_back(T - p.times[i]);
    out.values.push_back(p.values[i] - xT);
  }
  return out;
}

// Included with the core value types: Monte Carlo scalar summary.
struct Estimate {
  long n = 0;
  double mean = 0.0;
  double median_of_means = 0.0;
  double half_width = 0.0;  // 95% confidence half width

  void validate() const {
    if (n < 1) throw Error("estimate: n must be >= 1");
    if (half_width < 0) throw Error("estimate: negative half width");
  }
};

}  // namespace bbm
