#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bbmlab/common.hpp"
#include "bbmlab/path.hpp"
#include "bbmlab/special_functions.hpp"

namespace bbm {

// Empirical CDF, right-continuous step function.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw Error("ecdf: empty sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / sorted_.size();
  }

  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

  double quantile(double q) const {
    const std::size_t i = std::min(
        sorted_.size() - 1,
        static_cast<std::size_t>(q * static_cast<double>(sorted_.size())));
    return sorted_[i];
  }

 private:
  std::vector<double> sorted_;
};

// Exact sup-norm distance over the merged jump set.
inline double ks_distance(const Ecdf& a, const Ecdf& b) {
  const auto& xa = a.sorted();
  const auto& xb = b.sorted();
  const double na = static_cast<double>(xa.size());
  const double nb = static_cast<double>(xb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xa.size() || j < xb.size()) {
    double x;
    if (j >= xb.size() || (i < xa.size() && xa[i] <= xb[j]))
      x = xa[i];
    else
      x = xb[j];
    while (i < xa.size() && xa[i] <= x) ++i;
    while (j < xb.size() && xb[j] <= x) ++j;
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  return d;
}

inline double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double variance_of(std::span<const double> xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline double stderr_of(std::span<const double> xs) {
  return std::sqrt(variance_of(xs) / static_cast<double>(xs.size()));
}

inline double median_inplace(std::vector<double>& xs) {
  if (xs.empty()) throw Error("median of empty sample");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
  double hi = xs[mid];
  if (xs.size() % 2 == 1) return hi;
  std::nth_element(xs.begin(), xs.begin() + mid - 1, xs.begin() + mid);
  return 0.5 * (hi + xs[mid - 1]);
}

// Median of block means; the default location estimator for heavy-tailed
// martingale readouts.
inline double median_of_means(std::span<const double> xs, int blocks = 16) {
  if (xs.empty()) throw Error("median_of_means: empty sample");
  blocks = std::min<int>(blocks, static_cast<int>(xs.size()));
  std::vector<double> block_means(blocks, 0.0);
  std::vector<int> counts(blocks, 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int b = static_cast<int>(i % blocks);
    block_means[b] += xs[i];
    counts[b] += 1;
  }
  for (int b = 0; b < blocks; ++b) block_means[b] /= counts[b];
  return median_inplace(block_means);
}

// Nonparametric 95% band for the median of the 16 block means
// (sign-test inversion on the block count).
inline std::pair<double, double> median_of_means_band(
    std::span<const double> xs, int blocks = 16) {
  blocks = std::min<int>(blocks, static_cast<int>(xs.size()));
  std::vector<double> block_means(blocks, 0.0);
  std::vector<int> counts(blocks, 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int b = static_cast<int>(i % blocks);
    block_means[b] += xs[i];
    counts[b] += 1;
  }
  for (int b = 0; b < blocks; ++b) block_means[b] /= counts[b];
  std::sort(block_means.begin(), block_means.end());
  // lower rank r such that P(Bin(blocks,1/2) < r) <= 0.025
  int r = 0;
  double cdf = 0.0;
  const double p = std::pow(0.5, blocks);
  double binom = p;  // C(blocks,0) * 0.5^blocks
  while (r < blocks / 2 && cdf + binom <= 0.025) {
    cdf += binom;
    binom *= static_cast<double>(blocks - r) / (r + 1);
    ++r;
  }
  const int lo = r, hi = blocks - 1 - r;
  return {block_means[lo], block_means[hi]};
}

inline Estimate estimate_from(std::span<const double> xs, int blocks = 16) {
  Estimate e;
  e.n = static_cast<long>(xs.size());
  e.mean = mean_of(xs);
  e.median_of_means = median_of_means(xs, blocks);
  e.half_width = xs.size() > 1 ? 1.959963984540054 * stderr_of(xs) : 0.0;
  return e;
}

inline double pearson_correlation(std::span<const double> xs,
                                  std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw Error("pearson: bad sample sizes");
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

struct SlopeFit {
  double slope = 0.0;
  double stderr = 0.0;
  double intercept = 0.0;
};

inline SlopeFit least_squares_slope(std::span<const double> xs,
                                    std::span<const double> ys) {
  const std::size_t n = xs.size();
  if (n < 3 || ys.size() != n) throw Error("least_squares_slope: need >= 3 points");
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    rss += r * r;
  }
  f.stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  return f;
}

// Least-squares slope of log(empirical survival / x) against x over the
// window. With divide_by_x=false the plain log-survival slope is fitted
// (appropriate for exactly exponential tails).
inline SlopeFit tail_slope(std::span<const double> samples,
                           double window_lo, double window_hi,
                           bool divide_by_x = true, int grid_points = 24) {
  if (!(window_lo < window_hi)) throw Error("tail_slope: bad window");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::size_t beyond = sorted.end() -
                       std::upper_bound(sorted.begin(), sorted.end(), window_lo);
  if (beyond < 100)
    throw Error("tail_slope: fewer than 100 samples beyond window start");
  std::vector<double> xs, ys;
  for (int i = 0; i < grid_points; ++i) {
    const double x =
        window_lo + (window_hi - window_lo) * i / (grid_points - 1.0);
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    const double surv = static_cast<double>(sorted.end() - it) / n;
    if (surv <= 0.0) break;  // ran out of tail mass
    double y = std::log(surv);
    if (divide_by_x) {
      if (x <= 0.0) throw Error("tail_slope: window must be positive when dividing by x");
      y -= std::log(x);
    }
    xs.push_back(x);
    ys.push_back(y);
  }
  if (xs.size() < 6) throw Error("tail_slope: insufficient tail mass in window");
  return least_squares_slope(xs, ys);
}

struct GumbelMixtureFit {
  double ks = 1.0;
  double fitted_c = 0.0;
  double dropped_nonpositive_fraction = 0.0;
};

// Fits the scalar c >= 0 minimizing the KS distance between the empirical
// law of the recentred extremum and x -> E_z exp(-c z e^{-sqrt2 x}).
// Nonpositive z samples (possible at finite horizon) are dropped and the
// dropped fraction reported.
inline GumbelMixtureFit gumbel_mixture_check(std::span<const double> max_samples,
                                             std::span<const double> z_samples,
                                             std::size_t z_subsample = 2000) {
  std::vector<double> z;
  z.reserve(z_samples.size());
  for (double v : z_samples)
    if (v > 0.0) z.push_back(v);
  if (z.empty()) throw Error("gumbel_mixture_check: degenerate z samples (all <= 0)");
  GumbelMixtureFit fit;
  fit.dropped_nonpositive_fraction =
      1.0 - static_cast<double>(z.size()) / z_samples.size();
  if (z.size() > z_subsample) {
    // deterministic thinning
    std::vector<double> picked;
    picked.reserve(z_subsample);
    const double step = static_cast<double>(z.size()) / z_subsample;
    for (std::size_t i = 0; i < z_subsample; ++i)
      picked.push_back(z[static_cast<std::size_t>(i * step)]);
    z.swap(picked);
  }

  std::vector<double> xs(max_samples.begin(), max_samples.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) throw Error("gumbel_mixture_check: empty max samples");

  const auto ks_at = [&](double c) {
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double s = c * std::exp(-kSqrt2 * xs[i]);
      double f = 0.0;
      for (double zv : z) f += std::exp(-s * zv);
      f /= static_cast<double>(z.size());
      const double lo = static_cast<double>(i) / n;
      const double hi = static_cast<double>(i + 1) / n;
      d = std::max(d, std::max(std::fabs(f - lo), std::fabs(f - hi)));
    }
    return d;
  };

  // golden section on ln c
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(1e-3), b = std::log(1e3);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = ks_at(std::exp(x1)), f2 = ks_at(std::exp(x2));
  for (int it = 0; it < 48; ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - phi * (b - a);
      f1 = ks_at(std::exp(x1));
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + phi * (b - a);
      f2 = ks_at(std::exp(x2));
    }
  }
  fit.fitted_c = std::exp(0.5 * (a + b));
  fit.ks = ks_at(fit.fitted_c);
  return fit;
}

// Chi-square goodness of fit of per-window count samples against Poisson
// laws with the stated means. Tail bins are merged from the right; if any
// remaining cell still expects < 1 count, the caller must re-bin.
inline double poisson_window_test(
    const std::vector<std::vector<long>>& counts_per_window,
    std::span<const double> expected_means) {
  if (counts_per_window.size() < 5)
    throw Error("poisson_window_test: need >= 5 windows");
  if (counts_per_window.size() != expected_means.size())
    throw Error("poisson_window_test: size mismatch");
  double stat = 0.0;
  double dof = 0.0;
  for (std::size_t w = 0; w < counts_per_window.size(); ++w) {
    const auto& counts = counts_per_window[w];
    const double n = static_cast<double>(counts.size());
    if (counts.size() < 200)
      throw Error("poisson_window_test: need >= 200 samples per window");
    const double mean = expected_means[w];
    long kmax = 0;
    for (long c : counts) kmax = std::max(kmax, c);
    // Poisson pmf expected counts, merging the right tail to keep cells >= 1.
    std::vector<double> expect;
    double pmf = std::exp(-mean);
    double cum = 0.0;
    for (long k = 0; k <= kmax; ++k) {
      expect.push_back(pmf * n);
      cum += pmf;
      pmf *= mean / static_cast<double>(k + 1);
    }
    expect.push_back((1.0 - cum) * n);  // tail bin k > kmax
    std::vector<double> observed(expect.size(), 0.0);
    for (long c : counts) observed[static_cast<std::size_t>(c)] += 1.0;
    // merge from the right until the tail cell expects >= 1
    while (expect.size() > 2 && expect.back() < 1.0) {
      expect[expect.size() - 2] += expect.back();
      observed[observed.size() - 2] += observed.back();
      expect.pop_back();
      observed.pop_back();
    }
    for (std::size_t k = 0; k < expect.size(); ++k) {
      if (expect[k] < 1.0)
        throw Error("poisson_window_test: expected count < 1 in a cell; re-bin");
      stat += (observed[k] - expect[k]) * (observed[k] - expect[k]) / expect[k];
    }
    dof += static_cast<double>(expect.size()) - 1.0;
  }
  return chi_squared_sf(stat, dof);
}

}  // namespace bbm
