#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bbmlab/common.hpp"
#include "bbmlab/normalization.hpp"

namespace bbm {

// Front equation in the frame moving at speed sqrt(2):
//   u_t = 1/2 u_xx + sqrt(2) u_x + u - u^2,  u(-inf)=1, u(+inf)=0.
// The solver works on the tilted variable w = e^{sqrt2 x} u, which maps the
// advection-diffusion substep to w_t = 1/2 w_xx - w: the critical tip mode
// w ~ a + b x is then in the kernel of the central difference, so the front
// position carries no secular dispersion error (the plain central scheme
// loses O(dx^2) speed on the critical mode, which pollutes the log-drift
// over long horizons). Reaction is the exact pointwise logistic map (Strang
// split); the linear substep is Crank-Nicolson with Rannacher startup.

// Exact solution of u' = u - u^2 over time h; fixes 0 and 1 and preserves
// [0,1] unconditionally.
inline double logistic_reaction(double u, double h) {
  const double a = std::exp(h);
  return u * a / (1.0 + u * (a - 1.0));
}

struct Grid {
  double x_min = -60.0;
  double x_max = 140.0;
  double dx = 0.02;
  double dt = 0.01;

  void validate() const {
    if (!(x_min < x_max) || !(dx > 0.0) || !(dt > 0.0))
      throw Error("grid: invalid parameters");
  }
  int n() const { return static_cast<int>(std::llround((x_max - x_min) / dx)) + 1; }
  double x(int i) const { return x_min + i * dx; }
};

struct Field {
  Grid grid;
  double t = 0.0;
  std::vector<double> values;  // u on the moving-frame grid, in [0,1]
  long clamp_count = 0;

  double value_at(double frame_x) const {
    const double pos = (frame_x - grid.x_min) / grid.dx;
    if (pos < 0.0 || pos > grid.n() - 1.0)
      throw Error("field: evaluation outside grid");
    const int i = std::min(static_cast<int>(pos), grid.n() - 2);
    const double w = pos - i;
    return (1.0 - w) * values[i] + w * values[i + 1];
  }
};

// Nonnegative function with declared compact support.
struct CompactBump {
  double lo = 0.0;
  double hi = 0.0;
  std::function<double(double)> f;

  double operator()(double x) const {
    if (!f || x < lo || x > hi) return 0.0;
    const double v = f(x);
    if (v < 0.0) throw Error("compact bump: negative value");
    return v;
  }

  static CompactBump cosine(double lo, double hi, double height) {
    CompactBump b;
    b.lo = lo;
    b.hi = hi;
    b.f = [lo, hi, height](double x) {
      const double u = (x - lo) / (hi - lo);
      return height * 0.5 * (1.0 - std::cos(2.0 * kPi * u));
    };
    return b;
  }
};

struct InitialCondition {
  enum class Kind { Heaviside, TruncatedExp, ExpPhi };
  Kind kind = Kind::Heaviside;
  double offset = 0.0;
  CompactBump phi;
  double delta = 0.0;

  static InitialCondition heaviside(double offset = 0.0) {
    InitialCondition ic;
    ic.kind = Kind::Heaviside;
    ic.offset = offset;
    return ic;
  }
  static InitialCondition truncated_exp(CompactBump phi, double delta) {
    InitialCondition ic;
    ic.kind = Kind::TruncatedExp;
    ic.phi = std::move(phi);
    ic.delta = delta;
    return ic;
  }
  static InitialCondition exp_phi(CompactBump phi) {
    InitialCondition ic;
    ic.kind = Kind::ExpPhi;
    ic.phi = std::move(phi);
    return ic;
  }

  double u0(double x) const {
    switch (kind) {
      case Kind::Heaviside:
        return x < offset ? 1.0 : 0.0;
      case Kind::TruncatedExp:
        if (x < -delta) return 1.0;
        return 1.0 - std::exp(-phi(-x));
      case Kind::ExpPhi:
        return 1.0 - std::exp(-phi(-x));
    }
    return 0.0;
  }

  // u value enforced at the left boundary
  double left_limit() const { return kind == Kind::ExpPhi ? 0.0 : 1.0; }
};

class FkppSolver {
 public:
  FkppSolver(const Grid& grid, const InitialCondition& ic) : grid_(grid) {
    grid_.validate();
    const int n = grid_.n();
    tilt_.resize(n);
    inv_tilt_.resize(n);
    for (int i = 0; i < n; ++i) {
      tilt_[i] = std::exp(kSqrt2 * grid_.x(i));
      inv_tilt_[i] = 1.0 / tilt_[i];
    }
    w_.resize(n);
    for (int i = 0; i < n; ++i) {
      // cell-averaged initial datum: keeps jump locations grid-independent,
      // otherwise the front inherits an O(dx) offset from the jump alignment
      double u = 0.0;
      for (double off : {-0.375, -0.125, 0.125, 0.375})
        u += 0.25 * ic.u0(grid_.x(i) + off * grid_.dx);
      u = std::clamp(u, 0.0, 1.0);
      w_[i] = u * tilt_[i];
    }
    left_u_ = ic.left_limit();
    w_.front() = left_u_ * tilt_.front();
    w_.back() = 0.0;

    beta_ = grid_.dt / (4.0 * grid_.dx * grid_.dx);
    gamma_ = 0.5 * grid_.dt;
    factorize();
    scratch_.resize(n);
  }

  double time() const { return step_ * grid_.dt; }
  long clamp_count() const { return clamp_count_; }

  Field field() const {
    Field f;
    f.grid = grid_;
    f.t = time();
    f.clamp_count = clamp_count_;
    f.values.resize(w_.size());
    for (std::size_t i = 0; i < w_.size(); ++i)
      f.values[i] = std::clamp(w_[i] * inv_tilt_[i], 0.0, 1.0);
    return f;
  }

  void advance_to(double t_target) {
    const long target = std::llround(t_target / grid_.dt);
    while (step_ < target) {
      single_step();
      ++step_;
      if (step_ % escape_check_interval_ == 0) check_front_escape();
    }
    check_front_escape();
  }

 private:
  void factorize() {
    const int m = grid_.n() - 2;  // interior points
    const double d0 = 1.0 + 2.0 * beta_ + gamma_;
    diag_.assign(m, d0);
    cprime_.resize(m);
    cprime_[0] = -beta_ / diag_[0];
    for (int i = 1; i < m; ++i) {
      diag_[i] = d0 + beta_ * cprime_[i - 1];
      cprime_[i] = -beta_ / diag_[i];
    }
  }

  void reaction_half(double h) {
    const double a = std::exp(0.5 * h);
    const int n = grid_.n();
    for (int i = 1; i < n - 1; ++i) {
      double u = w_[i] * inv_tilt_[i];
      if (u < 0.0 || u > 1.0) {
        if (u < -1e-6 || u > 1.0 + 1e-6) ++clamp_count_;
        u = std::clamp(u, 0.0, 1.0);
      }
      u = u * a / (1.0 + u * (a - 1.0));  // logistic_reaction(u, h/2) inlined
      w_[i] = u * tilt_[i];
    }
  }

  // One linear substep for w_t = 1/2 w_xx - w: Crank-Nicolson over dt, or
  // implicit Euler over dt/2 (Rannacher startup). Both share the LHS matrix.
  void diffuse(bool implicit_euler) {
    const int n = grid_.n();
    const int m = n - 2;
    auto& rhs = scratch_;
    if (implicit_euler) {
      for (int i = 1; i < n - 1; ++i) rhs[i - 1] = w_[i];
    } else {
      const double d = 1.0 - 2.0 * beta_ - gamma_;
      for (int i = 1; i < n - 1; ++i)
        rhs[i - 1] = beta_ * w_[i - 1] + d * w_[i] + beta_ * w_[i + 1];
    }
    rhs[0] += beta_ * w_.front();
    rhs[m - 1] += beta_ * w_.back();
    // Thomas solve with cached factorization
    rhs[0] /= diag_[0];
    for (int i = 1; i < m; ++i)
      rhs[i] = (rhs[i] + beta_ * rhs[i - 1]) / diag_[i];
    for (int i = m - 2; i >= 0; --i) rhs[i] -= cprime_[i] * rhs[i + 1];
    for (int i = 1; i < n - 1; ++i) w_[i] = rhs[i - 1];
  }

  void single_step() {
    const double h = grid_.dt;
    reaction_half(h);
    if (step_ < 2) {
      diffuse(true);
      diffuse(true);
    } else {
      diffuse(false);
    }
    reaction_half(h);
  }

  void check_front_escape() const {
    const int n = grid_.n();
    // the state 10 cells in from either boundary must still look like the
    // boundary value, otherwise a front has drifted into the wall. The wave
    // back decays at rate 2 - sqrt2, so 0.02 corresponds to a guard band of
    // about 7 length units.
    const double left_probe = w_[10] * inv_tilt_[10];
    if (left_u_ == 1.0) {
      if (left_probe < 1.0 - 0.02) throw Error("front escaped grid (left)");
    } else if (left_probe > 0.02) {
      throw Error("front escaped grid (left)");
    }
    int right_cross = -1;
    for (int i = n - 2; i >= 0; --i) {
      if (w_[i] * inv_tilt_[i] >= 0.5) {
        right_cross = i;
        break;
      }
    }
    if (right_cross > n - 11) throw Error("front escaped grid (right)");
  }

  Grid grid_;
  std::vector<double> w_;  // tilted state e^{sqrt2 x} u
  std::vector<double> tilt_, inv_tilt_, diag_, cprime_, scratch_;
  double beta_ = 0.0;
  double gamma_ = 0.0;
  double left_u_ = 1.0;
  long step_ = 0;
  long clamp_count_ = 0;
  long escape_check_interval_ = 200;
};

// Evolve the initial data and return fields at the requested times
// (each snapped to the nearest time step).
inline std::vector<Field> evolve(const InitialCondition& ic, double t_end,
                                 const Grid& grid,
                                 std::vector<double> snapshot_times) {
  if (!(t_end > 0.0)) throw Error("evolve: t_end must be > 0");
  std::sort(snapshot_times.begin(), snapshot_times.end());
  for (double s : snapshot_times)
    if (s <= 0.0 || s > t_end + 1e-9)
      throw Error("evolve: snapshot times must lie in (0, t_end]");
  FkppSolver solver(grid, ic);
  std::vector<Field> out;
  for (double s : snapshot_times) {
    solver.advance_to(s);
    out.push_back(solver.field());
  }
  return out;
}

// Location of the u = 1/2 crossing in fixed-frame coordinates.
inline double median_front(const Field& field) {
  const int n = field.grid.n();
  for (int i = n - 2; i >= 0; --i) {
    if (field.values[i] >= 0.5 && field.values[i + 1] < 0.5) {
      const double frac =
          (field.values[i] - 0.5) / (field.values[i] - field.values[i + 1]);
      return field.grid.x(i) + frac * field.grid.dx + kSqrt2 * field.t;
    }
  }
  throw Error("median_front: no u=1/2 crossing");
}

namespace detail {

// trapezoid integral of f(y) * u(t, y + sqrt2 t) * e^{sqrt2 y} over grid
// points y in [lo, hi]; the tilted product is computed without overflow.
inline double tilted_quadrature(const Field& field, double lo, double hi,
                                const std::function<double(double)>& weight,
                                double* edge_integrand = nullptr) {
  const Grid& g = field.grid;
  const int n = g.n();
  double sum = 0.0;
  double prev = 0.0;
  bool have_prev = false;
  double last = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = g.x(i);
    if (y < lo || y > hi) continue;
    const double tilted = field.values[i] * std::exp(kSqrt2 * y);
    const double f = tilted * weight(y);
    if (have_prev) sum += 0.5 * (prev + f) * g.dx;
    prev = f;
    have_prev = true;
    last = f;
  }
  if (edge_integrand) *edge_integrand = last;
  return sum;
}

}  // namespace detail

// sqrt(2/pi) * int_0^inf u(r, y + sqrt2 r) y e^{sqrt2 y} dy on the grid.
inline double c_integral(const Field& field) {
  double edge = 0.0;
  const double v = std::sqrt(2.0 / kPi) *
                   detail::tilted_quadrature(
                       field, 0.0, field.grid.x_max,
                       [](double y) { return y; }, &edge);
  if (v > 0.0 && edge > 1e-12 * v)
    throw Error("c_integral: integrand not decayed below 1e-12 at grid edge");
  return v;
}

// Same quadrature restricted to y in [a1 sqrt(r), a2 sqrt(r)].
inline double windowed_c_integral(const Field& field, double a1, double a2) {
  if (!(a1 >= 0.0 && a1 < a2)) throw Error("windowed_c_integral: need 0 <= a1 < a2");
  const double sr = std::sqrt(field.t);
  return std::sqrt(2.0 / kPi) *
         detail::tilted_quadrature(field, a1 * sr, std::min(a2 * sr, field.grid.x_max),
                                   [](double y) { return y; });
}

// Gaussian-propagated tail estimate
//   psi(r,t,x) = e^{-sqrt2 X} / sqrt(2 pi (t-r)) *
//     int_0^inf u(r, y+sqrt2 r) e^{sqrt2 y - (y-X)^2/(2(t-r))}
//                (1 - e^{-2 y (x - m(t))/(t-r)}) dy,  X = x - sqrt2 t,
// valid for t >= 8r and x >= m(t) + 8r.
inline double psi(double r, double t, double x, const Field& field_at_r) {
  if (std::fabs(field_at_r.t - r) > 1e-9)
    throw Error("psi: field is not at time r");
  if (!(t >= 8.0 * r))
    throw Error("psi: regime violated: t >= 8r required");
  const double mt = Normalization::standard().centering(t);
  if (!(x >= mt + 8.0 * r))
    throw Error("psi: regime violated: x >= m(t) + 8r required");
  const double X = x - kSqrt2 * t;
  const double tr = t - r;
  double edge = 0.0;
  const double integral = detail::tilted_quadrature(
      field_at_r, 0.0, field_at_r.grid.x_max,
      [&](double y) {
        const double gauss = std::exp(-(y - X) * (y - X) / (2.0 * tr));
        const double ballot = 1.0 - std::exp(-2.0 * y * (x - mt) / tr);
        return gauss * ballot;
      },
      &edge);
  if (integral > 0.0 && edge > 1e-10 * integral)
    throw Error("psi: quadrature not converged at grid edge; increase r or grid");
  return std::exp(-kSqrt2 * X) / std::sqrt(2.0 * kPi * tr) * integral;
}

// Laplace-functional prediction dual to the particle system: evolves
// u0 = 1 - e^{-phi(-.)} and returns v(t, x_eval) = 1 - u, the predicted
// value of E exp(-phi(N(t) - x_eval)). With Heaviside data the same routine
// predicts P(X_1(t) <= x_eval).
inline double laplace_prediction(const CompactBump& phi, double t,
                                 double x_eval, const Grid& grid) {
  const auto fields = evolve(InitialCondition::exp_phi(phi), t, grid, {t});
  const double frame_x = x_eval - kSqrt2 * t;
  return 1.0 - fields.back().value_at(frame_x);
}

struct TailFit {
  double amplitude = 0.0;  // A in u(t, m(t)+x) ~ A x e^{-sqrt2 x}
  double offset = 0.0;     // subleading shift: h(x) fitted as A (x + offset)
  double residual = 0.0;   // relative rms misfit over the window
};

// Fit of the front-tail amplitude over x in [window_lo, window_hi] around
// the centering m(t), using the last field of the sequence. The tilted tail
// h(x) = u e^{sqrt2 x} is fitted as A (x + b): the O(1) offset b is a real
// subleading feature of the front tail and leaving it free keeps the
// amplitude unbiased at finite horizons.
inline TailFit tail_constant_fit(const std::vector<Field>& fields,
                                 double window_lo = 3.0, double window_hi = 8.0,
                                 double residual_threshold = 0.1) {
  if (fields.empty()) throw Error("tail_constant_fit: no fields");
  const Field& f = fields.back();
  const double m_frame =
      Normalization::standard().centering(f.t) - kSqrt2 * f.t;
  std::vector<double> xs, hs;
  const Grid& g = f.grid;
  for (int i = 0; i < g.n(); ++i) {
    const double x = g.x(i) - m_frame;
    if (x < window_lo || x > window_hi) continue;
    xs.push_back(x);
    hs.push_back(f.values[i] * std::exp(kSqrt2 * x));
  }
  if (xs.size() < 8) throw Error("tail_constant_fit: window not on grid");
  double shh = 0.0;
  for (double h : hs) shh += h * h;
  if (shh < 1e-280) throw Error("tail_constant_fit: no tail mass");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    mh += hs[i];
  }
  mx /= n;
  mh /= n;
  double sxx = 0.0, sxh = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxh += (xs[i] - mx) * (hs[i] - mh);
  }
  TailFit fit;
  fit.amplitude = sxh / sxx;
  const double intercept = mh - fit.amplitude * mx;
  fit.offset = intercept / fit.amplitude;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double rr = hs[i] - fit.amplitude * xs[i] - intercept;
    rss += rr * rr;
  }
  fit.residual = std::sqrt(rss / shh);
  if (fit.residual > residual_threshold)
    throw Error("tail_constant_fit: residual " + std::to_string(fit.residual) +
                " above threshold");
  return fit;
}

struct WaveProfile {
  std::vector<double> xs;
  std::vector<double> w;

  double value_at(double x) const {
    if (x <= xs.front()) return 0.0;
    if (x >= xs.back()) return 1.0;
    const double pos = (x - xs.front()) / (xs[1] - xs[0]);
    const std::size_t i =
        std::min(static_cast<std::size_t>(pos), xs.size() - 2);
    const double frac = pos - static_cast<double>(i);
    return (1.0 - frac) * w[i] + frac * w[i + 1];
  }
};

// Traveling-wave profile: solves 1/2 w'' + sqrt2 w' + w^2 - w = 0 with
// w(-inf)=0, w(+inf)=1, normalized by w(0)=1/2. Starting on the unstable
// mode at the left fixed point and integrating rightwards converges onto
// the wave (the right fixed point is attracting), so a single shot followed
// by a translation suffices.
inline WaveProfile wave_profile(double dx = 1e-3, double tolerance = 1e-5,
                                double x_left = -30.0, double x_right = 40.0) {
  const double lambda_plus = 2.0 - kSqrt2;
  const double eps = 1e-9;
  double w = eps, dw = lambda_plus * eps;
  const auto rhs = [](double w_, double dw_, double& ddw) {
    ddw = -2.0 * kSqrt2 * dw_ - 2.0 * (w_ * w_ - w_);
  };
  std::vector<double> xs_raw, w_raw;
  const long steps = std::lround((x_right - x_left) / dx);
  xs_raw.reserve(steps + 1);
  w_raw.reserve(steps + 1);
  for (long s = 0; s <= steps; ++s) {
    xs_raw.push_back(x_left + s * dx);
    w_raw.push_back(w);
    double k1w = dw, k1d;
    rhs(w, dw, k1d);
    double k2w = dw + 0.5 * dx * k1d, k2d;
    rhs(w + 0.5 * dx * k1w, k2w, k2d);
    double k3w = dw + 0.5 * dx * k2d, k3d;
    rhs(w + 0.5 * dx * k2w, k3w, k3d);
    double k4w = dw + dx * k3d, k4d;
    rhs(w + dx * k3w, k4w, k4d);
    w += dx / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    dw += dx / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
  }
  // locate the half crossing
  std::size_t ci = 0;
  for (std::size_t i = 0; i + 1 < w_raw.size(); ++i) {
    if (w_raw[i] < 0.5 && w_raw[i + 1] >= 0.5) {
      ci = i;
      break;
    }
  }
  if (ci == 0) throw Error("wave_profile: no half crossing; residual " +
                           std::to_string(std::fabs(w_raw.back() - 1.0)));
  const double residual = std::fabs(w_raw.back() - 1.0);
  if (residual > tolerance)
    throw Error("wave_profile: did not converge; residual " +
                std::to_string(residual));
  const double frac = (0.5 - w_raw[ci]) / (w_raw[ci + 1] - w_raw[ci]);
  const double x_half = xs_raw[ci] + frac * dx;

  WaveProfile out;
  const long k_lo = std::lround(std::ceil((x_left - x_half) / dx)) + 2;
  const long k_hi = std::lround(std::floor((x_right - x_half) / dx)) - 2;
  for (long k = k_lo; k <= k_hi; ++k) {
    const double x = k * dx;
    const double pos = (x + x_half - x_left) / dx;
    const std::size_t i = std::min(static_cast<std::size_t>(pos), w_raw.size() - 2);
    const double f = pos - static_cast<double>(i);
    out.xs.push_back(x);
    out.w.push_back(std::clamp((1.0 - f) * w_raw[i] + f * w_raw[i + 1], 0.0, 1.0));
  }
  return out;
}

}  // namespace bbm
