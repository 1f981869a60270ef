#include "density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "parallel.hpp"

namespace difftv {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kBandSigmas = 8.5;

double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

struct StepFields {
  std::vector<double> mu, sd;  // per grid node
};

StepFields step_fields(const Mixture1D& mix, const Schedule& sched, int t, SamplerKind kind,
                       const DensityGrid& g) {
  const double alpha = sched.alpha(t);
  const double abar = sched.alpha_bar(t);
  const double beta = 1.0 - alpha;
  const double sigma = sched.sigma(t);
  const double om = 1.0 - abar;
  const double isq = 1.0 / std::sqrt(alpha);

  StepFields f;
  f.mu.resize(g.n());
  f.sd.resize(g.n());
  for (int i = 0; i < g.n(); ++i) {
    const double x = g.point(i);
    const Bundle1D b = moments1d(mix, abar, x);
    f.mu[i] = (x + beta * b.s) * isq;
    f.sd[i] = kind == SamplerKind::DdpmAccel
                  ? sigma * std::abs(1.0 - beta / (2.0 * om) * b.jac)
                  : sigma;
  }
  return f;
}

// Cubic interpolation coefficients (powers of v - center) through up to four
// points of (vs, ps) bracketing segment j.
struct SegPoly {
  double center;
  double c[4];
};

SegPoly fit_segment(const std::vector<double>& vs, const std::vector<double>& ps, int j) {
  const int n = static_cast<int>(vs.size());
  const int i0 = std::max(j - 1, 0);
  const int i1 = std::min(j + 2, n - 1);
  const int m = i1 - i0 + 1;
  SegPoly seg{};
  seg.center = 0.5 * (vs[j] + vs[j + 1]);

  // Newton divided differences on the m points, then expansion to power basis.
  double xs[4], dd[4];
  for (int i = 0; i < m; ++i) {
    xs[i] = vs[i0 + i] - seg.center;
    dd[i] = ps[i0 + i];
  }
  for (int order = 1; order < m; ++order) {
    for (int i = m - 1; i >= order; --i) {
      dd[i] = (dd[i] - dd[i - 1]) / (xs[i] - xs[i - order]);
    }
  }
  // Horner-style expansion of sum dd[k] prod_{i<k} (v - xs[i])
  double poly[4] = {0, 0, 0, 0};
  for (int k = m - 1; k >= 0; --k) {
    // poly <- poly * (v - xs[k]) + dd[k]
    for (int r = 3; r >= 1; --r) poly[r] = poly[r - 1] - xs[k] * poly[r];
    poly[0] = dd[k] - xs[k] * poly[0];
  }
  for (int r = 0; r < 4; ++r) seg.c[r] = poly[r];
  return seg;
}

}  // namespace

double DensityGrid::trapezoid_mass() const {
  const double h = step();
  double acc = 0.5 * (values.front() + values.back());
  for (int i = 1; i + 1 < n(); ++i) acc += values[i];
  return acc * h;
}

double DensityGrid::at(double x) const {
  if (x < lo || x > hi) return 0.0;
  const double h = step();
  const double u = (x - lo) / h;
  int i = static_cast<int>(u);
  if (i >= n() - 1) i = n() - 2;
  const double f = u - i;
  return values[i] * (1.0 - f) + values[i + 1] * f;
}

DensityGrid standard_normal_grid(const GridSpec& spec) {
  DensityGrid g;
  g.lo = spec.lo;
  g.hi = spec.hi;
  g.values.resize(spec.n_points);
  for (int i = 0; i < spec.n_points; ++i) g.values[i] = std_normal_pdf(g.lo + i * ((g.hi - g.lo) / (spec.n_points - 1)));
  g.mass_in_window = g.trapezoid_mass();
  g.leaked_mass_bound = std::max(0.0, 1.0 - g.mass_in_window);
  return g;
}

DensityGrid analytic_grid(const Mixture1D& mix, double alpha_bar, const GridSpec& spec) {
  DensityGrid g;
  g.lo = spec.lo;
  g.hi = spec.hi;
  g.values.resize(spec.n_points);
  const double h = (spec.hi - spec.lo) / (spec.n_points - 1);
  for (int i = 0; i < spec.n_points; ++i) g.values[i] = density1d(mix, alpha_bar, spec.lo + i * h);
  g.mass_in_window = g.trapezoid_mass();
  g.leaked_mass_bound = std::max(0.0, 1.0 - g.mass_in_window);
  return g;
}

DensityGrid propagate_one_step(const Mixture1D& mix, const Schedule& sched, int t,
                               SamplerKind kind, const DensityGrid& in) {
  if (!sampler_is_stochastic(kind)) {
    throw std::invalid_argument("propagate_one_step: needs a DDPM sampler kind");
  }
  const int G = in.n();
  const double h = in.step();
  const StepFields f = step_fields(mix, sched, t, kind, in);
  for (int j = 0; j + 1 < G; ++j) {
    if (f.mu[j + 1] <= f.mu[j]) {
      throw std::runtime_error("propagate_one_step: mu_t not increasing at t=" +
                               std::to_string(t) + " (state-dependent kernel folded)");
    }
  }

  // node values of p_t(x(v)) dx/dv, the integrand after substituting v = mu_t(x)
  std::vector<double> source(G);
  for (int i = 0; i < G; ++i) {
    double dxdv;
    if (i == 0) {
      dxdv = h / (f.mu[1] - f.mu[0]);
    } else if (i == G - 1) {
      dxdv = h / (f.mu[G - 1] - f.mu[G - 2]);
    } else {
      dxdv = 2.0 * h / (f.mu[i + 1] - f.mu[i - 1]);
    }
    source[i] = in.values[i] * dxdv;
  }

  // per-segment cubic interpolant of the substituted integrand
  std::vector<SegPoly> segs(G - 1);
  std::vector<int> out_lo(G - 1), out_hi(G - 1);
  for (int j = 0; j + 1 < G; ++j) {
    segs[j] = fit_segment(f.mu, source, j);
    const double sb = std::max(0.5 * (f.sd[j] + f.sd[j + 1]), 1e-12);
    const double lo = f.mu[j] - kBandSigmas * sb;
    const double hi = f.mu[j + 1] + kBandSigmas * sb;
    out_lo[j] = std::max(0, static_cast<int>(std::ceil((lo - in.lo) / h)));
    out_hi[j] = std::min(G - 1, static_cast<int>(std::floor((hi - in.lo) / h)));
  }
  // contributing segment range per output node: jlo[i] is the first segment
  // whose output band reaches node i, jhi[i] the last one
  std::vector<int> jlo(G), jhi(G);
  {
    int lo_ptr = 0;
    for (int i = 0; i < G; ++i) {
      while (lo_ptr < G - 2 && out_hi[lo_ptr] < i) ++lo_ptr;
      jlo[i] = lo_ptr;
    }
    int hi_ptr = G - 2;
    for (int i = G - 1; i >= 0; --i) {
      while (hi_ptr > 0 && out_lo[hi_ptr] > i) --hi_ptr;
      jhi[i] = hi_ptr;
    }
  }

  DensityGrid out;
  out.lo = in.lo;
  out.hi = in.hi;
  out.values.resize(G);
  parallel_for(0, G, [&](int i) {
    const double y = in.lo + i * h;
    double acc = 0.0;
    for (int j = jlo[i]; j <= jhi[i]; ++j) {
      if (i < out_lo[j] || i > out_hi[j]) continue;
      const double sb = std::max(0.5 * (f.sd[j] + f.sd[j + 1]), 1e-12);
      const double za = (f.mu[j] - y) / sb;
      const double zb = (f.mu[j + 1] - y) / sb;
      if (za > kBandSigmas || zb < -kBandSigmas) continue;
      const double fa = std_normal_pdf(za);
      const double fb = std_normal_pdf(zb);
      const double M0 = std_normal_cdf(zb) - std_normal_cdf(za);
      const double M1 = sb * (fa - fb);
      const double M2 = sb * sb * (M0 + za * fa - zb * fb);
      const double M3 = sb * sb * sb * ((2.0 + za * za) * fa - (2.0 + zb * zb) * fb);
      // shift interpolant to powers of (v - y)
      const double dyx = y - segs[j].center;
      const double* c = segs[j].c;
      const double d0 = c[0] + dyx * (c[1] + dyx * (c[2] + dyx * c[3]));
      const double d1 = c[1] + dyx * (2.0 * c[2] + dyx * 3.0 * c[3]);
      const double d2 = c[2] + dyx * 3.0 * c[3];
      const double d3 = c[3];
      acc += d0 * M0 + d1 * M1 + d2 * M2 + d3 * M3;
    }
    out.values[i] = std::max(acc, 0.0);
  });

  out.mass_in_window = out.trapezoid_mass();
  out.leaked_mass_bound =
      in.leaked_mass_bound + std::max(0.0, in.mass_in_window - out.mass_in_window);
  return out;
}

DensityGrid propagate_stochastic(const Mixture1D& mix, const Schedule& sched, SamplerKind kind,
                                 const GridSpec& spec) {
  if (!sampler_is_stochastic(kind)) {
    throw std::invalid_argument("propagate_stochastic: needs a DDPM sampler kind");
  }
  const int T = sched.T();
  if (spec.n_points < 256) {
    throw std::invalid_argument("propagate_stochastic: n_points must be >= 256");
  }

  DensityGrid g = standard_normal_grid(spec);
  for (int t = T; t >= 2; --t) {
    g = propagate_one_step(mix, sched, t, kind, g);
    if (g.mass_in_window < 1.0 - spec.leak_tol) {
      throw std::runtime_error(
          "propagate_stochastic: in-window mass " + std::to_string(g.mass_in_window) +
          " fell below 1 - leak_tol at t=" + std::to_string(t) + "; widen the grid window");
    }
  }
  return g;
}

namespace {

double apply_map(const Mixture1D& mix, const Schedule& sched, int t, SamplerKind kind, double x) {
  const double alpha = sched.alpha(t);
  const double abar = sched.alpha_bar(t);
  const double beta = 1.0 - alpha;
  const Bundle1D b = moments1d(mix, abar, x);
  if (kind == SamplerKind::OdePlain) {
    return (x + 0.5 * beta * b.s) / std::sqrt(alpha);
  }
  const double om = 1.0 - abar;
  const double coef = 0.5 * beta + beta * beta / (8.0 * om) - beta * beta / 8.0 * b.s * b.s;
  return (x + coef * b.s + beta * beta / 8.0 * b.w3) / std::sqrt(alpha);
}

double map_derivative_fd(const Mixture1D& mix, const Schedule& sched, int t, SamplerKind kind,
                         double x) {
  const double h = 1e-6 * (1.0 + std::abs(x));
  return (apply_map(mix, sched, t, kind, x + h) - apply_map(mix, sched, t, kind, x - h)) /
         (2.0 * h);
}

// Solve Phi_t(x) = v by Newton with expanding-bracket bisection fallback.
double invert_map(const Mixture1D& mix, const Schedule& sched, int t, SamplerKind kind,
                  double v) {
  auto f = [&](double x) { return apply_map(mix, sched, t, kind, x) - v; };

  double lo = v, hi = v;
  double step = 0.25 * (1.0 + std::abs(v));
  double flo = f(lo), fhi = flo;
  for (int k = 0; k < 64 && (flo > 0.0 || fhi < 0.0); ++k) {
    if (flo > 0.0) {
      lo -= step;
      flo = f(lo);
    }
    if (fhi < 0.0) {
      hi += step;
      fhi = f(hi);
    }
    step *= 2.0;
  }
  if (flo > 0.0 || fhi < 0.0) {
    throw std::runtime_error("pushforward: could not bracket inverse at t=" + std::to_string(t));
  }

  double x = std::clamp(v, lo, hi);
  const double tol = 1e-13 * (1.0 + std::abs(v));
  for (int it = 0; it < 100; ++it) {
    const double fx = f(x);
    if (std::abs(fx) <= tol) return x;
    if (fx > 0.0) hi = x; else lo = x;
    const double dfx = map_derivative_fd(mix, sched, t, kind, x);
    double xn = dfx > 0.0 ? x - fx / dfx : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);  // bisection fallback
    x = xn;
  }
  throw std::runtime_error("pushforward: Newton failed to converge at t=" + std::to_string(t));
}

}  // namespace

DensityGrid pushforward_deterministic(const Mixture1D& mix, const Schedule& sched,
                                      SamplerKind kind, const GridSpec& spec) {
  if (sampler_is_stochastic(kind)) {
    throw std::invalid_argument("pushforward_deterministic: needs an ODE sampler kind");
  }
  const int T = sched.T();
  const int G = spec.n_points;
  if (G < 256) throw std::invalid_argument("pushforward_deterministic: n_points must be >= 256");

  // monotonicity precheck of every map across the window
  const int probes = 257;
  for (int t = 2; t <= T; ++t) {
    double prev = -1e300;
    for (int i = 0; i < probes; ++i) {
      const double x = spec.lo + (spec.hi - spec.lo) * i / (probes - 1);
      const double y = apply_map(mix, sched, t, kind, x);
      if (y <= prev) {
        throw std::runtime_error("pushforward: map not strictly increasing at t=" +
                                 std::to_string(t));
      }
      prev = y;
    }
  }

  DensityGrid g;
  g.lo = spec.lo;
  g.hi = spec.hi;
  g.values.resize(G);
  const double h = (spec.hi - spec.lo) / (G - 1);

  parallel_for(0, G, [&](int i) {
    double target = g.lo + i * h;
    double log_jac = 0.0;
    for (int t = 2; t <= T; ++t) {
      const double x = invert_map(mix, sched, t, kind, target);
      const double d = map_derivative_fd(mix, sched, t, kind, x);
      if (!(d > 0.0)) {
        throw std::runtime_error("pushforward: non-positive map derivative at t=" +
                                 std::to_string(t));
      }
      log_jac += std::log(d);
      target = x;
    }
    // target now holds the t = T preimage; density via change of variables
    g.values[i] = std_normal_pdf(target) * std::exp(-log_jac);
  });

  g.mass_in_window = g.trapezoid_mass();
  g.leaked_mass_bound = std::max(0.0, 1.0 - g.mass_in_window);
  if (g.mass_in_window < 1.0 - spec.leak_tol) {
    throw std::runtime_error("pushforward: in-window mass " + std::to_string(g.mass_in_window) +
                             " fell below 1 - leak_tol; widen the grid window");
  }
  return g;
}

Histogram histogram_density(std::span<const double> samples, int bins, double lo, double hi) {
  if (samples.empty()) throw std::invalid_argument("histogram_density: no samples");
  if (bins < 1 || !(hi > lo)) throw std::invalid_argument("histogram_density: bad window");
  Histogram hist;
  hist.counts.assign(bins, 0);
  const double w = (hi - lo) / bins;
  long inside = 0;
  for (double s : samples) {
    if (s < lo || s >= hi) continue;
    ++hist.counts[static_cast<int>((s - lo) / w)];
    ++inside;
  }
  if (inside == 0) throw std::invalid_argument("histogram_density: window contains no samples");
  hist.total = static_cast<long>(samples.size());
  hist.grid.lo = lo + 0.5 * w;
  hist.grid.hi = hi - 0.5 * w;
  hist.grid.values.resize(bins);
  for (int b = 0; b < bins; ++b) {
    hist.grid.values[b] = static_cast<double>(hist.counts[b]) / (hist.total * w);
  }
  hist.grid.mass_in_window = static_cast<double>(inside) / hist.total;
  hist.grid.leaked_mass_bound = 1.0 - hist.grid.mass_in_window;
  return hist;
}

}  // namespace difftv
