#pragma once

#include <span>
#include <vector>

#include "mixture.hpp"
#include "samplers.hpp"
#include "schedule.hpp"

namespace difftv {

struct GridSpec {
  double lo = -8.0;
  double hi = 8.0;
  int n_points = 4096;
  double leak_tol = 1e-3;
};

// Uniform 1-d grid carrying a probability density with mass accounting.
struct DensityGrid {
  double lo = 0.0, hi = 0.0;
  std::vector<double> values;
  double mass_in_window = 0.0;    // trapezoidal integral of values
  double leaked_mass_bound = 0.0; // upper bound on probability mass outside the window

  int n() const { return static_cast<int>(values.size()); }
  double step() const { return (hi - lo) / (n() - 1); }
  double point(int i) const { return lo + i * step(); }
  double trapezoid_mass() const;
  // linear interpolation, 0 outside the window
  double at(double x) const;
};

DensityGrid standard_normal_grid(const GridSpec& spec);

// Exact q_t on the grid.
DensityGrid analytic_grid(const Mixture1D& mix, double alpha_bar, const GridSpec& spec);

// Law of Y_1 for the stochastic samplers: iterates
//   p_{t-1}(y) = int p_t(x) kappa_t(y|x) dx,  t = T,...,2,
// with kappa_t(.|x) = N(mu_t(x), sd_t(x)^2). Each step integrates a local
// cubic interpolant of p_t exactly against the Gaussian kernel, which stays
// valid when sd_t falls below the grid spacing. Aborts (std::runtime_error)
// when the in-window mass drops below 1 - leak_tol or mu_t is not increasing.
DensityGrid propagate_stochastic(const Mixture1D& mix, const Schedule& sched, SamplerKind kind,
                                 const GridSpec& spec);

// One application of the step-t kernel to an arbitrary grid density
// (linear in the input). Used by propagate_stochastic and by property tests.
DensityGrid propagate_one_step(const Mixture1D& mix, const Schedule& sched, int t,
                               SamplerKind kind, const DensityGrid& in);

// Law of Y_1 for the deterministic samplers: for each grid point y at t=1 the
// chain is inverted step by step (safeguarded Newton, bisection fallback) and
// the density accumulated through the change of variables with
// central-difference map derivatives. Aborts on non-monotone maps or Newton
// failure after 100 iterations.
DensityGrid pushforward_deterministic(const Mixture1D& mix, const Schedule& sched,
                                      SamplerKind kind, const GridSpec& spec);

// Normalized histogram density with per-bin counts retained.
struct Histogram {
  DensityGrid grid;            // bin centers carry density values
  std::vector<long> counts;
  long total = 0;
};
Histogram histogram_density(std::span<const double> samples, int bins, double lo, double hi);

}  // namespace difftv
