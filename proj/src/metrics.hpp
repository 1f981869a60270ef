#pragma once

#include <string>
#include <vector>

#include "density.hpp"

namespace difftv {

struct TvResult {
  double raw = 0.0;        // 1/2 integral |p - q| over the window
  double corrected = 0.0;  // raw + half the combined leaked mass (upper bound)
};

// Trapezoidal 1/2 * int |p - q|. Grids must match exactly.
TvResult tv_distance(const DensityGrid& p, const DensityGrid& q);

struct KlResult {
  double value = 0.0;
  double clamped_mass = 0.0;  // q-mass over points where p hit the density floor
};

// int q log(q/p) with p clamped below at 1e-300. A result below -1e-10
// signals quadrature breakdown and throws.
KlResult kl_divergence(const DensityGrid& q, const DensityGrid& p);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  bool excluded_smallest = false;  // pre-asymptotic transient dropped
};

// Least squares of log TV on log T. Requires >= 3 points with TV > 0.
// The smallest-T point is refit away when its residual exceeds 3x the RMS.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

struct ConvergenceRow {
  int T = 0;
  std::string kind;
  double tv = 0.0;
  double tv_corrected = 0.0;
  double kl = 0.0;
  int grid_points = 0;
  double leaked_mass = 0.0;
};

constexpr double kPinskerSlack = 1e-6;

// TV <= sqrt(KL/2) + slack on a single measurement pair.
bool pinsker_ok(double tv, double kl);

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  struct SamplerFit {
    std::string kind;
    RateFit fit;
    bool fitted = false;  // false when fewer than 3 points were available
  };
  std::vector<SamplerFit> slopes;
  bool pinsker_all_ok = true;
};

// Re-checks Pinsker on every row and sets the report flag.
bool pinsker_check(ConvergenceReport& report);

}  // namespace difftv
