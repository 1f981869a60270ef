#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>

#include "mixture.hpp"
#include "schedule.hpp"

namespace difftv {

// Brute-force Monte Carlo estimates of the closed-form conditional
// quantities, via self-normalized importance sampling from p_data with
// weights proportional to exp(-|x - sqrt(abar) X_0|^2 / (2 (1-abar))).
// Built and trusted before anything downstream consumes module `targets`.

enum class OracleFunctional {
  G,          // E[x - sqrt(abar) X_0 | X_t = x]                      (vector)
  NoiseCov,   // E[Wbar Wbar^T | X_t = x]                             (matrix)
  WCorr,      // third-moment correction feeding the accelerated ODE  (vector)
  Moment1,    // E[ |sqrt(abar) X_0 - x|   | X_t = x]                 (scalar)
  Moment2,    // E[ |sqrt(abar) X_0 - x|^2 | X_t = x]                 (scalar)
};

struct OracleEstimate {
  Eigen::MatrixXd value;      // d x 1 for vectors, d x d for matrices, 1 x 1 for scalars
  Eigen::MatrixXd std_error;  // matching shape, delta-method standard errors
  double n_effective = 0.0;
  bool reliable = true;  // n_effective >= 0.1 n
};

OracleEstimate mc_conditional(const MixtureTarget& target, const Schedule& sched, int t,
                              const Eigen::VectorXd& x, OracleFunctional functional, int n,
                              std::uint64_t seed);

struct SampleTvEstimate {
  double estimate = 0.0;
  double bias_bound = 0.0;  // within-bin variation of the reference density
  double std_error = 0.0;
};

// Binned TV between an empirical sample and a reference density q (d = 1).
SampleTvEstimate mc_sample_tv(std::span<const double> samples,
                              const std::function<double(double)>& q_density, int bins, double lo,
                              double hi);

}  // namespace difftv
