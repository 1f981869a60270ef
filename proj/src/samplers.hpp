#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "mixture.hpp"
#include "schedule.hpp"

namespace difftv {

enum class SamplerKind { OdePlain, OdeAccel, DdpmPlain, DdpmAccel };

const char* sampler_name(SamplerKind kind);
SamplerKind sampler_from_name(const std::string& name);
bool sampler_is_stochastic(SamplerKind kind);

struct StepContext {
  int t = 0;
  double alpha = 0.0;
  double alpha_bar = 0.0;
  double sigma = 0.0;  // sqrt(1/alpha - 1)
  const MomentBundle* m = nullptr;
};

StepContext make_step_context(const Schedule& sched, const MomentBundle& m);

// Probability-flow update: (x + (1-alpha)/2 * s) / sqrt(alpha).
Eigen::VectorXd ode_step(const Eigen::VectorXd& x, const StepContext& ctx);

// Second-order variant with the |s|^2 and third-moment corrections.
Eigen::VectorXd ode_accel_step(const Eigen::VectorXd& x, const StepContext& ctx);

// mu_t(y) + sigma_t z with mu_t(y) = (y + (1-alpha) s(y)) / sqrt(alpha).
Eigen::VectorXd ddpm_step(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                          const StepContext& ctx);

// Accelerated stochastic update in its score/v_t form:
//   mu_t(y) + sigma { z - (1-alpha)/(2(1-abar)) [ z + (1-abar) s s^T z - v_t(y,z) ] }.
Eigen::VectorXd ddpm_accel_step(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                const StepContext& ctx);

// Same map written through the Jacobian kernel: mu_t(y) + sigma (I - (1-alpha)/(2(1-abar)) J) z.
// Kept as a second algebraic route; the two are asserted equal in tests.
Eigen::VectorXd ddpm_accel_step_kernel(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                       const StepContext& ctx);

struct SamplerSpec {
  SamplerKind kind = SamplerKind::DdpmPlain;
  std::uint64_t base_seed = 0;
};

struct ReverseRun {
  Eigen::MatrixXd endpoints;  // one row per surviving trajectory, state at t = 1
  int requested = 0;
  int failures = 0;  // trajectories that hit a non-finite state
};

// Runs Y_T ~ N(0, I) through t = T,...,2, producing Y_1. Per-trajectory
// counter-based streams keyed on (base_seed, trajectory, t, coordinate), so
// results are independent of threading.
ReverseRun run_reverse(const MixtureTarget& target, const Schedule& sched,
                       const SamplerSpec& spec, int n);

}  // namespace difftv
