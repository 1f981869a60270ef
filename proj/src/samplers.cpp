#include "samplers.hpp"

#include <cmath>
#include <stdexcept>

#include "parallel.hpp"
#include "rng.hpp"

namespace difftv {

const char* sampler_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::OdePlain: return "ODE_PLAIN";
    case SamplerKind::OdeAccel: return "ODE_ACCEL";
    case SamplerKind::DdpmPlain: return "DDPM_PLAIN";
    case SamplerKind::DdpmAccel: return "DDPM_ACCEL";
  }
  return "?";
}

SamplerKind sampler_from_name(const std::string& name) {
  if (name == "ODE_PLAIN") return SamplerKind::OdePlain;
  if (name == "ODE_ACCEL") return SamplerKind::OdeAccel;
  if (name == "DDPM_PLAIN") return SamplerKind::DdpmPlain;
  if (name == "DDPM_ACCEL") return SamplerKind::DdpmAccel;
  throw std::invalid_argument("unknown sampler kind: " + name);
}

bool sampler_is_stochastic(SamplerKind kind) {
  return kind == SamplerKind::DdpmPlain || kind == SamplerKind::DdpmAccel;
}

StepContext make_step_context(const Schedule& sched, const MomentBundle& m) {
  StepContext ctx;
  ctx.t = m.t;
  ctx.alpha = sched.alpha(m.t);
  ctx.alpha_bar = sched.alpha_bar(m.t);
  ctx.sigma = sched.sigma(m.t);
  ctx.m = &m;
  return ctx;
}

Eigen::VectorXd ode_step(const Eigen::VectorXd& x, const StepContext& ctx) {
  const double beta = 1.0 - ctx.alpha;
  return (x + 0.5 * beta * ctx.m->score) / std::sqrt(ctx.alpha);
}

Eigen::VectorXd ode_accel_step(const Eigen::VectorXd& x, const StepContext& ctx) {
  const double beta = 1.0 - ctx.alpha;
  const double om = 1.0 - ctx.alpha_bar;
  const Eigen::VectorXd& s = ctx.m->score;
  const double coef = 0.5 * beta + beta * beta / (8.0 * om) - beta * beta / 8.0 * s.squaredNorm();
  return (x + coef * s + beta * beta / 8.0 * ctx.m->w_corr) / std::sqrt(ctx.alpha);
}

Eigen::VectorXd ddpm_step(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                          const StepContext& ctx) {
  const double beta = 1.0 - ctx.alpha;
  return (y + beta * ctx.m->score) / std::sqrt(ctx.alpha) + ctx.sigma * z;
}

Eigen::VectorXd ddpm_accel_step(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                const StepContext& ctx) {
  const double beta = 1.0 - ctx.alpha;
  const double om = 1.0 - ctx.alpha_bar;
  const Eigen::VectorXd& s = ctx.m->score;
  const Eigen::VectorXd v = ctx.m->noise_cov * z;  // E[Wbar Wbar^T | y] z
  const Eigen::VectorXd corr = z + om * s * (s.dot(z)) - v;
  const Eigen::VectorXd mu = (y + beta * s) / std::sqrt(ctx.alpha);
  return mu + ctx.sigma * (z - beta / (2.0 * om) * corr);
}

Eigen::VectorXd ddpm_accel_step_kernel(const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                                       const StepContext& ctx) {
  const double beta = 1.0 - ctx.alpha;
  const double om = 1.0 - ctx.alpha_bar;
  const Eigen::VectorXd mu = (y + beta * ctx.m->score) / std::sqrt(ctx.alpha);
  const Eigen::MatrixXd gain =
      Eigen::MatrixXd::Identity(y.size(), y.size()) - beta / (2.0 * om) * ctx.m->jac;
  return mu + ctx.sigma * gain * z;
}

ReverseRun run_reverse(const MixtureTarget& target, const Schedule& sched,
                       const SamplerSpec& spec, int n) {
  const int d = target.dim();
  const int T = sched.T();
  const bool stochastic = sampler_is_stochastic(spec.kind);

  Eigen::MatrixXd points(n, d);
  std::vector<char> ok(n, 1);

  parallel_for(0, n, [&](int i) {
    CounterRng rng(spec.base_seed, StreamTag::Reverse, static_cast<std::uint64_t>(i));
    // counters: step slot T+1 holds the initializer, slot t the per-step noise
    auto ctr = [d](int slot, int j) {
      return static_cast<std::uint64_t>(slot) * static_cast<std::uint64_t>(d + 1) +
             static_cast<std::uint64_t>(j);
    };
    Eigen::VectorXd y(d), z(d);
    for (int j = 0; j < d; ++j) y[j] = rng.normal(ctr(T + 1, j));

    for (int t = T; t >= 2; --t) {
      const MomentBundle m = moments(target, sched, t, y);
      const StepContext ctx = make_step_context(sched, m);
      switch (spec.kind) {
        case SamplerKind::OdePlain:
          y = ode_step(y, ctx);
          break;
        case SamplerKind::OdeAccel:
          y = ode_accel_step(y, ctx);
          break;
        case SamplerKind::DdpmPlain:
          for (int j = 0; j < d; ++j) z[j] = rng.normal(ctr(t, j));
          y = ddpm_step(y, z, ctx);
          break;
        case SamplerKind::DdpmAccel:
          for (int j = 0; j < d; ++j) z[j] = rng.normal(ctr(t, j));
          y = ddpm_accel_step(y, z, ctx);
          break;
      }
      if (!y.allFinite()) {
        ok[i] = 0;
        return;
      }
    }
    points.row(i) = y.transpose();
  });
  (void)stochastic;

  ReverseRun run;
  run.requested = n;
  int kept = 0;
  for (int i = 0; i < n; ++i) kept += ok[i];
  run.endpoints.resize(kept, d);
  int r = 0;
  for (int i = 0; i < n; ++i) {
    if (ok[i]) run.endpoints.row(r++) = points.row(i);
  }
  run.failures = n - kept;
  return run;
}

}  // namespace difftv
