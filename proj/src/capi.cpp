#include "difftv/difftv.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <string>

#include "mixture.hpp"
#include "runner.hpp"
#include "samplers.hpp"
#include "schedule.hpp"

namespace {

thread_local std::string g_last_error;

int fail(int code, const char* what) {
  g_last_error = what;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return fail(DTV_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(DTV_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(DTV_ERR_NUMERIC, e.what());
  }
}

difftv::SamplerKind to_kind(dtv_sampler_kind kind) {
  switch (kind) {
    case DTV_ODE_PLAIN: return difftv::SamplerKind::OdePlain;
    case DTV_ODE_ACCEL: return difftv::SamplerKind::OdeAccel;
    case DTV_DDPM_PLAIN: return difftv::SamplerKind::DdpmPlain;
    case DTV_DDPM_ACCEL: return difftv::SamplerKind::DdpmAccel;
  }
  throw std::invalid_argument("unknown sampler kind");
}

}  // namespace

extern "C" {

struct dtv_schedule {
  difftv::Schedule rep;
};

struct dtv_target {
  difftv::MixtureTarget rep;
};

const char* dtv_last_error(void) { return g_last_error.c_str(); }

const char* dtv_version(void) { return "difftv 0.1.0"; }

int dtv_schedule_create(int T, double c0, double c1, dtv_schedule** out) {
  if (!out) return fail(DTV_ERR_INVALID_ARGUMENT, "out is null");
  return guarded([&] {
    *out = new dtv_schedule{difftv::Schedule::build({T, c0, c1})};
    return DTV_OK;
  });
}

void dtv_schedule_free(dtv_schedule* sched) { delete sched; }

int dtv_schedule_get(const dtv_schedule* sched, int t, double* beta, double* alpha,
                     double* alpha_bar, double* sigma_sq) {
  if (!sched) return fail(DTV_ERR_INVALID_ARGUMENT, "schedule is null");
  return guarded([&] {
    if (beta) *beta = sched->rep.beta(t);
    if (alpha) *alpha = sched->rep.alpha(t);
    if (alpha_bar) *alpha_bar = sched->rep.alpha_bar(t);
    if (sigma_sq) *sigma_sq = sched->rep.sigma_sq(t);
    return DTV_OK;
  });
}

int dtv_schedule_write_csv(const dtv_schedule* sched, const char* path) {
  if (!sched || !path) return fail(DTV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    std::ofstream out(path, std::ios::binary);
    if (!out) return fail(DTV_ERR_IO, "cannot open output path");
    sched->rep.write_csv(out);
    return DTV_OK;
  });
}

int dtv_schedule_verify(const dtv_schedule* sched, int* all_pass, double margins[4]) {
  if (!sched) return fail(DTV_ERR_INVALID_ARGUMENT, "schedule is null");
  return guarded([&] {
    const auto rep = sched->rep.verify_properties();
    if (all_pass) *all_pass = rep.all_pass() ? 1 : 0;
    if (margins) {
      margins[0] = rep.a.margin;
      margins[1] = rep.b.margin;
      margins[2] = rep.c.margin;
      margins[3] = rep.d.margin;
    }
    return DTV_OK;
  });
}

int dtv_target_load(const char* json_path, dtv_target** out) {
  if (!json_path || !out) return fail(DTV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new dtv_target{difftv::MixtureTarget::from_json_file(json_path)};
    return DTV_OK;
  });
}

int dtv_target_parse(const char* json_text, dtv_target** out) {
  if (!json_text || !out) return fail(DTV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new dtv_target{difftv::MixtureTarget::from_json_text(json_text)};
    return DTV_OK;
  });
}

void dtv_target_free(dtv_target* target) { delete target; }

int dtv_target_dim(const dtv_target* target, int* dim) {
  if (!target || !dim) return fail(DTV_ERR_INVALID_ARGUMENT, "null argument");
  *dim = target->rep.dim();
  return DTV_OK;
}

int dtv_moments(const dtv_target* target, const dtv_schedule* sched, int t, const double* x,
                double* q, double* score, double* noise_cov, double* jac, double* w) {
  if (!target || !sched || !x) return fail(DTV_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const int d = target->rep.dim();
    const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x, d);
    const difftv::MomentBundle m = difftv::moments(target->rep, sched->rep, t, xv);
    if (q) *q = m.q;
    if (score) Eigen::Map<Eigen::VectorXd>(score, d) = m.score;
    if (w) Eigen::Map<Eigen::VectorXd>(w, d) = m.w_corr;
    if (noise_cov) {
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          noise_cov, d, d) = m.noise_cov;
    }
    if (jac) {
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(jac, d,
                                                                                         d) =
          m.jac;
    }
    return DTV_OK;
  });
}

int dtv_sample_forward(const dtv_target* target, const dtv_schedule* sched, int t, int n,
                       unsigned long long seed, double* out) {
  if (!target || !sched || !out || n <= 0) {
    return fail(DTV_ERR_INVALID_ARGUMENT, "bad argument");
  }
  return guarded([&] {
    const Eigen::MatrixXd s = difftv::sample_forward(target->rep, sched->rep, t, n, seed);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out, s.rows(), s.cols()) = s;
    return DTV_OK;
  });
}

int dtv_run_reverse(const dtv_target* target, const dtv_schedule* sched, dtv_sampler_kind kind,
                    int n, unsigned long long seed, double* out, int* rows, int* failures) {
  if (!target || !sched || !out || n <= 0) {
    return fail(DTV_ERR_INVALID_ARGUMENT, "bad argument");
  }
  return guarded([&] {
    const difftv::ReverseRun run =
        difftv::run_reverse(target->rep, sched->rep, {to_kind(kind), seed}, n);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out, run.endpoints.rows(), run.endpoints.cols()) = run.endpoints;
    if (rows) *rows = static_cast<int>(run.endpoints.rows());
    if (failures) *failures = run.failures;
    return DTV_OK;
  });
}

int dtv_dump_samples(const dtv_target* target, const dtv_schedule* sched, dtv_sampler_kind kind,
                     int n, unsigned long long seed, const char* csv_path,
                     const char* meta_json_path) {
  if (!target || !sched || !csv_path || !meta_json_path || n <= 0) {
    return fail(DTV_ERR_INVALID_ARGUMENT, "bad argument");
  }
  return guarded([&] {
    difftv::dump_samples(target->rep, sched->rep, {to_kind(kind), seed}, n, csv_path,
                         meta_json_path, "inline");
    return DTV_OK;
  });
}

int dtv_cmd_validate(const char* config_path) {
  if (!config_path) return fail(DTV_ERR_INVALID_ARGUMENT, "config path is null");
  return guarded([&]() -> int {
    const auto config = difftv::RunConfig::from_json_file(config_path);
    const auto report = difftv::run_validate(config);
    if (!report.all_pass()) {
      for (const auto& item : report.items) {
        if (!item.pass) {
          return fail(DTV_ERR_VALIDATION_FAILED,
                      ("validation failed: " + item.name + " (" + item.detail + ")").c_str());
        }
      }
    }
    return DTV_OK;
  });
}

int dtv_cmd_sweep(const char* config_path) {
  if (!config_path) return fail(DTV_ERR_INVALID_ARGUMENT, "config path is null");
  return guarded([&] {
    const auto config = difftv::RunConfig::from_json_file(config_path);
    difftv::run_sweep(config);
    return DTV_OK;
  });
}

int dtv_cmd_report(const char* results_dir, char* table, int capacity) {
  if (!results_dir) return fail(DTV_ERR_INVALID_ARGUMENT, "results dir is null");
  return guarded([&] {
    std::string rendered;
    difftv::run_report(results_dir, table ? &rendered : nullptr);
    if (table) {
      std::strncpy(table, rendered.c_str(), capacity > 0 ? capacity - 1 : 0);
      if (capacity > 0) table[capacity - 1] = '\0';
    }
    return DTV_OK;
  });
}

}  // extern "C"
