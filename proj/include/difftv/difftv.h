/* difftv: diffusion-sampler TV-convergence harness, C interface.
 *
 * All functions return DTV_OK (0) on success or a nonzero status code; the
 * message for the most recent failure on the calling thread is available via
 * dtv_last_error(). Handles are opaque and freed with the matching *_free().
 */
#ifndef DIFFTV_H
#define DIFFTV_H

#ifdef __cplusplus
extern "C" {
#endif

enum {
  DTV_OK = 0,
  DTV_ERR_INVALID_ARGUMENT = 1,
  DTV_ERR_IO = 2,
  DTV_ERR_NUMERIC = 3,
  DTV_ERR_VALIDATION_FAILED = 4
};

typedef enum dtv_sampler_kind {
  DTV_ODE_PLAIN = 0,
  DTV_ODE_ACCEL = 1,
  DTV_DDPM_PLAIN = 2,
  DTV_DDPM_ACCEL = 3
} dtv_sampler_kind;

typedef struct dtv_schedule dtv_schedule;
typedef struct dtv_target dtv_target;

const char* dtv_last_error(void);
const char* dtv_version(void);

/* schedule ---------------------------------------------------------- */
int dtv_schedule_create(int T, double c0, double c1, dtv_schedule** out);
void dtv_schedule_free(dtv_schedule* sched);
int dtv_schedule_get(const dtv_schedule* sched, int t, double* beta, double* alpha,
                     double* alpha_bar, double* sigma_sq);
/* columns: t,beta,alpha,alpha_bar,sigma_sq */
int dtv_schedule_write_csv(const dtv_schedule* sched, const char* path);
/* margins[0..3] hold the worst-case slack of properties a..d */
int dtv_schedule_verify(const dtv_schedule* sched, int* all_pass, double margins[4]);

/* target ------------------------------------------------------------ */
/* JSON: {dim, components:[{weight, mean, cov}], support_radius}; cov may be
 * a scalar, a diagonal array, or a full row-major matrix. */
int dtv_target_load(const char* json_path, dtv_target** out);
int dtv_target_parse(const char* json_text, dtv_target** out);
void dtv_target_free(dtv_target* target);
int dtv_target_dim(const dtv_target* target, int* dim);

/* exact conditional quantities at (t, x); any output pointer may be NULL.
 * score and w are length d, noise_cov and jac are d*d row-major. */
int dtv_moments(const dtv_target* target, const dtv_schedule* sched, int t, const double* x,
                double* q, double* score, double* noise_cov, double* jac, double* w);

/* n rows of d columns written to out (row-major) */
int dtv_sample_forward(const dtv_target* target, const dtv_schedule* sched, int t, int n,
                       unsigned long long seed, double* out);

/* reverse chain from Y_T ~ N(0,I) down to Y_1; out must hold n*d doubles.
 * Failed (non-finite) trajectories are dropped; *rows reports survivors. */
int dtv_run_reverse(const dtv_target* target, const dtv_schedule* sched, dtv_sampler_kind kind,
                    int n, unsigned long long seed, double* out, int* rows, int* failures);

/* endpoint dump: CSV matrix plus run-metadata JSON */
int dtv_dump_samples(const dtv_target* target, const dtv_schedule* sched, dtv_sampler_kind kind,
                     int n, unsigned long long seed, const char* csv_path,
                     const char* meta_json_path);

/* commands ----------------------------------------------------------- */
/* Runs the validation suite for a JSON run-config; DTV_OK iff every check
 * passed. The report is written to <output_dir>/validation_report.json. */
int dtv_cmd_validate(const char* config_path);
/* TV/KL sweep over the configured T list and samplers. */
int dtv_cmd_sweep(const char* config_path);
/* Renders the slope table for a finished sweep directory; writes
 * tv_rates.svg next to report.json. table may be NULL (prints to stdout);
 * otherwise the rendered text is copied into table (capacity bytes). */
int dtv_cmd_report(const char* results_dir, char* table, int capacity);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DIFFTV_H */
