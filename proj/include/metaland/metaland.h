/* C interface to the metaland guidance lab. All handles are opaque; every
 * fallible call returns an ml_status and leaves a message in ml_last_error(). */
#ifndef METALAND_H
#define METALAND_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ML_API __declspec(dllexport)
#else
#define ML_API __attribute__((visibility("default")))
#endif

typedef enum ml_status {
  ML_OK = 0,
  ML_ERR_INVALID_ARGUMENT = 1,
  ML_ERR_CONFIG = 2,
  ML_ERR_IO = 3,
  ML_ERR_NUMERIC = 4,
  ML_ERR_STATE = 5,
  ML_ERR_BUFFER_TOO_SMALL = 6,
  ML_ERR_INTERNAL = 7
} ml_status;

typedef struct ml_experiment ml_experiment;
typedef struct ml_env ml_env;
typedef struct ml_policy ml_policy;
typedef struct ml_eval ml_eval;

typedef enum ml_policy_kind { ML_POLICY_DRDV = 0, ML_POLICY_RL = 1, ML_POLICY_META_RL = 2 } ml_policy_kind;
typedef enum ml_table_format { ML_FORMAT_TEXT = 0, ML_FORMAT_CSV = 1 } ml_table_format;

/* Message of the last failed call on this thread ("" if none). */
ML_API const char* ml_last_error(void);
ML_API const char* ml_version(void);
ML_API const char* ml_status_name(ml_status status);

ML_API size_t ml_preset_count(void);
/* NULL when i is out of range. */
ML_API const char* ml_preset_id(size_t i);

/* Strings are returned through (buf, cap, needed): needed always receives the
 * length including the terminator; ML_ERR_BUFFER_TOO_SMALL if cap < needed. */

ML_API ml_status ml_experiment_load(const char* preset_or_path, ml_experiment** out);
ML_API ml_status ml_experiment_from_json(const char* json, ml_experiment** out);
/* "key.path=value" override, e.g. "mars.engine.isp=37.5". */
ML_API ml_status ml_experiment_set(ml_experiment* exp, const char* assignment);
ML_API ml_status ml_experiment_to_json(const ml_experiment* exp, char* buf, size_t cap, size_t* needed);
ML_API ml_status ml_experiment_eval_defaults(const ml_experiment* exp, size_t* episodes, uint64_t* seed);
ML_API int ml_experiment_sensor_driven(const ml_experiment* exp);
ML_API void ml_experiment_free(ml_experiment* exp);

ML_API ml_status ml_env_create(const ml_experiment* exp, uint64_t seed, ml_env** out);
ML_API size_t ml_env_obs_dim(const ml_env* env);
ML_API size_t ml_env_act_dim(const ml_env* env);
ML_API ml_status ml_env_reset(ml_env* env, uint64_t seed, double* obs, size_t cap);
/* action is in normalized units (multiplied by the engine scale inside). */
ML_API ml_status ml_env_step(ml_env* env, const double* action, size_t act_dim, double* obs, size_t cap,
                             double* reward, int* done, int* success);
/* state[0..2] = r, state[3..5] = v, state[6] = mass, state[7] = t. */
ML_API ml_status ml_env_truth(const ml_env* env, double state[8]);
ML_API void ml_env_free(ml_env* env);

ML_API ml_status ml_policy_drdv(const ml_experiment* exp, ml_policy** out);
/* trained_on (optional) receives the experiment stored in the checkpoint. */
ML_API ml_status ml_policy_load(const char* checkpoint_path, ml_policy** out, ml_experiment** trained_on);
ML_API ml_status ml_policy_reset(ml_policy* policy, const ml_env* env);
ML_API ml_status ml_policy_act(ml_policy* policy, const ml_env* env, const double* obs, size_t obs_dim,
                               double* action, size_t cap);
ML_API ml_status ml_policy_label(const ml_policy* policy, char* buf, size_t cap, size_t* needed);
ML_API void ml_policy_free(ml_policy* policy);

typedef struct ml_train_options {
  ml_policy_kind policy; /* ML_POLICY_RL or ML_POLICY_META_RL */
  size_t unroll;         /* 0: keep the experiment's value */
  size_t iterations;     /* 0: derive from the experiment's training budget */
  uint64_t seed;
  size_t workers;        /* 0: METALAND_WORKERS or 1 */
  const char* out_dir;   /* receives checkpoint.mlck, learning_curve.csv, experiment.json */
  int resume;            /* continue from out_dir/checkpoint.mlck */
} ml_train_options;

/* Called once per iteration with one learning-curve CSV row; return 0 to stop. */
typedef int (*ml_progress_fn)(const char* csv_row, void* user);

ML_API void ml_train_options_init(ml_train_options* opts);
ML_API ml_status ml_train(const ml_experiment* exp, const ml_train_options* opts, ml_progress_fn progress,
                          void* user);
ML_API const char* ml_learning_curve_header(void);

typedef struct ml_eval_summary {
  size_t episodes;
  double r_mean, r_std, r_max;
  double v_mean, v_std, v_max;
  double fuel_mean, fuel_std, fuel_max, fuel_median;
  double glideslope_mean, glideslope_min;
  double success_rate;
  size_t faults;
} ml_eval_summary;

/* trajectory_log (optional): CSV of the first episode. */
ML_API ml_status ml_evaluate(const ml_policy* policy, const ml_experiment* exp, size_t episodes, uint64_t seed,
                             size_t workers, const char* trajectory_log, ml_eval** out);
ML_API ml_status ml_eval_summary_get(const ml_eval* eval, ml_eval_summary* out);
ML_API ml_status ml_eval_report_json(const ml_eval* eval, char* buf, size_t cap, size_t* needed);
ML_API ml_status ml_eval_write_report(const ml_eval* eval, const char* path);
ML_API void ml_eval_free(ml_eval* eval);

ML_API ml_status ml_render_reports(const char* const* report_paths, size_t n, ml_table_format format, char* buf,
                                   size_t cap, size_t* needed);
ML_API ml_status ml_sensor_check(const ml_experiment* exp, size_t samples, uint64_t seed, char* buf, size_t cap,
                                 size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* METALAND_H */
