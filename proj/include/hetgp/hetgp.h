#ifndef HETGP_HETGP_H
#define HETGP_HETGP_H

/* Heteroscedastic GP regression: data generators, MCMC, prediction, metrics
 * and the experiment harness, behind opaque handles.
 *
 * Every fallible call returns a hetgp_status. On failure the message is kept
 * per thread and is available from hetgp_last_error() until the next failing
 * call on that thread. Output arguments are untouched on failure. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HETGP_API __declspec(dllexport)
#else
#define HETGP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hetgp_status {
  HETGP_OK = 0,
  HETGP_ERR_INVALID_ARGUMENT = 1,
  HETGP_ERR_CONFIG = 2,
  HETGP_ERR_NUMERICAL = 3,
  HETGP_ERR_IO = 4,
  HETGP_ERR_INTERNAL = 5
} hetgp_status;

typedef struct hetgp_dataset hetgp_dataset;
typedef struct hetgp_model hetgp_model;
typedef struct hetgp_chain hetgp_chain;
typedef struct hetgp_prediction hetgp_prediction;

HETGP_API const char* hetgp_version(void);
HETGP_API const char* hetgp_last_error(void);
HETGP_API const char* hetgp_status_name(hetgp_status status);

/* ---- datasets ---------------------------------------------------------- */

typedef enum hetgp_column {
  HETGP_COL_X = 0, /* n*p values, row-major */
  HETGP_COL_Y = 1,
  HETGP_COL_F_TRUE = 2,
  HETGP_COL_SD_TRUE = 3
} hetgp_column;

/* name: "U1", "U2", "M1" or "M2". */
HETGP_API hetgp_status hetgp_dataset_generate(const char* name, uint64_t seed, size_t n, hetgp_dataset** out);
HETGP_API hetgp_status hetgp_dataset_read_csv(const char* path, hetgp_dataset** out);
HETGP_API hetgp_status hetgp_dataset_write_csv(const hetgp_dataset* data, const char* path);
HETGP_API size_t hetgp_dataset_n(const hetgp_dataset* data);
HETGP_API size_t hetgp_dataset_p(const hetgp_dataset* data);
/* Copies a column into out, which must hold exactly len values. */
HETGP_API hetgp_status hetgp_dataset_column(const hetgp_dataset* data, hetgp_column which, double* out, size_t len);
HETGP_API void hetgp_dataset_free(hetgp_dataset* data);

/* ---- models ------------------------------------------------------------ */

typedef struct hetgp_prior {
  double mean;        /* of every log-hyperparameter */
  double sd;
  double c;           /* constant term of the covariance */
  double jitter_sd;   /* GPLV log-SD process jitter */
  double sigma_floor; /* GPLC lower bound on the residual sigma */
} hetgp_prior;

HETGP_API void hetgp_prior_default(hetgp_prior* prior);

/* kind: "STD", "GPLC" or "GPLV". prior may be NULL for the defaults. */
HETGP_API hetgp_status hetgp_model_create(const char* kind, const hetgp_dataset* train, const hetgp_prior* prior,
                                          hetgp_model** out);
HETGP_API size_t hetgp_model_n_hyper(const hetgp_model* model);
HETGP_API size_t hetgp_model_n_latent(const hetgp_model* model);
/* Name of log-hyperparameter k, or NULL when out of range. */
HETGP_API const char* hetgp_model_hyper_name(const hetgp_model* model, size_t k);
/* Log posterior at (log-)hyperparameters and latent values; -inf when a
 * covariance matrix is not positive definite. */
HETGP_API hetgp_status hetgp_model_log_posterior(const hetgp_model* model, const double* hyper, size_t n_hyper,
                                                 const double* latent, size_t n_latent, double* out);
HETGP_API void hetgp_model_free(hetgp_model* model);

/* ---- chains ------------------------------------------------------------ */

typedef struct hetgp_chain_options {
  const char* sampler;       /* "slice", "metropolis", "modified-metropolis"; NULL = model default */
  const char* gplv_hyper;    /* GPLV hyperparameter scheme; NULL = "metropolis" */
  size_t n_iter;
  size_t thin;
  uint64_t seed;
  double slice_width;
  uint64_t max_stepouts;     /* 0 disables stepping out */
  double hyper_sd;           /* initial Metropolis proposal scale, hyperparameters */
  double latent_sd;          /* initial Metropolis proposal scale, latent values */
  double corr_a;
  size_t corr_m;
  int latent_prior_draw;     /* start latent values at a prior draw instead of the prior mean */
  double time_budget_seconds; /* > 0: stop when the sweeps have used this much time */
} hetgp_chain_options;

HETGP_API void hetgp_chain_options_default(hetgp_chain_options* opts);
HETGP_API hetgp_status hetgp_chain_run(const hetgp_model* model, const hetgp_chain_options* opts, hetgp_chain** out);
HETGP_API size_t hetgp_chain_n_iter(const hetgp_chain* chain);
HETGP_API size_t hetgp_chain_burn_in(const hetgp_chain* chain);
HETGP_API size_t hetgp_chain_n_draws(const hetgp_chain* chain);
/* Per-iteration log posterior; out must hold n_iter values. */
HETGP_API hetgp_status hetgp_chain_lpd_trace(const hetgp_chain* chain, double* out, size_t len);
/* Log-hyperparameters of stored draw k; out must hold n_hyper values. */
HETGP_API hetgp_status hetgp_chain_draw_hyper(const hetgp_chain* chain, size_t k, double* out, size_t len);
/* Accepted / proposed over all blocks. */
HETGP_API double hetgp_chain_accept_rate(const hetgp_chain* chain);
HETGP_API double hetgp_chain_cpu_seconds(const hetgp_chain* chain);
HETGP_API void hetgp_chain_free(hetgp_chain* chain);

/* ---- prediction -------------------------------------------------------- */

/* Mixture predictive at the inputs of `test` from the chain's post-burn-in
 * draws. n_wstar applies to GPLC only. */
HETGP_API hetgp_status hetgp_predict(const hetgp_model* model, const hetgp_chain* chain, const hetgp_dataset* test,
                                     size_t n_wstar, uint64_t seed, hetgp_prediction** out);
HETGP_API size_t hetgp_prediction_cases(const hetgp_prediction* pred);
HETGP_API size_t hetgp_prediction_components(const hetgp_prediction* pred);
HETGP_API hetgp_status hetgp_prediction_pooled(const hetgp_prediction* pred, double* mean, double* var, size_t len);
/* MSE against f_true and NLPD of y for the cases of `test`. */
HETGP_API hetgp_status hetgp_prediction_evaluate(const hetgp_prediction* pred, const hetgp_dataset* test,
                                                 double* mse, double* nlpd);
HETGP_API void hetgp_prediction_free(hetgp_prediction* pred);

/* ---- metrics ----------------------------------------------------------- */

typedef struct hetgp_act_report {
  double tau_hat;
  size_t cutoff_k;
  double cpu_per_iter;
  double tau_tilde;
} hetgp_act_report;

HETGP_API hetgp_status hetgp_mse(const double* pred, const double* truth, size_t n, double* out);
/* One test case: equal-weight mixture of m Gaussians evaluated at y. */
HETGP_API hetgp_status hetgp_nlpd_case(const double* means, const double* vars, size_t m, double y, double* out);
HETGP_API hetgp_status hetgp_act_time(const double* series, size_t len, double cpu_per_iter, hetgp_act_report* out);

/* ---- experiment harness -------------------------------------------------- */

typedef struct hetgp_run_summary {
  size_t rows;
  size_t cells_run;
  size_t cells_skipped;
} hetgp_run_summary;

/* output_dir overrides the config's output directory when non-NULL. */
HETGP_API hetgp_status hetgp_run_experiment(const char* config_path, const char* output_dir,
                                            hetgp_run_summary* out);
HETGP_API hetgp_status hetgp_run_study(const char* config_path, const char* output_dir);
/* Reads <dir>/results.csv and writes the pairwise summary next to it.
 * n_missing (may be NULL) receives the number of absent cells. */
HETGP_API hetgp_status hetgp_summarize(const char* dir, size_t* n_missing);
/* Win counts for one dataset/metric/model pair from the last summary of dir. */
HETGP_API hetgp_status hetgp_summary_pair(const char* dir, const char* dataset, const char* metric,
                                          const char* model_a, const char* model_b, size_t* a_wins, size_t* b_wins,
                                          size_t* ties);

#ifdef __cplusplus
}
#endif

#endif
