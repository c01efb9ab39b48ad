/* batchgfn C API: amortized batch selection for pool-based active learning
 * with a GFlowNet sampler over an exact-GP joint-mutual-information reward.
 *
 * All functions return a bgfn_status; on failure, bgfn_last_error() gives a
 * thread-local human-readable message. Handles are opaque and owned by the
 * caller through the matching *_destroy function.
 */
#ifndef BATCHGFN_H
#define BATCHGFN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BGFN_API __declspec(dllexport)
#else
#define BGFN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bgfn_status {
  BGFN_OK = 0,
  BGFN_ERR_INVALID_ARGUMENT = 1,
  BGFN_ERR_CONFIG = 2,
  BGFN_ERR_NUMERICAL = 3,
  BGFN_ERR_IO = 4,
  BGFN_ERR_INTERNAL = 5,
} bgfn_status;

BGFN_API const char* bgfn_status_name(bgfn_status status);
BGFN_API const char* bgfn_last_error(void);
BGFN_API const char* bgfn_version(void);

/* ---- configuration ---------------------------------------------------- */

typedef struct bgfn_config bgfn_config;

/* Fresh config holding the reference hyperparameter defaults. */
BGFN_API bgfn_status bgfn_config_create(bgfn_config** out);
/* Defaults overlaid with `key = value` lines from a file. */
BGFN_API bgfn_status bgfn_config_load(const char* path, bgfn_config** out);
BGFN_API bgfn_status bgfn_config_set(bgfn_config* cfg, const char* key,
                                     const char* value);
/* Copies the value into buf (NUL-terminated); fails if buflen is too small. */
BGFN_API bgfn_status bgfn_config_get(const bgfn_config* cfg, const char* key,
                                     char* buf, size_t buflen);
BGFN_API bgfn_status bgfn_config_validate(const bgfn_config* cfg);
BGFN_API void bgfn_config_destroy(bgfn_config* cfg);

/* ---- experiment drivers ------------------------------------------------ */

/* Runs one subcommand (synth-data | fit-gp | train-gfn | oracle-compare |
 * jmi-sweep | al-run | transfer-exp), writing a fresh run directory with the
 * resolved config, seed manifest, outputs, and logs. */
BGFN_API bgfn_status bgfn_run_command(const bgfn_config* cfg,
                                      const char* command,
                                      const char* out_dir);

/* ---- datasets ----------------------------------------------------------- */

typedef struct bgfn_dataset bgfn_dataset;

/* Synthesizes pool + test data from the config (data.* keys + seed). */
BGFN_API bgfn_status bgfn_dataset_synth(const bgfn_config* cfg,
                                        bgfn_dataset** out);
BGFN_API bgfn_status bgfn_dataset_load(const char* path, bgfn_dataset** out);
BGFN_API bgfn_status bgfn_dataset_save(const bgfn_dataset* data,
                                       const char* path);
/* Draws al.seed_size points uniformly from the pool into the train split. */
BGFN_API bgfn_status bgfn_dataset_draw_seed_set(bgfn_dataset* data,
                                                const bgfn_config* cfg);
BGFN_API bgfn_status bgfn_dataset_sizes(const bgfn_dataset* data, size_t* pool,
                                        size_t* train, size_t* test);
BGFN_API void bgfn_dataset_destroy(bgfn_dataset* data);

/* ---- Gaussian process ---------------------------------------------------- */

typedef struct bgfn_gp bgfn_gp;

/* Fits kernel hyperparameters on the dataset's train split by maximizing the
 * exact log marginal likelihood. */
BGFN_API bgfn_status bgfn_gp_fit(const bgfn_config* cfg,
                                 const bgfn_dataset* data, bgfn_gp** out);
BGFN_API bgfn_status bgfn_gp_log_marginal_likelihood(const bgfn_gp* gp,
                                                     double* out);
/* Posterior mean/variance at n query locations (either output may be NULL). */
BGFN_API bgfn_status bgfn_gp_predict(const bgfn_gp* gp, const double* xs,
                                     size_t n, double* mean, double* var);
BGFN_API bgfn_status bgfn_gp_save(const bgfn_gp* gp, const char* path);
BGFN_API void bgfn_gp_destroy(bgfn_gp* gp);

/* ---- sampler -------------------------------------------------------------- */

typedef struct bgfn_sampler bgfn_sampler;

/* Trains a GFlowNet batch sampler against the GP's temperature-shaped joint
 * mutual information reward (gfn.* and reward.* keys). */
BGFN_API bgfn_status bgfn_sampler_train(const bgfn_config* cfg,
                                        const bgfn_dataset* data,
                                        const bgfn_gp* gp, bgfn_sampler** out);
BGFN_API bgfn_status bgfn_sampler_load(const bgfn_config* cfg,
                                       const bgfn_dataset* data,
                                       const bgfn_gp* gp, const char* path,
                                       bgfn_sampler** out);
/* Batch size B of the sampler's terminal states. */
BGFN_API bgfn_status bgfn_sampler_batch_size(const bgfn_sampler* sampler,
                                             int* out);
/* Samples k batches (indices: k*B pool positions, row-major; log_rewards: k).
 * Costs exactly k*B policy evaluations. */
BGFN_API bgfn_status bgfn_sampler_sample(bgfn_sampler* sampler, size_t k,
                                         uint64_t seed, int* indices,
                                         double* log_rewards);
/* Samples k batches and returns the argmax-reward one (ties: lexicographic). */
BGFN_API bgfn_status bgfn_sampler_select(bgfn_sampler* sampler, size_t k,
                                         uint64_t seed, int* batch,
                                         double* log_reward);
BGFN_API bgfn_status bgfn_sampler_eval_count(const bgfn_sampler* sampler,
                                             uint64_t* out);
BGFN_API bgfn_status bgfn_sampler_save(const bgfn_sampler* sampler,
                                       const char* path);
BGFN_API void bgfn_sampler_destroy(bgfn_sampler* sampler);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BATCHGFN_H */
