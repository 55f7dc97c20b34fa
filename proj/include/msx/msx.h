/* msx - muscle synergy extraction toolkit, C API.
 *
 * Opaque handles plus integer status codes. Every function that can fail
 * returns msx_status; MSX_OK is zero. On failure a thread-local message is
 * available through msx_last_error(). Handles are freed with their matching
 * *_free function; passing NULL to a free function is a no-op.
 */
#ifndef MSX_MSX_H
#define MSX_MSX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum msx_status {
  MSX_OK = 0,
  MSX_ERR_DEGENERATE_INPUT = 1,
  MSX_ERR_NOT_SYMMETRIC = 2,
  MSX_ERR_RANK_DEFICIENT = 3,
  MSX_ERR_NO_CONVERGENCE = 4,
  MSX_ERR_DOMAIN = 5,
  MSX_ERR_ZERO_COLUMN = 6,
  MSX_ERR_SINGULAR_MODEL = 7,
  MSX_ERR_INFEASIBLE_SPARSITY = 8,
  MSX_ERR_CORPUS_TOO_SMALL = 9,
  MSX_ERR_UNBALANCED_DESIGN = 10,
  MSX_ERR_EMPTY_CELL = 11,
  MSX_ERR_EMPTY_INPUT = 12,
  MSX_ERR_INSUFFICIENT_REPETITIONS = 13,
  MSX_ERR_PARSE = 14,
  MSX_ERR_NEGATIVE_VALUE = 15,
  MSX_ERR_RAGGED_ROWS = 16,
  MSX_ERR_IO = 17,
  MSX_ERR_SPEC = 18,
  MSX_ERR_UNKNOWN = 99
} msx_status;

typedef enum msx_method {
  MSX_METHOD_PCA = 0,
  MSX_METHOD_ICA = 1,
  MSX_METHOD_NMF = 2,
  MSX_METHOD_SOBI = 3
} msx_method;

const char* msx_version(void);
const char* msx_status_name(msx_status status);

/* Thread-local message for the most recent failure on this thread. */
const char* msx_last_error(void);

/* ---- epochs ------------------------------------------------------- */

typedef struct msx_epoch msx_epoch;

/* data is channel-major: data[c * samples + t], entries >= 0. */
msx_status msx_epoch_create(const double* data, int32_t channels,
                            int64_t samples, double sample_rate,
                            msx_epoch** out);
msx_status msx_epoch_read(const char* path, msx_epoch** out);
msx_status msx_epoch_write(const msx_epoch* epoch, const char* path);
int32_t msx_epoch_channels(const msx_epoch* epoch);
int64_t msx_epoch_samples(const msx_epoch* epoch);
double msx_epoch_sample_rate(const msx_epoch* epoch);
/* out must hold channels * samples doubles, channel-major. */
msx_status msx_epoch_data(const msx_epoch* epoch, double* out);
void msx_epoch_free(msx_epoch* epoch);

/* ---- factorisation ------------------------------------------------ */

typedef struct msx_factorization msx_factorization;

msx_status msx_factorize(const msx_epoch* epoch, msx_method method,
                         int32_t synergies, uint64_t seed,
                         msx_factorization** out);
int32_t msx_factorization_synergy_count(const msx_factorization* f);
/* out must hold channels * synergies doubles (row-major m x r). */
msx_status msx_factorization_synergies(const msx_factorization* f, double* out);
/* out must hold synergies * samples doubles (row-major r x n). */
msx_status msx_factorization_weights(const msx_factorization* f, double* out);
int32_t msx_factorization_iterations(const msx_factorization* f);
int32_t msx_factorization_converged(const msx_factorization* f);
double msx_factorization_residual(const msx_factorization* f);
void msx_factorization_free(msx_factorization* f);

/* ---- model order --------------------------------------------------- */

typedef struct msx_mdl_report msx_mdl_report;

/* floor((2m + 1 - sqrt(8m + 1)) / 2), at least 1; 0 on domain error. */
int32_t msx_r_max_bound(int32_t channels);
msx_status msx_select_order(const msx_epoch* epoch, msx_mdl_report** out);
int32_t msx_mdl_selected(const msx_mdl_report* report);
int32_t msx_mdl_r_max(const msx_mdl_report* report);
/* MDL value for a fitted order r in [1, r_max]. */
msx_status msx_mdl_score(const msx_mdl_report* report, int32_t r, double* out);
void msx_mdl_report_free(msx_mdl_report* report);

/* ---- synthetic trials ---------------------------------------------- */

typedef struct msx_gen_config {
  int32_t channels;
  int32_t synergies;
  int64_t samples;
  double sample_rate;
  double snr_db;
  int32_t sparse; /* 0 or 1 */
  uint64_t seed;
} msx_gen_config;

/* Trial (dataset, trial) with surrogate envelopes. true_synergies, when not
 * NULL, receives channels * synergies doubles (row-major). */
msx_status msx_synth_trial(const msx_gen_config* config, int64_t dataset,
                           int64_t trial, msx_epoch** epoch_out,
                           double* true_synergies, double* noise_power);

/* ---- experiment runner --------------------------------------------- */

/* Runs one experiment command described by a JSON spec document, e.g.
 *   {"command":"evaluate","channels":[12],"snr_db":[15],"seed":7,
 *    "methods":["pca","nmf"],"out":"results"}
 * Writes artifacts under the spec's output directory. Returns MSX_ERR_SPEC
 * for validation failures, other codes for module errors. */
msx_status msx_run(const char* spec_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MSX_MSX_H */
