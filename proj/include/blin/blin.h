/* C interface to the BLIN library. */
#ifndef BLIN_BLIN_H
#define BLIN_BLIN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define BLIN_API __declspec(dllexport)
#else
#define BLIN_API __attribute__((visibility("default")))
#endif

/* Status codes. Nonzero codes match the library's internal error codes. */
enum {
    BLIN_OK = 0,
    BLIN_ERR_INVALID_ARGUMENT = 1,
    BLIN_ERR_SHAPE = 2,
    BLIN_ERR_INDEX = 3,
    BLIN_ERR_INSUFFICIENT_DATA = 4,
    BLIN_ERR_BUDGET_EXCEEDED = 5,
    BLIN_ERR_NON_STATIONARY = 6,
    BLIN_ERR_UNREACHABLE_TARGET = 7,
    BLIN_ERR_PARSE = 8,
    BLIN_ERR_IO = 9,
    BLIN_ERR_DEGENERATE = 10,
    BLIN_ERR_INTERNAL = 99
};

typedef struct blin_series blin_series;
typedef struct blin_config blin_config;
typedef struct blin_fit blin_fit;

BLIN_API const char* blin_version(void);
BLIN_API const char* blin_status_name(int status);
/* Message of the last failed call on this thread ("" after success). */
BLIN_API const char* blin_last_error(void);
/* Frees strings returned through char** out-parameters. */
BLIN_API void blin_string_free(char* s);

/* ---- series ---------------------------------------------------------- */

/* `data` holds `horizon` slices of prod(dims) values, each column-major. */
BLIN_API int blin_series_new(const size_t* dims, size_t modes, size_t horizon, const double* data,
                             blin_series** out);
/* Standard-normal entries from (seed, stream). */
BLIN_API int blin_series_gaussian(const size_t* dims, size_t modes, size_t horizon, uint64_t seed,
                                  uint64_t stream, blin_series** out);
BLIN_API void blin_series_free(blin_series* s);
/* Writes up to `cap` dims; `modes` and `horizon` may be NULL. */
BLIN_API int blin_series_shape(const blin_series* s, size_t* modes, size_t* dims, size_t cap, size_t* horizon);
/* Copies all values when cap is large enough; `len` receives the count. */
BLIN_API int blin_series_data(const blin_series* s, double* out, size_t cap, size_t* len);
/* Long-format CSV. Flags are 0/1; label_map_path may be NULL. report_json
 * (may be NULL) receives the ingestion report. */
BLIN_API int blin_series_read_csv(const char* path, int difference, int center, int standardize, int strict,
                                  const char* label_map_path, blin_series** out, char** report_json);
BLIN_API int blin_series_write_csv(const blin_series* s, const char* path);
BLIN_API int blin_series_difference(const blin_series* s, blin_series** out);

/* ---- configuration --------------------------------------------------- */

/* Key-value settings shared by all commands. Unknown keys and unparsable
 * values are rejected by blin_config_set. Keys without a value take the
 * command default. */
BLIN_API int blin_config_new(blin_config** out);
BLIN_API void blin_config_free(blin_config* c);
BLIN_API int blin_config_set(blin_config* c, const char* key, const char* value);
/* Explicitly set keys as a JSON object. */
BLIN_API int blin_config_json(const blin_config* c, char** out);
/* Explicitly set keys as "key = value" lines. */
BLIN_API int blin_config_ini(const blin_config* c, char** out);
/* Newline-separated list of recognized keys. */
BLIN_API const char* blin_config_keys(void);

/* ---- estimation ------------------------------------------------------ */

/* Two-mode series use the method in `method` (bcd, exact, sparse,
 * reduced_rank, bilinear); series with three modes use the multiway
 * estimator (bcd, exact, sparse). Sparse fits without `lambda` choose it by
 * inner CV. */
BLIN_API int blin_fit_series(const blin_series* s, const blin_config* c, blin_fit** out);
BLIN_API void blin_fit_free(blin_fit* f);
BLIN_API int blin_fit_modes(const blin_fit* f, size_t* modes);
/* Network k (0 = A, 1 = B, 2 = C), column-major, n x n with n in `dim`. */
BLIN_API int blin_fit_network(const blin_fit* f, size_t k, double* out, size_t cap, size_t* dim);
/* Entries a_ii + b_jj (+ c_kk), column-major over the series modes. For
 * bilinear fits a_ii b_jj. */
BLIN_API int blin_fit_diag_effect(const blin_fit* f, double* out, size_t cap, size_t* len);
BLIN_API int blin_fit_converged(const blin_fit* f, int* converged);
/* Method, lags, lambda, iterations, criterion trace, R^2, design rank,
 * stationarity and the resolved configuration. */
BLIN_API int blin_fit_summary_json(const blin_fit* f, char** out);

/* ---- simulation ------------------------------------------------------ */

/* Reads generator, s, l, q_sparsity, target_r2, horizon, burn_in, seed and
 * replication. `truth` (may be NULL) receives the
 * calibrated networks as a fit handle; summary_json (may be NULL) the
 * calibration and the resolved spec. */
BLIN_API int blin_simulate(const blin_config* c, blin_series** out, blin_fit** truth, char** summary_json);

/* ---- evaluation ------------------------------------------------------ */

/* K-fold CV of each method listed in `methods` (comma separated) with the
 * lags, folds, inner_folds, seed and jobs settings. report_json holds times,
 * fold assignment and per-method R^2. */
BLIN_API int blin_cv(const blin_series* s, const blin_config* c, char** report_json);

/* AIC-hat table over all lag cells 1..max_lags[k] per mode, sorted. */
BLIN_API int blin_lagselect(const blin_series* s, const blin_config* c, const int* max_lags, size_t modes,
                            char** table_json);

/* Estimator error against T. records_csv has one line per fit. */
BLIN_API int blin_convergence_study(const blin_config* c, char** records_csv, char** summary_json);

/* Simulates train and test series, fits the generator's own model on train
 * and reports R^2 along the line from truth to the fit at scan_points
 * evenly spaced xi in [0, 1]. */
BLIN_API int blin_line_scan(const blin_config* c, char** csv);

/* Numerical rank of the two-mode design. */
BLIN_API int blin_rank_check(const blin_series* s, const blin_config* c, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
