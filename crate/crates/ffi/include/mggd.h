/* C interface of the mggd library. Generated by cbindgen; do not edit. */

#ifndef MGGD_H
#define MGGD_H

/* Regenerate with `cargo build -p mggd-ffi`. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MggdStatus {
  MGGD_STATUS_OK = 0,
  MGGD_STATUS_INVALID_ARGUMENT = 1,
  MGGD_STATUS_NOT_POSITIVE_DEFINITE = 2,
  MGGD_STATUS_DEGENERATE_DATA = 3,
  MGGD_STATUS_NOT_CONVERGED = 4,
  MGGD_STATUS_IO_ERROR = 5,
  MGGD_STATUS_NULL_POINTER = 6,
  MGGD_STATUS_INTERNAL_PANIC = 7,
} MggdStatus;

/**
 * Scatter initialization for fits.
 */
typedef enum MggdInit {
  /**
   * Identity matrix.
   */
  MGGD_INIT_IDENTITY = 0,
  /**
   * Trace-normalized sample covariance (the default).
   */
  MGGD_INIT_SCM = 1,
} MggdInit;

/**
 * Opaque dataset handle.
 */
typedef struct MggdDataset MggdDataset;

/**
 * Opaque fit-report handle.
 */
typedef struct MggdReport MggdReport;

/**
 * Fit configuration; obtain defaults with `mggd_fit_config_default`.
 */
typedef struct MggdFitConfig {
  /**
   * Stopping threshold on the relative scatter step.
   */
  double tol_c;
  size_t max_iter;
  /**
   * Set to 1 to fix the shape at `beta_fixed` (known-shape mode).
   */
  int32_t has_fixed_beta;
  double beta_fixed;
  double beta_init;
  double newton_max_step;
  enum MggdInit init;
} MggdFitConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message on this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, or 0 when
 * no error is recorded.
 */
size_t mggd_last_error_message(char *buf, size_t len);

/**
 * Fills `config` with the library defaults.
 */
enum MggdStatus mggd_fit_config_default(struct MggdFitConfig *config);

/**
 * Builds a dataset from a row-major `n_rows` × `dim` array.
 */
enum MggdStatus mggd_dataset_new(size_t dim,
                                 size_t n_rows,
                                 const double *values,
                                 struct MggdDataset **out);

/**
 * Reads a dataset CSV (optional `x0,…` header, one observation per row).
 */
enum MggdStatus mggd_dataset_read_csv(const char *path, struct MggdDataset **out);

/**
 * Draws `n` MGGD vectors with a Toeplitz scatter rho^|i-j|.
 */
enum MggdStatus mggd_sample_toeplitz(size_t dim,
                                     double beta,
                                     double m,
                                     double rho,
                                     size_t n,
                                     uint64_t master_seed,
                                     uint64_t stream_id,
                                     struct MggdDataset **out);

size_t mggd_dataset_dim(const struct MggdDataset *dataset);

size_t mggd_dataset_len(const struct MggdDataset *dataset);

/**
 * Copies the row-major observations into `buf` (length `len` doubles).
 */
enum MggdStatus mggd_dataset_copy(const struct MggdDataset *dataset, double *buf, size_t len);

void mggd_dataset_free(struct MggdDataset *dataset);

/**
 * Fits MGGD parameters. A fit that merely fails to converge still produces
 * a report (inspect `mggd_report_converged`); the `NotConverged` status is
 * reserved for that case so callers can distinguish it without parsing.
 */
enum MggdStatus mggd_fit(const struct MggdDataset *dataset,
                         const struct MggdFitConfig *config,
                         struct MggdReport **out);

double mggd_report_beta(const struct MggdReport *report);

double mggd_report_scale(const struct MggdReport *report);

size_t mggd_report_iterations(const struct MggdReport *report);

int32_t mggd_report_converged(const struct MggdReport *report);

double mggd_report_alpha_residual(const struct MggdReport *report);

double mggd_report_objective(const struct MggdReport *report);

/**
 * Copies the row-major p×p scatter estimate into `buf` (`len` doubles).
 */
enum MggdStatus mggd_report_scatter(const struct MggdReport *report, double *buf, size_t len);

void mggd_report_free(struct MggdReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MGGD_H */
