#ifndef KORN_SHELL_H
#define KORN_SHELL_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KsStatus {
  KS_STATUS_OK = 0,
  KS_STATUS_NULL_POINTER = 1,
  KS_STATUS_INVALID_ARGUMENT = 2,
  KS_STATUS_DOMAIN = 3,
  KS_STATUS_MESH = 4,
  KS_STATUS_ASSEMBLY = 5,
  KS_STATUS_NON_CONVERGENCE = 6,
  KS_STATUS_CONFIGURATION = 7,
  KS_STATUS_DATA = 8,
  KS_STATUS_RESOLUTION = 9,
  KS_STATUS_UNSUPPORTED = 10,
  KS_STATUS_FACTORIZATION = 11,
  KS_STATUS_IO = 12,
  KS_STATUS_PANIC = 13,
} KsStatus;

/**
 * A parsed experiment configuration.
 */
typedef struct KsConfig KsConfig;

/**
 * Assembled finite element forms on one mesh.
 */
typedef struct KsForms KsForms;

/**
 * The result of a thickness sweep.
 */
typedef struct KsReport KsReport;

/**
 * A shell domain: mid-surface charts, half-thickness, boundary condition.
 */
typedef struct KsShell KsShell;

typedef struct KsEigenSummary {
  double lambda_min;
  double residual;
  size_t iterations;
  bool converged;
} KsEigenSummary;

typedef struct KsFit {
  double beta;
  double intercept;
  double r_squared;
} KsFit;

typedef struct KsRow {
  double h;
  double k_eigen;
  /**
   * NaN when the ansatz path does not apply.
   */
  double k_ansatz;
  size_t dofs;
  size_t iterations;
  bool ok;
} KsRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t ks_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ks_version(void);

/**
 * Closed sphere of radius `radius` and half-thickness `h`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KsStatus ks_shell_sphere(double radius, double h, struct KsShell **out_shell);

/**
 * Cylinder clamped at both ends.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KsStatus ks_shell_cylinder(double radius, double length, double h, struct KsShell **out_shell);

/**
 * Spherical cap clamped along its boundary.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KsStatus ks_shell_cap(double radius, double half_angle, double h, struct KsShell **out_shell);

/**
 * # Safety
 * `shell` must be NULL or a handle from a `ks_shell_*` constructor.
 */
void ks_shell_free(struct KsShell *shell);

/**
 * Mesh the shell with `n_u × n_v × n_t` cells per chart and assemble the
 * forms with Lagrange elements of `order` and `quadrature` Gauss points.
 *
 * # Safety
 * `shell` must be a live handle and `out_forms` a valid pointer.
 */
enum KsStatus ks_forms_assemble(const struct KsShell *shell,
                                size_t n_u,
                                size_t n_v,
                                size_t n_t,
                                size_t order,
                                size_t quadrature,
                                struct KsForms **out_forms);

/**
 * Number of free degrees of freedom.
 *
 * # Safety
 * `forms` must be a live handle and `out_dim` a valid pointer.
 */
enum KsStatus ks_forms_dim(const struct KsForms *forms, size_t *out_dim);

/**
 * # Safety
 * `forms` must be NULL or a handle from [`ks_forms_assemble`].
 */
void ks_forms_free(struct KsForms *forms);

/**
 * Smallest eigenvalue of the Korn pencil. If `vector` is not NULL it must
 * hold `vector_len == dim` doubles and receives the M-normalized eigenvector.
 *
 * # Safety
 * `forms` must be a live handle, `summary` a valid pointer and `vector`
 * NULL or valid for `vector_len` writes.
 */
enum KsStatus ks_korn_constant(const struct KsForms *forms,
                               double tolerance,
                               size_t max_iterations,
                               struct KsEigenSummary *summary,
                               double *vector,
                               size_t vector_len);

/**
 * Least-squares fit of `log k = β log h + c`.
 *
 * # Safety
 * `h` and `k` must be valid for `n` reads and `fit` a valid pointer.
 */
enum KsStatus ks_fit_exponent(const double *h, const double *k, size_t n, struct KsFit *fit);

/**
 * Parse `key = value` configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out_config` a valid pointer.
 */
enum KsStatus ks_config_parse(const char *text, struct KsConfig **out_config);

/**
 * # Safety
 * `config` must be NULL or a handle from [`ks_config_parse`].
 */
void ks_config_free(struct KsConfig *config);

/**
 * Run the thickness sweep. Rows that fail are kept and marked; the call
 * itself fails only on invalid configuration.
 *
 * # Safety
 * `config` must be a live handle and `out_report` a valid pointer.
 */
enum KsStatus ks_run_sweep(const struct KsConfig *config, struct KsReport **out_report);

/**
 * # Safety
 * `report` must be a live handle and `out_count` a valid pointer.
 */
enum KsStatus ks_report_row_count(const struct KsReport *report, size_t *out_count);

/**
 * # Safety
 * `report` must be a live handle and `row` a valid pointer.
 */
enum KsStatus ks_report_row(const struct KsReport *report, size_t index, struct KsRow *row);

/**
 * The fitted exponent; fails with `Data` when fewer than three rows converged.
 *
 * # Safety
 * `report` must be a live handle and `fit` a valid pointer.
 */
enum KsStatus ks_report_fit(const struct KsReport *report, struct KsFit *fit);

/**
 * Write `scaling.csv`, `scaling.dat` and `report.txt` into `dir`.
 *
 * # Safety
 * `report` must be a live handle and `dir` a NUL-terminated string.
 */
enum KsStatus ks_report_write(const struct KsReport *report, const char *dir);

/**
 * # Safety
 * `report` must be NULL or a handle from [`ks_run_sweep`].
 */
void ks_report_free(struct KsReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KORN_SHELL_H */
