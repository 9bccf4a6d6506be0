/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PHYTOAGG_H
#define PHYTOAGG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PaClassification {
  PA_CLASSIFICATION_STABLE = 0,
  PA_CLASSIFICATION_UNSTABLE = 1,
  PA_CLASSIFICATION_MARGINAL = 2,
  PA_CLASSIFICATION_NO_ROOT = 3,
} PaClassification;

typedef enum PaGrading {
  PA_GRADING_UNIFORM = 0,
  PA_GRADING_GEOMETRIC = 1,
} PaGrading;

typedef enum PaStatus {
  PA_STATUS_OK = 0,
  PA_STATUS_NULL_POINTER = 1,
  PA_STATUS_INVALID_UTF8 = 2,
  PA_STATUS_PARSE = 3,
  PA_STATUS_DOMAIN = 4,
  PA_STATUS_NUMERICAL = 5,
  PA_STATUS_INVALID_ARGUMENT = 6,
  PA_STATUS_PANIC = 7,
} PaStatus;

/**
 * Opaque model handle.
 */
typedef struct PaModel PaModel;

/**
 * Result of [`pa_model_classify`]. `lambda0` is NaN when `has_root` is 0.
 */
typedef struct PaReport {
  double xi_at_zero;
  double lambda0;
  bool has_root;
  enum PaClassification classification;
  double gamma_x1;
} PaReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a model on `[x0, x1]` from expression strings in `x` (and `y` for
 * `beta`; pass NULL for no aggregation). The spectral tables use an
 * `n`-cell mesh.
 *
 * # Safety
 * String arguments must be NUL-terminated or NULL; `out` must be writable.
 */
enum PaStatus pa_model_new(double x0,
                           double x1,
                           const char *g,
                           const char *w,
                           const char *q,
                           const char *beta,
                           size_t n,
                           enum PaGrading grading,
                           struct PaModel **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `m` must come from [`pa_model_new`] and not be used afterwards.
 */
void pa_model_free(struct PaModel *m);

/**
 * Sets the multipliers on `g`, `q` and `w` (all must be positive) and
 * rebuilds the spectral tables.
 *
 * # Safety
 * `m` must be a live handle.
 */
enum PaStatus pa_model_set_scales(struct PaModel *m,
                                  double g_scale,
                                  double q_scale,
                                  double w_scale);

/**
 * `xi(lambda)`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PaStatus pa_model_xi(const struct PaModel *m, double lambda, double *out);

/**
 * The real root of `xi`. `has_root` is set to 0 when `q` vanishes, in
 * which case `out` is NaN.
 *
 * # Safety
 * `m` must be a live handle; `out` and `has_root` writable.
 */
enum PaStatus pa_model_spectral_bound(const struct PaModel *m, double *out, bool *has_root);

/**
 * Classifies the zero state; `|xi(0)| <= tol` is marginal.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum PaStatus pa_model_classify(const struct PaModel *m, double tol, struct PaReport *out);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * excluding the terminator, or 0 if there is none.
 *
 * # Safety
 * `buf` must hold `len` bytes, or be NULL with `len == 0`.
 */
size_t pa_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pa_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHYTOAGG_H */
