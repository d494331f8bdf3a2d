#ifndef BOHRSOM_H
#define BOHRSOM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_POINTER = 1,
  BS_STATUS_INVALID_UTF8 = 2,
  BS_STATUS_CONFIG = 3,
  BS_STATUS_INVALID_ARGUMENT = 4,
  BS_STATUS_SOLVER = 5,
  BS_STATUS_BUFFER_TOO_SMALL = 6,
  BS_STATUS_PANIC = 7,
} BsStatus;

// Opaque symbol model.
typedef struct BsModel BsModel;

// Action coefficients `S0`, `S1`, `S2` and the period at one energy.
typedef struct BsActions {
  double s0;
  double s1;
  double s2;
  double period;
} BsActions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a model from a TOML symbol config.
//
// # Safety
// `config` must be a nul-terminated string and `out` a valid pointer. The
// handle written to `out` must be released with `bs_model_free`.
enum BsStatus bs_model_from_config(const char *config, struct BsModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must be null or a handle from `bs_model_from_config` not yet freed.
void bs_model_free(struct BsModel *model);

// Overrides the S2 sign calibration; each sign must be +1 or -1.
//
// # Safety
// `model` must be a live handle.
enum BsStatus bs_model_set_signs(struct BsModel *model,
                                 double sigma_gamma,
                                 double sigma_p1sq,
                                 double sigma_p2);

// Energy of level `n` at truncation `order` (0, 1 or 2).
//
// # Safety
// `model` must be a live handle and `energy` a valid pointer.
enum BsStatus bs_quantize(const struct BsModel *model,
                          double h,
                          uint32_t n,
                          uint32_t order,
                          double *energy);

// Levels `n_lo..=n_hi` into `out`, which must hold `n_hi - n_lo + 1` values.
//
// # Safety
// `model` must be a live handle and `out` must point to `len` writable doubles.
enum BsStatus bs_spectrum(const struct BsModel *model,
                          double h,
                          uint32_t n_lo,
                          uint32_t n_hi,
                          uint32_t order,
                          double *out,
                          uintptr_t len);

// Lowest `count` eigenvalues of the discretized operator, with default options.
//
// # Safety
// `model` must be a live handle and `out` must point to `count` writable doubles.
enum BsStatus bs_oracle_eigenvalues(const struct BsModel *model,
                                    double h,
                                    uintptr_t count,
                                    double *out);

// Action coefficients at `energy`.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum BsStatus bs_actions(const struct BsModel *model, double energy, struct BsActions *out);

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next call on the same thread.
const char *bs_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOHRSOM_H */
