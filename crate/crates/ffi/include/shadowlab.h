#ifndef SHADOWLAB_H
#define SHADOWLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_DIMENSION_MISMATCH = 3,
  SL_STATUS_NOT_HYPERBOLIC = 4,
  SL_STATUS_NOT_CERTIFIED = 5,
  SL_STATUS_INVALID_PSEUDO_ORBIT = 6,
  SL_STATUS_NUMERICAL_FAILURE = 7,
  SL_STATUS_PANIC = 8,
} SlStatus;

typedef struct SlCertificate SlCertificate;

// Matrix semigroup `t -> e^{tA}` with a real generator.
typedef struct SlSemigroup SlSemigroup;

typedef struct SlSplitting SlSplitting;

// Constants of a stable/unstable splitting.
typedef struct SlSplitConstants {
  uintptr_t dim_m;
  uintptr_t dim_n;
  double k_m;
  double lambda_m;
  double k_n;
  double lambda_n;
  double gap;
} SlSplitConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length in bytes.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t sl_last_error_message(char *buf, uintptr_t len);

// Creates a semigroup from a row-major `rows x rows` real generator.
//
// # Safety
// `data` must point to `rows * rows` doubles; `out` must be writable.
enum SlStatus sl_semigroup_new(uintptr_t rows, const double *data, struct SlSemigroup **out);

// # Safety
// `handle` must be null or come from [`sl_semigroup_new`], freed once.
void sl_semigroup_free(struct SlSemigroup *handle);

// # Safety
// `handle` must be a live semigroup handle.
uintptr_t sl_semigroup_dim(const struct SlSemigroup *handle);

// `out = T(t) x` for a real vector `x` of length `dim`. Writes real and
// imaginary parts; `out_im` may be null.
//
// # Safety
// `x` and `out_re` (and `out_im` when non-null) must hold `dim` doubles.
enum SlStatus sl_semigroup_apply(const struct SlSemigroup *handle,
                                 double t,
                                 const double *x,
                                 uintptr_t dim,
                                 double *out_re,
                                 double *out_im);

// # Safety
// `handle` must be a live semigroup handle; `out` writable.
enum SlStatus sl_splitting_new(const struct SlSemigroup *handle, struct SlSplitting **out);

// # Safety
// `handle` must be null or come from [`sl_splitting_new`], freed once.
void sl_splitting_free(struct SlSplitting *handle);

// # Safety
// `handle` must be a live splitting handle; `out` writable.
enum SlStatus sl_splitting_constants(const struct SlSplitting *handle,
                                     struct SlSplitConstants *out);

// `δ` and `R` for a forward-contraction bound `K e^{-λt}`.
//
// # Safety
// `delta` and `r` must be writable.
enum SlStatus sl_delta_for_epsilon_stable(double k,
                                          double lambda,
                                          double epsilon,
                                          double r_min,
                                          double *delta,
                                          double *r);

// Generates a seeded pseudo-orbit of `n_legs` legs sized for `epsilon` and
// runs the matching solver. `rho` in `(0, 1)` gives decaying jumps
// `δ ρ^i`; any other value gives constant jumps.
//
// # Safety
// `handle` must be a live semigroup handle; `out` writable.
enum SlStatus sl_shadow(const struct SlSemigroup *handle,
                        double epsilon,
                        uintptr_t n_legs,
                        double rho,
                        uint64_t seed,
                        struct SlCertificate **out);

// # Safety
// `handle` must be null or come from [`sl_shadow`], freed once.
void sl_certificate_free(struct SlCertificate *handle);

// Sup error; NaN for a null handle.
//
// # Safety
// `handle` must be null or a live certificate handle.
double sl_certificate_sup_error(const struct SlCertificate *handle);

// Sup over the last quarter of the samples; NaN for a null handle.
//
// # Safety
// `handle` must be null or a live certificate handle.
double sl_certificate_tail_sup(const struct SlCertificate *handle);

// 1 if the ε-bound held on every sample, else 0.
//
// # Safety
// `handle` must be null or a live certificate handle.
int32_t sl_certificate_pass_eps(const struct SlCertificate *handle);

// 1 if the tail bound held, else 0.
//
// # Safety
// `handle` must be null or a live certificate handle.
int32_t sl_certificate_pass_limit(const struct SlCertificate *handle);

// Certificate as a JSON string; release with [`sl_string_free`].
//
// # Safety
// `handle` must be a live certificate handle; `out` writable.
enum SlStatus sl_certificate_to_json(const struct SlCertificate *handle, char **out);

// # Safety
// `s` must be null or come from this library, freed once.
void sl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHADOWLAB_H */
