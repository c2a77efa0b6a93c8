/* SPDX-License-Identifier: Apache-2.0 */

#ifndef DWCAV_H
#define DWCAV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Zero is success.
typedef enum DwcavStatus {
  DWCAV_STATUS_OK = 0,
  DWCAV_STATUS_NULL_POINTER = 1,
  DWCAV_STATUS_INVALID_PARAM = 2,
  DWCAV_STATUS_DOMAIN = 3,
  DWCAV_STATUS_UNDEFINED_ROOT = 4,
  DWCAV_STATUS_UNSTABLE = 5,
  DWCAV_STATUS_CONDITIONING = 6,
  DWCAV_STATUS_UNPHYSICAL = 7,
  DWCAV_STATUS_NON_CONVERGENCE = 8,
  DWCAV_STATUS_BRACKET = 9,
  DWCAV_STATUS_CONFIG = 10,
  DWCAV_STATUS_NUMERICAL = 11,
  DWCAV_STATUS_BUFFER_TOO_SMALL = 12,
  DWCAV_STATUS_PANIC = 13,
} DwcavStatus;

// System parameters.
typedef struct DwcavParams DwcavParams;

// Entanglement measures at one point.
typedef struct DwcavResult DwcavResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread; empty if none. Valid
// until the next failing call on this thread.
const char *dwcav_last_error(void);

// Library version, a static NUL-terminated string.
const char *dwcav_version(void);

// Two walls with equal coupling and damping, undriven, T = 0.
//
// # Safety
// `out` must be valid for a pointer write.
enum DwcavStatus dwcav_params_new_two_walls(double omega1,
                                            double omega2,
                                            double g,
                                            double kappa_a,
                                            double kappa,
                                            struct DwcavParams **out);

// κ_a = 2 MHz, κ_j = 1 MHz, ω_1 = 1 GHz, g_j = 1 MHz, T = 2 mK, ω_2 = ratio·ω_1.
//
// # Safety
// `out` must be valid for a pointer write.
enum DwcavStatus dwcav_params_representative(double omega_ratio, struct DwcavParams **out);

// Parameters from a JSON object with the fields of the CLI `params` section.
//
// # Safety
// `json` must be a NUL-terminated string; `out` valid for a pointer write.
enum DwcavStatus dwcav_params_from_json(const char *json, struct DwcavParams **out);

// # Safety
// `p` must come from a `dwcav_params_*` constructor and not be freed twice.
void dwcav_params_free(struct DwcavParams *p);

// Sets the bath temperature in kelvin.
//
// # Safety
// `p` must be a live handle.
enum DwcavStatus dwcav_params_set_temperature(struct DwcavParams *p, double t);

// Frequency convention for thermal factors: 0 ordinary (ħ·2πf), 1 angular (ħω).
//
// # Safety
// `p` must be a live handle.
enum DwcavStatus dwcav_params_set_convention(struct DwcavParams *p, int32_t angular);

// Sets detuning Δ_a and real drive amplitude ξ.
//
// # Safety
// `p` must be a live handle.
enum DwcavStatus dwcav_params_set_drive(struct DwcavParams *p, double delta_a, double xi);

// Mean photon numbers of the real mean-field roots at the current drive,
// ascending. `count` receives the number of roots (1 or 3, at most 3). Fails
// with BufferTooSmall, setting `count`, if `cap` is smaller.
//
// # Safety
// `n_bar` must hold `cap` doubles; `count` valid for a write.
enum DwcavStatus dwcav_mean_field(const struct DwcavParams *p,
                                  double *n_bar,
                                  size_t cap,
                                  size_t *count);

// G*(Δ̃) of the transcritical line, Δ̃ < 0.
//
// # Safety
// `p` must be a live handle; `out` valid for a write.
enum DwcavStatus dwcav_bifurcation_amplitude(const struct DwcavParams *p,
                                             double delta_tilde,
                                             double *out);

// Full pipeline at (G_eff, Δ̃). Δ̃ is absolute.
//
// # Safety
// `p` must be a live handle; `out` valid for a pointer write.
enum DwcavStatus dwcav_analyze_point(const struct DwcavParams *p,
                                     double g_eff,
                                     double delta_tilde,
                                     struct DwcavResult **out);

// # Safety
// `r` must come from `dwcav_analyze_point` and not be freed twice.
void dwcav_result_free(struct DwcavResult *r);

// Log negativity maximized over stable roots. `pair`: 0 for walls 1|2,
// 1 for cavity|wall 1, 2 for cavity|wall 2. NaN without a stable root.
//
// # Safety
// `r` must be a live handle; `out` valid for a write.
enum DwcavStatus dwcav_result_log_negativity(const struct DwcavResult *r,
                                             uint32_t pair,
                                             double *out);

// Smallest ordinary eigenvalue of the pair covariance, minimized over stable
// roots; pairs as in `dwcav_result_log_negativity`.
//
// # Safety
// `r` must be a live handle; `out` valid for a write.
enum DwcavStatus dwcav_result_nu_min(const struct DwcavResult *r, uint32_t pair, double *out);

// Numbers of real and of stable roots.
//
// # Safety
// `r` must be a live handle; outputs valid for writes.
enum DwcavStatus dwcav_result_root_counts(const struct DwcavResult *r,
                                          size_t *n_real,
                                          size_t *n_stable);

// Result as a JSON string, released with `dwcav_string_free`.
//
// # Safety
// `r` must be a live handle; `out` valid for a pointer write.
enum DwcavStatus dwcav_result_to_json(const struct DwcavResult *r, char **out);

// # Safety
// `s` must come from this library and not be freed twice.
void dwcav_string_free(char *s);

// Log negativity of a two-mode covariance given as 16 doubles, row-major,
// ordering (x1, p1, x2, p2).
//
// # Safety
// `v4` must point to 16 doubles; `out` valid for a write.
enum DwcavStatus dwcav_log_negativity(const double *v4, double *out);

// Temperature at which E_12 at Δ̃ = delta_over_omega·ω_1 on the
// bifurcation line drops below `threshold`, bisected in [t_lo, t_hi].
//
// # Safety
// `p` must be a live handle; `out` valid for a write.
enum DwcavStatus dwcav_cutoff_temperature(const struct DwcavParams *p,
                                          double delta_over_omega,
                                          double threshold,
                                          double t_lo,
                                          double t_hi,
                                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DWCAV_H */
