#ifndef VISCWAVE_H
#define VISCWAVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VwStatus {
  VW_STATUS_OK = 0,
  VW_STATUS_NULL_POINTER = 1,
  VW_STATUS_INVALID_UTF8 = 2,
  VW_STATUS_CONFIG = 3,
  VW_STATUS_GEOMETRY = 4,
  VW_STATUS_CONTRACTION = 5,
  VW_STATUS_DOMAIN = 6,
  VW_STATUS_NON_FINITE = 7,
  VW_STATUS_BUFFER_TOO_SMALL = 8,
  VW_STATUS_INVALID_ARGUMENT = 9,
  VW_STATUS_PANIC = 10,
  VW_STATUS_INTERNAL = 11,
} VwStatus;

// Which field of the state to read or write.
typedef enum VwField {
  VW_FIELD_INTERFACE = 0,
  VW_FIELD_POTENTIAL = 1,
} VwField;

// Opaque simulation handle.
typedef struct VwSim VwSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *vw_version(void);

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len - 1` bytes). Returns the full message
// length in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t vw_last_error_message(char *buf, size_t len);

// Builds a simulation from TOML run-config text. The initial data is
// realized from the config's preset at t = 0.
//
// # Safety
// `config` must be a NUL-terminated string; `out` must be writable.
enum VwStatus vw_sim_new(const char *config, struct VwSim **out);

// Releases a handle from [`vw_sim_new`]. Null is ignored.
//
// # Safety
// `sim` must be null or a live handle not used afterwards.
void vw_sim_free(struct VwSim *sim);

// One step of the configured size. The state is unchanged on failure.
//
// # Safety
// `sim` must be a live handle.
enum VwStatus vw_sim_step(struct VwSim *sim);

// Steps until `t_end`, shortening the last step to land on it.
//
// # Safety
// `sim` must be a live handle.
enum VwStatus vw_sim_advance(struct VwSim *sim, double t_end);

// # Safety
// `sim` must be a live handle; `t` must be writable.
enum VwStatus vw_sim_time(const struct VwSim *sim, double *t);

// Mean removed by the last step's zero-mean projection.
//
// # Safety
// `sim` must be a live handle; `drift` must be writable.
enum VwStatus vw_sim_mean_drift(const struct VwSim *sim, double *drift);

// Number of stored coefficients per field, N/2 + 1 (modes 0..=N/2).
//
// # Safety
// `sim` must be a live handle; `len` must be writable.
enum VwStatus vw_sim_coeff_len(const struct VwSim *sim, size_t *len);

// Copies the Fourier coefficients of modes 0..=N/2 as interleaved
// (re, im) pairs. `len` counts doubles and must be at least twice
// [`vw_sim_coeff_len`].
//
// # Safety
// `sim` must be a live handle; `out` must be valid for `len` doubles.
enum VwStatus vw_sim_coefficients(const struct VwSim *sim,
                                  enum VwField field,
                                  double *out,
                                  size_t len);

// Exact linear propagator for mode `n` over `dt`, row-major 2×2 acting on
// (ξ̂, ĥ). With `kappa > 0` the mollified symbol is used.
//
// # Safety
// `out` must be valid for 4 doubles.
enum VwStatus vw_linear_propagator(size_t n, double alpha, double kappa, double dt, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VISCWAVE_H */
