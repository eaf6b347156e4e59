#ifndef EHD2D_H
#define EHD2D_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Values 2 to 4 match the command-line exit codes.
typedef enum EhdStatus {
  EHD_STATUS_OK = 0,
  EHD_STATUS_NULL_POINTER = 1,
  EHD_STATUS_CONFIG = 2,
  EHD_STATUS_SOLVER = 3,
  EHD_STATUS_IO = 4,
  EHD_STATUS_INVALID_ARGUMENT = 5,
  EHD_STATUS_BUFFER_TOO_SMALL = 6,
  EHD_STATUS_PANIC = 7,
} EhdStatus;

// Fields of a simulation state.
typedef enum EhdField {
  EHD_FIELD_V = 0,
  EHD_FIELD_W = 1,
  EHD_FIELD_PHI = 2,
  EHD_FIELD_PRESSURE = 3,
} EhdField;

// Fields of a steady state.
typedef enum EhdSteadyField {
  EHD_STEADY_FIELD_PHI = 0,
  EHD_STEADY_FIELD_V = 1,
  EHD_STEADY_FIELD_W = 2,
} EhdSteadyField;

// Parsed run configuration.
typedef struct EhdConfig EhdConfig;

// A running simulation with its steady state.
typedef struct EhdSim EhdSim;

// A solved steady state.
typedef struct EhdSteady EhdSteady;

// One diagnostics row.
typedef struct EhdDiagnostics {
  uint64_t step;
  double t;
  double mass_v;
  double mass_w;
  double min_v;
  double min_w;
  double kinetic;
  double entropy;
  double electrostatic;
  double k_total;
  double lyapunov;
  double dist_sq;
  double dissipation;
  double max_div;
} EhdDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ehd_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t ehd_last_error_message(char *buf, size_t len);

// Parses configuration text in the `key = value` format.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be valid for writes.
enum EhdStatus ehd_config_parse(const char *text, struct EhdConfig **out);

// Reads and parses a configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
enum EhdStatus ehd_config_read(const char *path, struct EhdConfig **out);

// # Safety
// `cfg` must be null or a handle from this library not yet freed.
void ehd_config_free(struct EhdConfig *cfg);

// Builds the initial state and solves the steady state for its masses.
//
// # Safety
// `cfg` must be a live config handle; `out` must be valid for writes.
enum EhdStatus ehd_sim_new(const struct EhdConfig *cfg, struct EhdSim **out);

// Advances `steps` time steps. On error the state is left at the last
// completed step.
//
// # Safety
// `sim` must be a live simulation handle.
enum EhdStatus ehd_sim_step(struct EhdSim *sim, uint64_t steps);

// Current time and step index.
//
// # Safety
// `sim` must be a live handle; `t` and `step` must be valid for writes.
enum EhdStatus ehd_sim_time(const struct EhdSim *sim, double *t, uint64_t *step);

// Grid dimensions of a simulation.
//
// # Safety
// `sim` must be a live handle; `nx` and `ny` must be valid for writes.
enum EhdStatus ehd_sim_grid(const struct EhdSim *sim, size_t *nx, size_t *ny);

// Diagnostics of the current state.
//
// # Safety
// `sim` must be a live handle; `out` must be valid for writes.
enum EhdStatus ehd_sim_diagnostics(const struct EhdSim *sim, struct EhdDiagnostics *out);

// Copies a cell field (row-major, `y` outer) into `buf` of `len` doubles.
//
// # Safety
// `sim` must be a live handle; `buf` must be valid for `len` doubles.
enum EhdStatus ehd_sim_copy_field(const struct EhdSim *sim,
                                  enum EhdField field,
                                  double *buf,
                                  size_t len);

// # Safety
// `sim` must be null or a handle from this library not yet freed.
void ehd_sim_free(struct EhdSim *sim);

// Solves the steady state on an `nx` by `ny` grid of extent `lx` by `ly`.
//
// # Safety
// `out` must be valid for writes.
enum EhdStatus ehd_steady_solve(size_t nx,
                                size_t ny,
                                double lx,
                                double ly,
                                double mu_v,
                                double mu_w,
                                double tol,
                                struct EhdSteady **out);

// Residual and Newton iteration count.
//
// # Safety
// `st` must be a live handle; outputs must be valid for writes.
enum EhdStatus ehd_steady_info(const struct EhdSteady *st, double *residual, size_t *iterations);

// # Safety
// `st` must be a live handle; `buf` must be valid for `len` doubles.
enum EhdStatus ehd_steady_copy_field(const struct EhdSteady *st,
                                     enum EhdSteadyField field,
                                     double *buf,
                                     size_t len);

// # Safety
// `st` must be null or a handle from this library not yet freed.
void ehd_steady_free(struct EhdSteady *st);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EHD2D_H */
