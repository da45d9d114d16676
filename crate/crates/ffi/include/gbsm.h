/* Generated by cbindgen from the gbsm-ffi crate. Do not edit. */

#ifndef GBSM_H
#define GBSM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum GbsmStatus {
  GBSM_STATUS_OK = 0,
  GBSM_STATUS_NULL_POINTER = 1,
  GBSM_STATUS_INVALID_ARGUMENT = 2,
  // A requested time lies past a trajectory horizon or a sphere collapses.
  GBSM_STATUS_OUT_OF_RANGE = 3,
  // Quadrature failed to converge or a matrix is not usable.
  GBSM_STATUS_NUMERICAL = 4,
  GBSM_STATUS_PARSE = 5,
  GBSM_STATUS_IO = 6,
  GBSM_STATUS_BUFFER_TOO_SMALL = 7,
  GBSM_STATUS_PANIC = 8,
} GbsmStatus;

// Opaque scenario handle.
typedef struct GbsmScenario GbsmScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *gbsm_last_error_message(void);

// Clears the last error of this thread.
void gbsm_clear_last_error(void);

// Library version as a static NUL-terminated string.
const char *gbsm_version(void);

// Loads and validates a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum GbsmStatus gbsm_scenario_load(const char *path, struct GbsmScenario **out);

// Parses and validates a scenario from TOML text.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum GbsmStatus gbsm_scenario_parse(const char *text, struct GbsmScenario **out);

// Releases a handle; null is ignored.
//
// # Safety
// `scenario` must come from this library and not be used afterwards.
void gbsm_scenario_free(struct GbsmScenario *scenario);

// Overrides the seed used by every random computation on this handle.
//
// # Safety
// `scenario` must be a live handle.
enum GbsmStatus gbsm_scenario_set_seed(struct GbsmScenario *scenario, uint64_t seed);

// Receive and transmit element counts; the correlation matrix has
// dimension `rx * tx`.
//
// # Safety
// `scenario` must be a live handle; outputs must be writable.
enum GbsmStatus gbsm_scenario_dims(const struct GbsmScenario *scenario,
                                   size_t *rx_elements,
                                   size_t *tx_elements);

// Correlation matrix at `time_s` for a polarization label, written as
// `dim * dim` interleaved complex values (`2 * dim * dim` doubles).
//
// # Safety
// `scenario` must be a live handle, `polarization` a NUL-terminated
// string and `out` must hold `capacity` doubles.
enum GbsmStatus gbsm_correlation_matrix(const struct GbsmScenario *scenario,
                                        const char *polarization,
                                        double time_s,
                                        double *out,
                                        size_t capacity);

// Mean off-diagonal correlation modulus at `time_s`.
//
// # Safety
// `scenario` must be a live handle, `polarization` a NUL-terminated
// string and `out` writable.
enum GbsmStatus gbsm_mean_correlation(const struct GbsmScenario *scenario,
                                      const char *polarization,
                                      double time_s,
                                      double *out);

// Ergodic capacity (bps/Hz) and its standard error at `time_s`. A zero
// `n_draws` uses the scenario's draw count.
//
// # Safety
// `scenario` must be a live handle, `polarization` a NUL-terminated
// string and both outputs writable.
enum GbsmStatus gbsm_ergodic_capacity(const struct GbsmScenario *scenario,
                                      const char *polarization,
                                      double time_s,
                                      double snr_db,
                                      size_t n_draws,
                                      double *mean,
                                      double *std_error);

// Von Mises-Fisher density per unit elevation and azimuth at
// `(elevation, azimuth)` for a single component.
//
// # Safety
// `out` must be writable.
enum GbsmStatus gbsm_vmf_pdf(double elevation,
                             double azimuth,
                             double mean_elevation,
                             double mean_azimuth,
                             double kappa,
                             double *out);

// Samples one drifted Brownian path of a cluster mean and writes the
// `segments + 1` directions on the sphere.
//
// # Safety
// `elevations` and `azimuths` must each hold `capacity` doubles.
enum GbsmStatus gbsm_motion_path(double start_elevation,
                                 double start_azimuth,
                                 double rate_elevation,
                                 double rate_azimuth,
                                 double sigma_elevation,
                                 double sigma_azimuth,
                                 size_t segments,
                                 double dt,
                                 uint64_t seed,
                                 double *elevations,
                                 double *azimuths,
                                 size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GBSM_H */
