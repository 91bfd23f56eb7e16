#ifndef DONOR_DOT_H
#define DONOR_DOT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum DdStatus {
  DD_STATUS_OK = 0,
  DD_STATUS_NULL_POINTER = 1,
  DD_STATUS_INVALID_ARGUMENT = 2,
  DD_STATUS_CONFIG = 3,
  DD_STATUS_SOLVER = 4,
  DD_STATUS_BUFFER_TOO_SMALL = 5,
  DD_STATUS_IO = 6,
  DD_STATUS_PANIC = 7,
} DdStatus;

typedef enum DdIsland {
  DD_ISLAND_DONOR = 0,
  DD_ISLAND_DOT = 1,
} DdIsland;

typedef enum DdTerminal {
  DD_TERMINAL_SOURCE = 0,
  DD_TERMINAL_DRAIN = 1,
  DD_TERMINAL_GATE = 2,
  DD_TERMINAL_BACK = 3,
} DdTerminal;

typedef enum DdObservable {
  // Drain current (A).
  DD_OBSERVABLE_CURRENT = 0,
  // dI/dV_d in e^2/h.
  DD_OBSERVABLE_CONDUCTANCE = 1,
  DD_OBSERVABLE_LOG10_CONDUCTANCE = 2,
} DdObservable;

// Opaque device handle.
typedef struct DdDevice DdDevice;

// Terminal voltages (mV).
typedef struct DdBias {
  double v_source;
  double v_drain;
  double v_gate;
  double v_back;
} DdBias;

// Evenly spaced sweep of one terminal, endpoints included.
typedef struct DdAxis {
  enum DdTerminal terminal;
  double start;
  double stop;
  size_t steps;
} DdAxis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next failing call on this thread.
const char *dd_last_error(void);

// Library version as a static NUL-terminated string.
const char *dd_version(void);

// The built-in reference device.
//
// # Safety
// `out` must be a valid pointer.
enum DdStatus dd_device_table1(struct DdDevice **out);

// Device from TOML text in the device file format.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum DdStatus dd_device_from_toml(const char *toml, struct DdDevice **out);

// Device from a file in the device file format.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum DdStatus dd_device_from_file(const char *path, struct DdDevice **out);

// Independent copy of `dev`.
//
// # Safety
// `dev` must be a live handle and `out` a valid pointer.
enum DdStatus dd_device_clone(const struct DdDevice *dev, struct DdDevice **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `dev` must be null or a handle not yet freed.
void dd_device_free(struct DdDevice *dev);

// # Safety
// `dev` must be a live handle.
enum DdStatus dd_device_set_c_mutual(struct DdDevice *dev, double c_mutual);

// # Safety
// `dev` must be a live handle.
enum DdStatus dd_device_set_temperature(struct DdDevice *dev, double kelvin);

// Freezes the other island so only `island` conducts.
//
// # Safety
// `dev` must be a live handle.
enum DdStatus dd_device_isolate(struct DdDevice *dev, enum DdIsland island);

// Charging energy `e^2 / C_sum` (meV).
//
// # Safety
// `dev` must be a live handle and `out` a valid pointer.
enum DdStatus dd_charging_energy(const struct DdDevice *dev, enum DdIsland island, double *out);

// Lever arm `C_g / C_sum`.
//
// # Safety
// `dev` must be a live handle and `out` a valid pointer.
enum DdStatus dd_lever_arm(const struct DdDevice *dev, enum DdIsland island, double *out);

// Coulomb diamond edge slopes dV_d/dV_g.
//
// # Safety
// `dev` must be a live handle; `positive` and `negative` valid pointers.
enum DdStatus dd_diamond_slopes(const struct DdDevice *dev,
                                enum DdIsland island,
                                double *positive,
                                double *negative);

// Resonance-line slope dV_g/dV_b in a gate/back-gate map.
//
// # Safety
// `dev` must be a live handle and `out` a valid pointer.
enum DdStatus dd_backgate_slope(const struct DdDevice *dev, enum DdIsland island, double *out);

// Steady-state drain current (A).
//
// # Safety
// `dev` must be a live handle and `out` a valid pointer.
enum DdStatus dd_current(const struct DdDevice *dev, struct DdBias bias, double *out);

// Differential conductance (e^2/h) by a central difference of `delta_vd` mV.
//
// # Safety
// `dev` must be a live handle and `out` a valid pointer.
enum DdStatus dd_conductance(const struct DdDevice *dev,
                             struct DdBias bias,
                             double delta_vd,
                             double *out);

// Lowest-energy charge state `(n_donor, m_dot)`.
//
// # Safety
// `dev` must be a live handle; `n` and `m` valid pointers.
enum DdStatus dd_ground_state(const struct DdDevice *dev,
                              struct DdBias bias,
                              uint32_t *n,
                              uint32_t *m);

// Evaluates `observable` on the `axis1 x axis2` grid into `values`,
// axis 1 varying fastest. `capacity` is the length of `values`; it must be
// at least `axis1.steps * axis2.steps` or [`DdStatus::BufferTooSmall`] is
// returned with nothing written. `jobs = 0` uses all cores.
//
// # Safety
// `dev` must be a live handle and `values` valid for `capacity` writes.
enum DdStatus dd_sweep(const struct DdDevice *dev,
                       struct DdAxis axis1,
                       struct DdAxis axis2,
                       struct DdBias fixed,
                       enum DdObservable observable,
                       size_t jobs,
                       double *values,
                       size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DONOR_DOT_H */
