#ifndef FLEXLINK_H
#define FLEXLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum FlexlinkStatus {
  FLEXLINK_STATUS_OK = 0,
  FLEXLINK_STATUS_NULL_POINTER = 1,
  FLEXLINK_STATUS_INVALID_UTF8 = 2,
  FLEXLINK_STATUS_PARSE = 3,
  FLEXLINK_STATUS_CONFIG = 4,
  FLEXLINK_STATUS_NUMERIC = 5,
  FLEXLINK_STATUS_DIVERGENCE = 6,
  FLEXLINK_STATUS_IO = 7,
  FLEXLINK_STATUS_MISSING_FILE = 8,
  FLEXLINK_STATUS_BUFFER_TOO_SMALL = 9,
  FLEXLINK_STATUS_PANIC = 10,
} FlexlinkStatus;

/**
 * Opaque scenario handle.
 */
typedef struct FlexlinkScenario FlexlinkScenario;

/**
 * Headline figures of a run. Times that did not occur are NaN.
 */
typedef struct FlexlinkSummary {
  double contact_time;
  double free_phase_tracking_error;
  double lyapunov_initial;
  double lyapunov_max_increase;
  double steady_force;
  double steady_penetration;
  double expected_penetration;
  double tip_position_error;
  double max_tip_deflection;
  double settling_time;
  double force_error_sup;
  double velocity_error_bound;
  bool force_bound_holds;
} FlexlinkSummary;

typedef struct FlexlinkModeConstants {
  uint32_t mode_index;
  double beta_l;
  double a0;
  double a1;
  double a2;
  double a3;
  /**
   * Clamped-free natural frequency (rad/s).
   */
  double natural_frequency;
} FlexlinkModeConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FlexlinkStatus flexlink_scenario_from_str(const char *text, struct FlexlinkScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FlexlinkStatus flexlink_scenario_from_file(const char *path, struct FlexlinkScenario **out);

/**
 * Releases a scenario; null is ignored.
 *
 * # Safety
 * `scenario` must come from a constructor above and not be used afterwards.
 */
void flexlink_scenario_free(struct FlexlinkScenario *scenario);

/**
 * Overrides the run length in seconds.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum FlexlinkStatus flexlink_scenario_set_duration(struct FlexlinkScenario *scenario,
                                                   double duration);

/**
 * Runs the scenario (sweep section ignored) and fills `out`.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum FlexlinkStatus flexlink_run(const struct FlexlinkScenario *scenario,
                                 struct FlexlinkSummary *out);

/**
 * Runs the scenario and writes the CSV artifacts under `dir`, like the
 * command-line `run`.
 *
 * # Safety
 * `scenario` must be a live handle and `dir` a NUL-terminated string.
 */
enum FlexlinkStatus flexlink_run_to_dir(const struct FlexlinkScenario *scenario,
                                        const char *dir,
                                        bool sweep);

/**
 * Writes the first `count` roots of `cos x cosh x = −1` to `out`.
 *
 * # Safety
 * `out` must have room for `count` values.
 */
enum FlexlinkStatus flexlink_characteristic_roots(size_t count, double *out);

/**
 * Modal constants of the scenario's beam. `written` receives the mode count;
 * when `capacity` is smaller nothing is written to `out` and
 * `FLEXLINK_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `scenario` must be a live handle, `out` must have room for `capacity`
 * entries and `written` must be valid.
 */
enum FlexlinkStatus flexlink_modal_constants(const struct FlexlinkScenario *scenario,
                                             struct FlexlinkModeConstants *out,
                                             size_t capacity,
                                             size_t *written);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`) and returns the full length
 * including the terminator.
 *
 * # Safety
 * `buf` must have room for `len` bytes or be null.
 */
size_t flexlink_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *flexlink_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLEXLINK_H */
