#ifndef JPCM_H
#define JPCM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum JpcmStatus {
  JPCM_STATUS_OK = 0,
  JPCM_STATUS_NULL_POINTER = 1,
  JPCM_STATUS_INVALID_ARGUMENT = 2,
  JPCM_STATUS_CONFIG = 3,
  JPCM_STATUS_SOLVER = 4,
  JPCM_STATUS_IO = 5,
  JPCM_STATUS_PANIC = 6,
} JpcmStatus;

// Stateful receding-horizon controller.
typedef struct JpcmController JpcmController;

// Closed-loop run result.
typedef struct JpcmRunLog JpcmRunLog;

// Scenario configuration.
typedef struct JpcmScenario JpcmScenario;

// Full vehicle state in the world frame.
typedef struct JpcmState {
  double position[3];
  // Body-to-world rotation, row-major.
  double rotation[9];
  double velocity[3];
  // Body-frame angular velocity.
  double angular_velocity[3];
} JpcmState;

// Per-axis tracking RMSE.
typedef struct JpcmRmse {
  double position[3];
  double rotation[3];
  uint64_t samples;
} JpcmRmse;

// Relative pose of epoch `j` in the frame of epoch `i`.
typedef struct JpcmRelPose {
  uint64_t i;
  uint64_t j;
  // Row-major rotation.
  double rotation[9];
  double translation[3];
  // Row-major 6x6 covariance ordered (rotation, translation).
  double covariance[36];
} JpcmRelPose;

// Outcome of one control step.
typedef struct JpcmStepResult {
  // Rotor speeds to apply, rad/s.
  double rotors[4];
  // Collective thrust and body moments.
  double wrench[4];
  struct JpcmState estimate;
  uint32_t iterations;
  double final_error;
  // Non-zero when the solve failed and the previous input was held.
  uint8_t fallback;
  uint8_t cold_start;
} JpcmStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *jpcm_last_error(void);

// Library version as a static NUL-terminated string.
const char *jpcm_version(void);

// Parses a scenario from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum JpcmStatus jpcm_scenario_from_toml(const char *toml, struct JpcmScenario **out);

// Loads one of the shipped scenarios by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum JpcmStatus jpcm_scenario_builtin(const char *name, struct JpcmScenario **out);

// # Safety
// `scenario` must be a live handle.
enum JpcmStatus jpcm_scenario_set_seed(struct JpcmScenario *scenario, uint64_t seed);

// # Safety
// `scenario` must be a live handle.
enum JpcmStatus jpcm_scenario_set_duration(struct JpcmScenario *scenario, double seconds);

// Reference state at time `t` of the scenario's trajectory.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum JpcmStatus jpcm_scenario_reference_state(const struct JpcmScenario *scenario,
                                              double t,
                                              struct JpcmState *out);

// Releases a scenario. Null is ignored.
//
// # Safety
// `scenario` must be null or a handle not yet freed.
void jpcm_scenario_free(struct JpcmScenario *scenario);

// Simulates the scenario in closed loop. A run that stops early still
// returns `JPCM_STATUS_OK`; see [`jpcm_run_log_failed`].
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum JpcmStatus jpcm_run_scenario(const struct JpcmScenario *scenario, struct JpcmRunLog **out);

// Number of recorded control steps; zero for null.
//
// # Safety
// `log` must be null or a live handle.
uint64_t jpcm_run_log_len(const struct JpcmRunLog *log);

// Non-zero when the run stopped before its duration.
//
// # Safety
// `log` must be null or a live handle.
uint8_t jpcm_run_log_failed(const struct JpcmRunLog *log);

// Tracking RMSE over samples with `t >= transient`.
//
// # Safety
// `log` must be a live handle and `out` a valid pointer.
enum JpcmStatus jpcm_run_log_rmse(const struct JpcmRunLog *log,
                                  double transient,
                                  struct JpcmRmse *out);

// Writes the run log as CSV without wall-clock timings.
//
// # Safety
// `log` must be a live handle and `path` a NUL-terminated string.
enum JpcmStatus jpcm_run_log_write_csv(const struct JpcmRunLog *log, const char *path);

// # Safety
// `log` must be null or a handle not yet freed.
void jpcm_run_log_free(struct JpcmRunLog *log);

// Controller configured like the scenario (mode, weights, airframe and
// reference).
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum JpcmStatus jpcm_controller_new(const struct JpcmScenario *scenario,
                                    struct JpcmController **out);

// One control step from a positioning measurement and an optional relative
// pose (null when absent).
//
// # Safety
// `controller` must be a live handle, `measurement` and `out` valid
// pointers and `rel_pose` null or valid.
enum JpcmStatus jpcm_controller_step(struct JpcmController *controller,
                                     const struct JpcmState *measurement,
                                     const struct JpcmRelPose *rel_pose,
                                     struct JpcmStepResult *out);

// # Safety
// `controller` must be null or a handle not yet freed.
void jpcm_controller_free(struct JpcmController *controller);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JPCM_H */
