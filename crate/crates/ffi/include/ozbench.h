#ifndef OZBENCH_H
#define OZBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Receiver bits returned by [`oz_route`].
 */
#define OZ_ROLE_PARTICIPANT 1

#define OZ_ROLE_DM (1 << 1)

#define OZ_ROLE_RN (1 << 2)

#define OZ_ROLE_SIM (1 << 3)

#define OZ_ROLE_SERVER (1 << 4)

/**
 * Number of ranges written by [`oz_sim_observe`].
 */
#define OZ_SCAN_BEAMS 360

/**
 * Result code of every fallible call.
 */
typedef enum OzStatus {
  OZ_STATUS_OK = 0,
  OZ_STATUS_NULL_ARGUMENT = 1,
  OZ_STATUS_INVALID_UTF8 = 2,
  OZ_STATUS_INVALID_ARGUMENT = 3,
  OZ_STATUS_NOT_FOUND = 4,
  OZ_STATUS_IO = 5,
  OZ_STATUS_INVALID_WORLD = 6,
  OZ_STATUS_INVALID_RULES = 7,
  OZ_STATUS_PARSE_ERROR = 8,
  OZ_STATUS_BUSY = 9,
  OZ_STATUS_ROUTE_DENIED = 10,
  OZ_STATUS_CORRUPT_LOG = 11,
  OZ_STATUS_WORLD_MISMATCH = 12,
  OZ_STATUS_BUFFER_TOO_SMALL = 13,
  OZ_STATUS_PANIC = 99,
} OzStatus;

typedef enum OzPrimitive {
  OZ_PRIMITIVE_TRANSLATE = 0,
  OZ_PRIMITIVE_ROTATE = 1,
  OZ_PRIMITIVE_HALT = 2,
} OzPrimitive;

typedef enum OzOutcomeCode {
  /**
   * The primitive is still running.
   */
  OZ_OUTCOME_CODE_RUNNING = 0,
  OZ_OUTCOME_CODE_COMPLETED = 1,
  OZ_OUTCOME_CODE_BLOCKED = 2,
  OZ_OUTCOME_CODE_HALTED = 3,
} OzOutcomeCode;

/**
 * Opaque guideline rule set.
 */
typedef struct OzRules OzRules;

/**
 * Opaque simulator handle.
 */
typedef struct OzSim OzSim;

typedef struct OzPose {
  double x;
  double y;
  /**
   * Degrees in [0, 360).
   */
  double theta;
} OzPose;

/**
 * Outcome of a primitive. `amount` is meters or degrees covered.
 */
typedef struct OzOutcome {
  enum OzOutcomeCode code;
  double amount;
} OzOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next ozbench call on this thread.
 */
const char *oz_last_error(void);

/**
 * Free a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void oz_string_free(char *s);

/**
 * Load a world file and create a simulator at its start pose.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum OzStatus oz_sim_load(const char *path, uint64_t tick_ms, struct OzSim **out);

/**
 * Create a simulator from world JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum OzStatus oz_sim_from_json(const char *json, uint64_t tick_ms, struct OzSim **out);

/**
 * # Safety
 * `sim` must come from `oz_sim_load`/`oz_sim_from_json` or be null.
 */
void oz_sim_free(struct OzSim *sim);

/**
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum OzStatus oz_sim_pose(struct OzSim *sim, struct OzPose *out);

/**
 * Ticks elapsed since creation.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum OzStatus oz_sim_ticks(struct OzSim *sim, uint64_t *out);

/**
 * Start a primitive. Translate magnitudes are meters, rotate degrees;
 * negative values drive backwards / turn clockwise. `out` receives
 * `Running` or, for a primitive that ends at once (halt, zero), its outcome.
 * Returns `Busy` while another primitive is active.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum OzStatus oz_sim_execute(struct OzSim *sim,
                             enum OzPrimitive primitive,
                             double magnitude,
                             struct OzOutcome *out);

/**
 * Advance one tick. `out` receives `Running` or the outcome of the
 * primitive that settled on this tick.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum OzStatus oz_sim_tick(struct OzSim *sim, struct OzOutcome *out);

/**
 * Take a lidar scan and fold it into the discovered map. Writes
 * `OZ_SCAN_BEAMS` ranges in meters; beam `i` points along world bearing
 * `i` degrees.
 *
 * # Safety
 * `sim` must be a live handle; `ranges` must hold `capacity` doubles.
 */
enum OzStatus oz_sim_observe(struct OzSim *sim, double *ranges, size_t capacity);

/**
 * Render the first-person camera view as binary PGM. With `buf` null,
 * only `*written` is set to the required size.
 *
 * # Safety
 * `sim` must be a live handle; `buf` must hold `capacity` bytes or be
 * null; `written` must be writable.
 */
enum OzStatus oz_sim_capture_pgm(struct OzSim *sim, uint8_t *buf, size_t capacity, size_t *written);

/**
 * SHA-256 (hex) of the discovered-map overlay.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum OzStatus oz_sim_map_hash(struct OzSim *sim, char **out);

/**
 * Parse a robot command and return its canonical text.
 * Fails with `ParseError`; the message names the code and span.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum OzStatus oz_command_canonicalize(const char *text, char **out);

/**
 * The bundled default rule set.
 *
 * # Safety
 * `out` must be writable.
 */
enum OzStatus oz_rules_default(struct OzRules **out);

/**
 * Load a rule set from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum OzStatus oz_rules_load(const char *path, struct OzRules **out);

/**
 * # Safety
 * `rules` must come from `oz_rules_default`/`oz_rules_load` or be null.
 */
void oz_rules_free(struct OzRules *rules);

/**
 * Classify an utterance. `out` receives JSON such as
 * `{"rule_id":"R5","type":"executable","text":"move forward 1.524 m"}`.
 *
 * # Safety
 * `rules` must be a live handle; `utterance` a NUL-terminated string;
 * `out` writable.
 */
enum OzStatus oz_rules_classify(const struct OzRules *rules, const char *utterance, char **out);

/**
 * Look up the routing matrix. Arguments are wire names (`"dm"`,
 * `"dm_rn_chat"`, `"command"`). On success `receivers` holds `OZ_ROLE_*`
 * bits; a denial returns `RouteDenied` with the reason as the message.
 *
 * # Safety
 * String arguments must be NUL-terminated; `receivers` writable.
 */
enum OzStatus oz_route(const char *from,
                       const char *channel,
                       const char *kind,
                       uint32_t *receivers);

/**
 * Replay a session log. `world_path` may be null to use the path recorded
 * in the log header. `out` receives the summary as JSON.
 *
 * # Safety
 * `log_path` must be NUL-terminated, `world_path` NUL-terminated or null,
 * `out` writable.
 */
enum OzStatus oz_replay(const char *log_path, const char *world_path, char **out);

/**
 * Check that a log file parses with a gap-free sequence.
 *
 * # Safety
 * `log_path` must be NUL-terminated; `records` writable.
 */
enum OzStatus oz_log_check(const char *log_path, uint64_t *records);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OZBENCH_H */
