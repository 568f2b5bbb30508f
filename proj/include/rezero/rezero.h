/* C interface to the rezero library: opaque handles plus status codes.
 * Every function returns RZ_OK or an error status; the message of the last
 * failure on the calling thread is available from rz_last_error(). */
#ifndef REZERO_REZERO_H
#define REZERO_REZERO_H

#include <stddef.h>
#include <stdint.h>

#if defined(REZERO_BUILDING_LIBRARY)
#define RZ_API __attribute__((visibility("default")))
#else
#define RZ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rz_status {
  RZ_OK = 0,
  RZ_ERR_INVALID_ARGUMENT = 1, /* null handle/pointer, buffer too small */
  RZ_ERR_INVALID_STATE = 2,
  RZ_ERR_INVALID_ACTION = 3,
  RZ_ERR_CONTRACT = 4,
  RZ_ERR_PRECONDITION = 5,
  RZ_ERR_DOMAIN = 6,
  RZ_ERR_STALE_TARGETS = 7,
  RZ_ERR_CONFIG = 8,
  RZ_ERR_IO = 9,
  RZ_ERR_INTERNAL = 10
} rz_status;

typedef struct rz_config rz_config;
typedef struct rz_gridworld rz_gridworld;

RZ_API const char* rz_version(void);
/* Message of the most recent failed call on this thread; "" after success. */
RZ_API const char* rz_last_error(void);
RZ_API const char* rz_status_name(rz_status status);

/* ---- run configuration ---- */

RZ_API rz_status rz_config_default(rz_config** out);
RZ_API rz_status rz_config_from_json(const char* json_text, rz_config** out);
RZ_API rz_status rz_config_from_file(const char* path, rz_config** out);
RZ_API rz_status rz_config_set_seed(rz_config* config, uint64_t seed);
RZ_API rz_status rz_config_get_seed(const rz_config* config, uint64_t* seed);
RZ_API void rz_config_destroy(rz_config* config);

/* Runs one experiment command (toycase, reuse-stats, bandit, train,
 * batch-bench) and writes its CSVs and manifests into out_dir. mode is
 * "rezero" or "baseline" and only matters for train. When log is non-null
 * the human-readable summary is passed to it line by line once the
 * command finishes. */
typedef void (*rz_log_fn)(const char* line, void* user);
RZ_API rz_status rz_run_command(const rz_config* config, const char* command, const char* mode, const char* out_dir,
                                rz_log_fn log, void* user);

/* ---- gridworld ---- */

/* Presets: "walled7x7", "open4x4". */
RZ_API rz_status rz_gridworld_preset(const char* name, rz_gridworld** out);
/* walls holds num_walls (row, col) pairs, i.e. 2 * num_walls ints. */
RZ_API rz_status rz_gridworld_create(int width, int height, int start_row, int start_col, int goal_row, int goal_col,
                                     const int* walls, size_t num_walls, rz_gridworld** out);
RZ_API void rz_gridworld_destroy(rz_gridworld* grid);

/* Writes up to capacity action indices (0 down, 1 up, 2 left, 3 right) and
 * the number of legal actions into *count. */
RZ_API rz_status rz_gridworld_legal_actions(const rz_gridworld* grid, int row, int col, int* actions, size_t capacity,
                                            size_t* count);
RZ_API rz_status rz_gridworld_step(const rz_gridworld* grid, int row, int col, int action, int* next_row,
                                   int* next_col, double* reward, int* terminal);
/* *distance = -1 when the goal is unreachable. */
RZ_API rz_status rz_gridworld_shortest_path(const rz_gridworld* grid, int row, int col, int* distance);

/* ---- tree search ---- */

typedef enum rz_predictor { RZ_PREDICTOR_ORACLE = 0, RZ_PREDICTOR_ROLLOUT = 1, RZ_PREDICTOR_UNIFORM = 2 } rz_predictor;

typedef struct rz_search_params {
  int num_simulations;
  double c_puct;
  double gamma;
  int root_noise;
  uint64_t seed;
  rz_predictor predictor;
  /* Pre-evaluated root child: when use_reuse is non-zero, selecting
   * reused_action scores reused_reward + gamma * reused_value and ends the
   * simulation at the root. */
  int use_reuse;
  int reused_action;
  double reused_value;
  double reused_reward;
} rz_search_params;

RZ_API void rz_search_params_default(rz_search_params* params);

typedef struct rz_search_output {
  int actions[4]; /* root actions in legal order; num_actions entries used */
  int visits[4];
  size_t num_actions;
  double root_value;
  uint64_t simulations;
  uint64_t dynamics_calls;
  uint64_t early_terminations;
} rz_search_output;

RZ_API rz_status rz_search(const rz_gridworld* grid, int row, int col, const rz_search_params* params,
                           rz_search_output* out);

#ifdef __cplusplus
}
#endif

#endif
