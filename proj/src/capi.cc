#include "rezero/rezero.h"

#include <exception>
#include <fstream>
#include <sstream>
#include <string>

#include "rezero/config.h"
#include "rezero/errors.h"
#include "rezero/experiments.h"
#include "rezero/reuse.h"

struct rz_config {
  rezero::RunConfig cfg;
  std::string text;
};

struct rz_gridworld {
  rezero::GridWorldSpec spec;
};

namespace {

thread_local std::string g_last_error;

rz_status map_code(rezero::ErrorCode code) {
  switch (code) {
    case rezero::ErrorCode::kInvalidState: return RZ_ERR_INVALID_STATE;
    case rezero::ErrorCode::kInvalidAction: return RZ_ERR_INVALID_ACTION;
    case rezero::ErrorCode::kContractViolation: return RZ_ERR_CONTRACT;
    case rezero::ErrorCode::kPrecondition: return RZ_ERR_PRECONDITION;
    case rezero::ErrorCode::kDomain: return RZ_ERR_DOMAIN;
    case rezero::ErrorCode::kStaleTargets: return RZ_ERR_STALE_TARGETS;
    case rezero::ErrorCode::kConfig: return RZ_ERR_CONFIG;
    case rezero::ErrorCode::kIo: return RZ_ERR_IO;
  }
  return RZ_ERR_INTERNAL;
}

rz_status fail_with(rz_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs body, translating exceptions into status codes at the boundary.
template <typename F>
rz_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return RZ_OK;
  } catch (const rezero::Error& e) {
    return fail_with(map_code(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail_with(RZ_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail_with(RZ_ERR_INTERNAL, "unknown exception");
  }
}

// Null-pointer checks report RZ_ERR_INVALID_ARGUMENT rather than a precondition failure.
#define RZ_NEED(p)                                                            \
  do {                                                                        \
    if (!(p)) return fail_with(RZ_ERR_INVALID_ARGUMENT, #p " must not be null"); \
  } while (0)

rezero::Cell checked(const rezero::GridWorldSpec& spec, int row, int col) {
  const rezero::Cell c{row, col};
  if (!spec.is_open(c)) fail(rezero::ErrorCode::kInvalidState, "cell is outside the grid or a wall");
  return c;
}

void emit_lines(const std::string& text, rz_log_fn fn, void* user) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) fn(line.c_str(), user);
}

}  // namespace

extern "C" {

const char* rz_version(void) { return rezero::kVersion; }

const char* rz_last_error(void) { return g_last_error.c_str(); }

const char* rz_status_name(rz_status status) {
  switch (status) {
    case RZ_OK: return "ok";
    case RZ_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RZ_ERR_INVALID_STATE: return "invalid_state";
    case RZ_ERR_INVALID_ACTION: return "invalid_action";
    case RZ_ERR_CONTRACT: return "contract_violation";
    case RZ_ERR_PRECONDITION: return "precondition";
    case RZ_ERR_DOMAIN: return "domain";
    case RZ_ERR_STALE_TARGETS: return "stale_targets";
    case RZ_ERR_CONFIG: return "config";
    case RZ_ERR_IO: return "io";
    case RZ_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

rz_status rz_config_default(rz_config** out) {
  RZ_NEED(out);
  return guarded([&] { *out = new rz_config{}; });
}

rz_status rz_config_from_json(const char* json_text, rz_config** out) {
  RZ_NEED(json_text);
  RZ_NEED(out);
  return guarded([&] {
    rezero::RunConfig cfg = rezero::parse_config(json_text);
    *out = new rz_config{std::move(cfg), json_text};
  });
}

rz_status rz_config_from_file(const char* path, rz_config** out) {
  RZ_NEED(path);
  RZ_NEED(out);
  return guarded([&] {
    std::ifstream in(path);
    if (!in) fail(rezero::ErrorCode::kIo, std::string("cannot open config ") + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    rezero::RunConfig cfg = rezero::parse_config(text);
    *out = new rz_config{std::move(cfg), std::move(text)};
  });
}

rz_status rz_config_set_seed(rz_config* config, uint64_t seed) {
  RZ_NEED(config);
  config->cfg.seed = seed;
  g_last_error.clear();
  return RZ_OK;
}

rz_status rz_config_get_seed(const rz_config* config, uint64_t* seed) {
  RZ_NEED(config);
  RZ_NEED(seed);
  *seed = config->cfg.seed;
  g_last_error.clear();
  return RZ_OK;
}

void rz_config_destroy(rz_config* config) { delete config; }

rz_status rz_run_command(const rz_config* config, const char* command, const char* mode, const char* out_dir,
                         rz_log_fn log, void* user) {
  RZ_NEED(config);
  RZ_NEED(command);
  RZ_NEED(out_dir);
  return guarded([&] {
    rezero::CommandContext ctx;
    ctx.config_text = config->text;
    ctx.out_dir = out_dir;
    if (mode) ctx.mode = mode;
    std::ostringstream summary;
    ctx.log = &summary;
    rezero::run_command(command, config->cfg, ctx);
    if (log) emit_lines(summary.str(), log, user);
  });
}

rz_status rz_gridworld_preset(const char* name, rz_gridworld** out) {
  RZ_NEED(name);
  RZ_NEED(out);
  return guarded([&] { *out = new rz_gridworld{rezero::GridWorldSpec::preset(name)}; });
}

rz_status rz_gridworld_create(int width, int height, int start_row, int start_col, int goal_row, int goal_col,
                              const int* walls, size_t num_walls, rz_gridworld** out) {
  RZ_NEED(out);
  if (num_walls > 0) RZ_NEED(walls);
  return guarded([&] {
    rezero::GridWorldSpec spec;
    spec.width = width;
    spec.height = height;
    spec.start = {start_row, start_col};
    spec.goal = {goal_row, goal_col};
    for (size_t i = 0; i < num_walls; ++i) spec.walls.insert(rezero::Cell{walls[2 * i], walls[2 * i + 1]});
    spec.validate();
    *out = new rz_gridworld{std::move(spec)};
  });
}

void rz_gridworld_destroy(rz_gridworld* grid) { delete grid; }

rz_status rz_gridworld_legal_actions(const rz_gridworld* grid, int row, int col, int* actions, size_t capacity,
                                     size_t* count) {
  RZ_NEED(grid);
  RZ_NEED(count);
  if (capacity > 0) RZ_NEED(actions);
  std::vector<rezero::ActionId> legal;
  const rz_status s = guarded([&] { legal = rezero::gw_legal_actions(grid->spec, checked(grid->spec, row, col)); });
  if (s != RZ_OK) return s;
  *count = legal.size();
  if (capacity < legal.size()) return fail_with(RZ_ERR_INVALID_ARGUMENT, "actions buffer too small");
  for (size_t i = 0; i < legal.size(); ++i) actions[i] = legal[i].index;
  return RZ_OK;
}

rz_status rz_gridworld_step(const rz_gridworld* grid, int row, int col, int action, int* next_row, int* next_col,
                            double* reward, int* terminal) {
  RZ_NEED(grid);
  RZ_NEED(next_row);
  RZ_NEED(next_col);
  return guarded([&] {
    const rezero::TransitionResult t =
        rezero::gw_step(grid->spec, checked(grid->spec, row, col), rezero::ActionId{action});
    const rezero::Cell next = grid->spec.cell(t.next_state);
    *next_row = next.row;
    *next_col = next.col;
    if (reward) *reward = t.reward;
    if (terminal) *terminal = t.terminal ? 1 : 0;
  });
}

rz_status rz_gridworld_shortest_path(const rz_gridworld* grid, int row, int col, int* distance) {
  RZ_NEED(grid);
  RZ_NEED(distance);
  return guarded([&] {
    const std::optional<int> d = rezero::shortest_path_oracle(grid->spec, checked(grid->spec, row, col));
    *distance = d ? *d : -1;
  });
}

void rz_search_params_default(rz_search_params* params) {
  if (!params) return;
  const rezero::SearchConfig d;
  *params = rz_search_params{};
  params->num_simulations = d.num_simulations;
  params->c_puct = d.c_puct;
  params->gamma = d.gamma;
  params->root_noise = d.root_noise_enabled ? 1 : 0;
  params->seed = 0;
  params->predictor = RZ_PREDICTOR_ORACLE;
  params->use_reuse = 0;
  params->reused_action = 0;
  params->reused_value = 0.0;
  params->reused_reward = 0.0;
}

rz_status rz_search(const rz_gridworld* grid, int row, int col, const rz_search_params* params,
                    rz_search_output* out) {
  RZ_NEED(grid);
  RZ_NEED(params);
  RZ_NEED(out);
  return guarded([&] {
    const rezero::Cell root = checked(grid->spec, row, col);
    rezero::SearchConfig cfg;
    cfg.num_simulations = params->num_simulations;
    cfg.c_puct = params->c_puct;
    cfg.gamma = params->gamma;
    cfg.root_noise_enabled = params->root_noise != 0;
    cfg.rng_seed = params->seed;
    cfg.validate();
    rezero::PredictorKind kind = rezero::PredictorKind::kOracle;
    switch (params->predictor) {
      case RZ_PREDICTOR_ORACLE: kind = rezero::PredictorKind::kOracle; break;
      case RZ_PREDICTOR_ROLLOUT: kind = rezero::PredictorKind::kRollout; break;
      case RZ_PREDICTOR_UNIFORM: kind = rezero::PredictorKind::kUniformZero; break;
      default: fail(rezero::ErrorCode::kConfig, "unknown predictor");
    }
    rezero::GridWorldModel model(grid->spec, rezero::make_predictor(kind, cfg.gamma));
    rezero::MetricsLedger ledger;
    rezero::Evaluator evaluator(model, ledger);
    rezero::SearchResult r;
    if (params->use_reuse) {
      rezero::RootReuseContext ctx{rezero::ActionId{params->reused_action}, params->reused_value,
                                   params->reused_reward, rezero::RewardSource::kStored};
      r = rezero::reuse_mcts(grid->spec.handle(root), ctx, evaluator, cfg);
    } else {
      r = rezero::run_mcts(grid->spec.handle(root), evaluator, cfg);
    }
    *out = rz_search_output{};
    out->num_actions = r.actions.size();
    for (size_t i = 0; i < r.actions.size() && i < 4; ++i) {
      out->actions[i] = r.actions[i].index;
      out->visits[i] = r.child_visits[i];
    }
    out->root_value = r.root_value;
    const rezero::MetricsSnapshot snap = ledger.snapshot();
    out->simulations = snap.simulations;
    out->dynamics_calls = snap.dynamics_calls;
    out->early_terminations = snap.early_terminations;
  });
}

}  // extern "C"
