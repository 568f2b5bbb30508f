#include "rezero/gridworld.h"

#include <cmath>
#include <deque>
#include <map>

#include "rezero/errors.h"

namespace rezero {
namespace {

constexpr std::array<Cell, kGridActionCount> kMoveDelta = {
    Cell{1, 0},   // down
    Cell{-1, 0},  // up
    Cell{0, -1},  // left
    Cell{0, 1},   // right
};

void require_valid_state(const GridWorldSpec& spec, Cell s) {
  require(spec.in_bounds(s), ErrorCode::kInvalidState, "state is out of bounds");
  require(!spec.is_wall(s), ErrorCode::kInvalidState, "state is a wall");
}

}  // namespace

const char* grid_action_name(ActionId a) {
  static constexpr const char* kNames[] = {"down", "up", "left", "right"};
  if (a.index < 0 || a.index >= kGridActionCount) return "?";
  return kNames[a.index];
}

void GridWorldSpec::validate() const {
  require(width > 0 && height > 0, ErrorCode::kConfig, "gridworld width and height must be positive");
  require(in_bounds(start) && in_bounds(goal), ErrorCode::kConfig, "start and goal must lie inside the grid");
  require(start != goal, ErrorCode::kConfig, "start must differ from goal");
  for (const Cell& w : walls) require(in_bounds(w), ErrorCode::kConfig, "wall outside the grid");
  require(!is_wall(start), ErrorCode::kConfig, "start is a wall");
  require(!is_wall(goal), ErrorCode::kConfig, "goal is a wall");
}

GridWorldSpec GridWorldSpec::open_4x4() {
  return GridWorldSpec{4, 4, Cell{0, 0}, Cell{0, 3}, {}};
}

GridWorldSpec GridWorldSpec::walled_7x7() {
  // (3, 2) appears twice in the original wall list; the set keeps one copy.
  const Cell listed[] = {{2, 2}, {2, 3}, {1, 1}, {3, 2}, {3, 4}, {3, 2}, {0, 5}, {4, 4}, {6, 3}, {5, 3}};
  GridWorldSpec spec{7, 7, Cell{0, 0}, Cell{6, 6}, {}};
  spec.walls.insert(std::begin(listed), std::end(listed));
  return spec;
}

GridWorldSpec GridWorldSpec::preset(const std::string& name) {
  if (name == "open4x4") return open_4x4();
  if (name == "walled7x7") return walled_7x7();
  fail(ErrorCode::kConfig, "unknown gridworld preset '" + name + "'");
}

std::vector<ActionId> gw_legal_actions(const GridWorldSpec& spec, Cell s) {
  require_valid_state(spec, s);
  std::vector<ActionId> out;
  for (int a = 0; a < kGridActionCount; ++a) {
    const Cell next{s.row + kMoveDelta[a].row, s.col + kMoveDelta[a].col};
    if (spec.is_open(next)) out.push_back(ActionId{a});
  }
  return out;
}

TransitionResult gw_step(const GridWorldSpec& spec, Cell s, ActionId a) {
  require(a.index >= 0 && a.index < kGridActionCount, ErrorCode::kInvalidAction, "unknown gridworld action");
  require_valid_state(spec, s);
  Cell next{s.row + kMoveDelta[a.index].row, s.col + kMoveDelta[a.index].col};
  if (!spec.is_open(next)) next = s;
  const bool at_goal = next == spec.goal;
  return TransitionResult{spec.handle(next), at_goal ? 1.0 : 0.0, at_goal};
}

std::optional<int> shortest_path_oracle(const GridWorldSpec& spec, Cell s) {
  require_valid_state(spec, s);
  std::map<Cell, int> dist{{s, 0}};
  std::deque<Cell> frontier{s};
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    if (c == spec.goal) return dist[c];
    for (const Cell& d : kMoveDelta) {
      const Cell n{c.row + d.row, c.col + d.col};
      if (spec.is_open(n) && dist.emplace(n, dist[c] + 1).second) frontier.push_back(n);
    }
  }
  return std::nullopt;
}

Prediction uniform_prediction(const GridWorldSpec& spec, Cell s, double value) {
  Prediction p;
  p.actions = gw_legal_actions(spec, s);
  p.prior.assign(p.actions.size(), p.actions.empty() ? 0.0 : 1.0 / static_cast<double>(p.actions.size()));
  p.value = value;
  return p;
}

RolloutOutcome rollout_predict(const GridWorldSpec& spec, Cell s, Rng& rng, const RolloutOptions& options) {
  require_valid_state(spec, s);
  require(s != spec.goal, ErrorCode::kPrecondition, "rollout_predict needs a non-terminal state");
  RolloutOutcome out;
  out.prediction = uniform_prediction(spec, s, 0.0);

  Cell pos = s;
  double reward = 0.0;
  int steps = 0;
  while (pos != spec.goal) {
    if (steps >= options.step_cap) {
      out.truncated = true;
      out.steps = steps;
      return out;
    }
    const std::vector<ActionId> legal = gw_legal_actions(spec, pos);
    if (legal.empty()) {
      out.truncated = true;
      out.steps = steps;
      return out;
    }
    std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
    const TransitionResult tr = gw_step(spec, pos, legal[pick(rng)]);
    pos = spec.cell(tr.next_state);
    reward = tr.reward;
    ++steps;
  }
  out.steps = steps;
  if (options.mode == RolloutMode::kAppendixFidelity) {
    // The count starts at 1 and is bumped once per step, terminal step included.
    out.prediction.value = reward / static_cast<double>(steps + 1);
  } else {
    out.prediction.value = reward * std::pow(options.gamma, steps - 1);
  }
  return out;
}

GridPredictor make_rollout_predictor(RolloutOptions options) {
  return [options](const GridWorldSpec& spec, Cell s, std::uint64_t seed) {
    Rng rng(seed);
    return rollout_predict(spec, s, rng, options).prediction;
  };
}

GridPredictor make_oracle_predictor(double gamma) {
  return [gamma](const GridWorldSpec& spec, Cell s, std::uint64_t) {
    const std::optional<int> d = shortest_path_oracle(spec, s);
    const double value = (d && *d > 0) ? std::pow(gamma, *d - 1) : 0.0;
    return uniform_prediction(spec, s, value);
  };
}

GridPredictor make_uniform_zero_predictor() {
  return [](const GridWorldSpec& spec, Cell s, std::uint64_t) { return uniform_prediction(spec, s, 0.0); };
}

GridWorldModel::GridWorldModel(GridWorldSpec spec, GridPredictor predictor)
    : spec_(std::move(spec)), predictor_(std::move(predictor)) {
  spec_.validate();
  require(static_cast<bool>(predictor_), ErrorCode::kConfig, "gridworld model needs a predictor");
}

Cell GridWorldModel::checked_cell(StateHandle s) const {
  require(s.id >= 0 && s.id < static_cast<std::int64_t>(spec_.width) * spec_.height, ErrorCode::kInvalidState,
          "state handle outside the grid");
  return spec_.cell(s);
}

std::vector<ActionId> GridWorldModel::legal_actions(StateHandle s) const {
  return gw_legal_actions(spec_, checked_cell(s));
}

bool GridWorldModel::is_terminal(StateHandle s) const { return checked_cell(s) == spec_.goal; }

TransitionResult GridWorldModel::dynamics(StateHandle s, ActionId a) const {
  return gw_step(spec_, checked_cell(s), a);
}

Prediction GridWorldModel::predict(StateHandle s, std::uint64_t eval_seed) const {
  Prediction p = predictor_(spec_, checked_cell(s), eval_seed);
  p.validate();
  return p;
}

}  // namespace rezero
