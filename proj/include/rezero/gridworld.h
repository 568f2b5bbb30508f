#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rezero/rng.h"
#include "rezero/world_model.h"

namespace rezero {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

// Fixed action order shared by every gridworld.
enum class GridAction : int { kDown = 0, kUp = 1, kLeft = 2, kRight = 3 };
inline constexpr int kGridActionCount = 4;
const char* grid_action_name(ActionId a);

struct GridWorldSpec {
  int width = 0;
  int height = 0;
  Cell start;
  Cell goal;
  std::set<Cell> walls;

  void validate() const;
  bool in_bounds(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  bool is_wall(Cell c) const { return walls.count(c) != 0; }
  bool is_open(Cell c) const { return in_bounds(c) && !is_wall(c); }
  StateHandle handle(Cell c) const { return StateHandle{static_cast<std::int64_t>(c.row) * width + c.col}; }
  Cell cell(StateHandle s) const {
    return Cell{static_cast<int>(s.id / width), static_cast<int>(s.id % width)};
  }

  // 4x4, no walls, start (0,0), goal (0,3).
  static GridWorldSpec open_4x4();
  // 7x7 maze, start (0,0), goal (6,6), nine walls.
  static GridWorldSpec walled_7x7();
  static GridWorldSpec preset(const std::string& name);
};

// Moves that stay in bounds and do not enter a wall, in action order.
std::vector<ActionId> gw_legal_actions(const GridWorldSpec& spec, Cell s);

// Blocked and boundary moves leave the position unchanged.
TransitionResult gw_step(const GridWorldSpec& spec, Cell s, ActionId a);

// BFS distance to the goal avoiding walls; nullopt when unreachable.
std::optional<int> shortest_path_oracle(const GridWorldSpec& spec, Cell s);

enum class RolloutMode {
  kAppendixFidelity,  // terminal reward / (steps + 1), discount unused
  kLibrary,           // discounted return of the random rollout
};

struct RolloutOptions {
  RolloutMode mode = RolloutMode::kLibrary;
  double gamma = 0.997;
  int step_cap = 10000;
};

struct RolloutOutcome {
  Prediction prediction;
  int steps = 0;
  bool truncated = false;
};

/// Uniform prior over legal moves plus a uniformly random rollout to the goal.
/// Exceeding the step cap yields value 0 and truncated = true.
RolloutOutcome rollout_predict(const GridWorldSpec& spec, Cell s, Rng& rng, const RolloutOptions& options);

/// Prior/value source plugged into a GridWorldModel.
using GridPredictor = std::function<Prediction(const GridWorldSpec&, Cell, std::uint64_t eval_seed)>;

GridPredictor make_rollout_predictor(RolloutOptions options);
// Uniform prior, exact optimal discounted value gamma^(d-1) from BFS distance d.
GridPredictor make_oracle_predictor(double gamma);
GridPredictor make_uniform_zero_predictor();

Prediction uniform_prediction(const GridWorldSpec& spec, Cell s, double value);

class GridWorldModel final : public WorldModel {
 public:
  GridWorldModel(GridWorldSpec spec, GridPredictor predictor);

  std::vector<ActionId> legal_actions(StateHandle s) const override;
  bool is_terminal(StateHandle s) const override;
  TransitionResult dynamics(StateHandle s, ActionId a) const override;
  Prediction predict(StateHandle s, std::uint64_t eval_seed) const override;

  const GridWorldSpec& spec() const { return spec_; }

 private:
  Cell checked_cell(StateHandle s) const;

  GridWorldSpec spec_;
  GridPredictor predictor_;
};

}  // namespace rezero
