#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rezero/gridworld.h"
#include "rezero/rng.h"

namespace rezero {

/// Plain UCT of the maze toy case: full rollouts for leaf values, one node
/// expansion per iteration, and a backup that weights the k-th ancestor's
/// share of a rollout result by gamma^(k+1). The root value is the raw
/// weighted sum, not a mean.
struct UctOptions {
  int iterations = 100;
  double exploration_weight = 1.0;
  double gamma = 0.9;
  int rollout_step_cap = 100000;
};

struct UctOutcome {
  Cell best_child;          // child with the highest mean value
  double root_value = 0.0;  // raw weighted value sum of the root
  int iterations = 0;
  int expansions = 0;
  int reuse_stops = 0;  // iterations ended at a node on the reused position
  std::int64_t rollout_steps = 0;
  double wall_ms = 0.0;
};

UctOutcome uct_search(const GridWorldSpec& spec, Cell root, const UctOptions& options, Rng& rng);

/// Same search, except that descending into any node whose position equals
/// `reuse_position` stops the iteration and backs up `reuse_value` instead
/// of a rollout.
UctOutcome uct_reuse_search(const GridWorldSpec& spec, Cell root, double reuse_value, Cell reuse_position,
                            const UctOptions& options, Rng& rng);

struct ToycaseCell {
  Cell cell;
  bool reachable = true;
  UctOutcome plain;
  UctOutcome reuse;
  Cell reuse_position;
  double reuse_value = 0.0;
};

struct ToycaseReport {
  std::vector<ToycaseCell> cells;  // every non-wall, non-goal cell in row-major order
  double mean_plain_expansions = 0.0;
  double mean_reuse_expansions = 0.0;
  double expansion_reduction = 0.0;     // 1 - reuse / plain, over reachable cells
  double fraction_not_worse = 0.0;      // reachable cells with reuse expansions <= plain
  double mean_plain_wall_ms = 0.0;
  double mean_reuse_wall_ms = 0.0;
};

/// Per-cell plain search, then a reuse search that hands the best child's
/// recorded plain root value (1 when the best child is the goal) to the
/// reuse run. Unreachable cells are flagged and left out of the aggregates.
ToycaseReport run_toycase(const GridWorldSpec& spec, const UctOptions& options, std::uint64_t seed);

// ASCII grid of per-cell expansions ('#' wall, 'G' goal, '?' unreachable).
std::string toycase_heatmap(const GridWorldSpec& spec, const ToycaseReport& report, bool reuse);

}  // namespace rezero
