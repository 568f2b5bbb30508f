#pragma once

#include <cstdint>
#include <vector>

#include "rezero/world_model.h"

namespace rezero {

/// A slice of one trajectory. `states` carries one extra entry (the state
/// the next segment starts from) unless the slice ends on a terminal
/// transition, whose absorbing successor is never stored. Reanalyze fills
/// the per-state targets.
struct GameSegment {
  std::vector<StateHandle> states;
  std::vector<ActionId> actions;
  std::vector<double> rewards;
  bool ends_terminal = false;
  bool truncated = false;

  std::vector<double> stored_root_values;           // per state
  std::vector<std::vector<double>> policy_targets;  // per state, over legal actions
  std::vector<double> value_targets;                // per transition

  std::int64_t episode_id = 0;
  std::int64_t start_step = 0;
  std::int64_t insert_epoch = 0;
  std::int64_t targets_epoch = -1;  // epoch whose reanalyze produced the targets; -1 = none

  std::size_t num_transitions() const { return actions.size(); }
  std::size_t num_roots() const { return states.size(); }
  bool has_targets() const { return targets_epoch >= 0; }

  // Throws kContractViolation when the length convention is broken.
  void validate() const;
};

}  // namespace rezero
