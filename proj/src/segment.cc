#include "rezero/segment.h"

#include "rezero/errors.h"

namespace rezero {

void GameSegment::validate() const {
  require(!states.empty(), ErrorCode::kContractViolation, "segment has no states");
  require(actions.size() == rewards.size(), ErrorCode::kContractViolation, "actions and rewards differ in length");
  const std::size_t expected = actions.size() + (ends_terminal ? 0 : 1);
  require(states.size() == expected, ErrorCode::kContractViolation, "segment state count breaks the length convention");
  if (!stored_root_values.empty()) {
    require(stored_root_values.size() == states.size(), ErrorCode::kContractViolation,
            "root values do not align with states");
  }
  if (!policy_targets.empty()) {
    require(policy_targets.size() == states.size(), ErrorCode::kContractViolation,
            "policy targets do not align with states");
  }
}

}  // namespace rezero
