#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rezero/metrics.h"

namespace rezero {

/// Opaque environment state identifier. Gridworlds encode row * width + col.
struct StateHandle {
  std::int64_t id = 0;
  auto operator<=>(const StateHandle&) const = default;
};

struct ActionId {
  int index = 0;
  auto operator<=>(const ActionId&) const = default;
};

struct TransitionResult {
  StateHandle next_state;
  double reward = 0.0;
  bool terminal = false;
};

/// Policy prior over the legal actions of a state plus a scalar value.
/// `actions` and `prior` are positionally aligned.
struct Prediction {
  std::vector<ActionId> actions;
  std::vector<double> prior;
  double value = 0.0;

  // Throws kContractViolation unless prior is a probability vector matching actions.
  void validate() const;
};

/// The three model components of a MuZero-style planner. Representation is
/// the identity by default; dynamics and prediction are environment supplied.
/// Implementations must be deterministic given (state, action, eval_seed).
class WorldModel {
 public:
  virtual ~WorldModel() = default;

  virtual StateHandle represent(StateHandle observation) const { return observation; }
  virtual std::vector<ActionId> legal_actions(StateHandle s) const = 0;
  virtual bool is_terminal(StateHandle s) const = 0;
  virtual TransitionResult dynamics(StateHandle s, ActionId a) const = 0;
  virtual Prediction predict(StateHandle s, std::uint64_t eval_seed) const = 0;
};

/// Linear cost model for one batched inference call: alpha + beta * items.
/// Charged to a virtual clock, never slept.
struct SyntheticLatency {
  double per_call_overhead_alpha = 0.0;
  double per_item_cost_beta = 0.0;
  bool enabled = false;

  void validate() const;
  double cost_ms(std::size_t items) const {
    return enabled ? per_call_overhead_alpha + per_item_cost_beta * static_cast<double>(items) : 0.0;
  }
};

/// One item of a batched evaluation. Without an action this is a plain
/// prediction of `state`; with an action it is a recurrent step: dynamics
/// from `state`, then (if requested and non-terminal) a prediction of the
/// successor.
struct EvalQuery {
  StateHandle state;
  std::optional<ActionId> action;
  std::uint64_t eval_seed = 0;
  bool predict_successor = true;
};

struct EvalResult {
  std::optional<TransitionResult> transition;
  std::optional<Prediction> prediction;
};

/// Metered front-end to a WorldModel. Every batched_evaluate call counts as
/// exactly one batch call of `queries.size()` items on the ledger.
class Evaluator {
 public:
  Evaluator(const WorldModel& model, MetricsLedger& ledger, SyntheticLatency latency = {});

  std::vector<EvalResult> batched_evaluate(std::span<const EvalQuery> queries);

  const WorldModel& model() const { return model_; }
  MetricsLedger& ledger() { return ledger_; }
  const SyntheticLatency& latency() const { return latency_; }

 private:
  const WorldModel& model_;
  MetricsLedger& ledger_;
  SyntheticLatency latency_;
};

}  // namespace rezero
