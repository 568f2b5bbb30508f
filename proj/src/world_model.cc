#include "rezero/world_model.h"

#include <cmath>

#include "rezero/errors.h"

namespace rezero {

void Prediction::validate() const {
  require(!actions.empty(), ErrorCode::kContractViolation, "prediction has no legal actions");
  require(actions.size() == prior.size(), ErrorCode::kContractViolation,
          "prediction prior length differs from legal action count");
  double total = 0.0;
  for (double p : prior) {
    require(std::isfinite(p) && p >= 0.0, ErrorCode::kContractViolation, "prior entry is negative or not finite");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::kContractViolation, "prior does not sum to 1");
  require(std::isfinite(value), ErrorCode::kContractViolation, "prediction value is not finite");
}

void SyntheticLatency::validate() const {
  require(per_call_overhead_alpha >= 0.0 && per_item_cost_beta >= 0.0, ErrorCode::kConfig,
          "synthetic latency alpha and beta must be non-negative");
}

Evaluator::Evaluator(const WorldModel& model, MetricsLedger& ledger, SyntheticLatency latency)
    : model_(model), ledger_(ledger), latency_(latency) {
  latency_.validate();
}

std::vector<EvalResult> Evaluator::batched_evaluate(std::span<const EvalQuery> queries) {
  require(!queries.empty(), ErrorCode::kPrecondition, "batched_evaluate needs a non-empty batch");
  std::vector<EvalResult> results(queries.size());
  std::uint64_t dynamics = 0;
  std::uint64_t predictions = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const EvalQuery& q = queries[i];
    EvalResult& out = results[i];
    if (q.action) {
      out.transition = model_.dynamics(q.state, *q.action);
      ++dynamics;
      if (q.predict_successor && !out.transition->terminal) {
        out.prediction = model_.predict(out.transition->next_state, q.eval_seed);
        ++predictions;
      }
    } else {
      out.prediction = model_.predict(q.state, q.eval_seed);
      ++predictions;
    }
  }
  ledger_.add_batch_call(queries.size());
  ledger_.add_dynamics_calls(dynamics);
  ledger_.add_prediction_calls(predictions);
  ledger_.add_virtual_time_ms(latency_.cost_ms(queries.size()));
  return results;
}

}  // namespace rezero
