#include "rezero/metrics.h"

namespace rezero {

MetricsSnapshot MetricsSnapshot::operator-(const MetricsSnapshot& start) const {
  MetricsSnapshot d;
  d.dynamics_calls = dynamics_calls - start.dynamics_calls;
  d.prediction_calls = prediction_calls - start.prediction_calls;
  d.batch_calls = batch_calls - start.batch_calls;
  d.item_evaluations = item_evaluations - start.item_evaluations;
  d.simulations = simulations - start.simulations;
  d.expansions = expansions - start.expansions;
  d.early_terminations = early_terminations - start.early_terminations;
  d.searches = searches - start.searches;
  d.data_process_ops = data_process_ops - start.data_process_ops;
  d.virtual_time_ms = virtual_time_ms - start.virtual_time_ms;
  d.wall_time_ms = wall_time_ms - start.wall_time_ms;
  return d;
}

void MetricsLedger::add_virtual_time_ms(double ms) {
  if (ms > 0.0) virtual_time_ms_.fetch_add(ms, std::memory_order_relaxed);
}

void MetricsLedger::add_wall_time_ms(double ms) {
  if (ms > 0.0) wall_time_ms_.fetch_add(ms, std::memory_order_relaxed);
}

MetricsSnapshot MetricsLedger::snapshot() const {
  MetricsSnapshot s;
  s.dynamics_calls = dynamics_calls_.load(std::memory_order_relaxed);
  s.prediction_calls = prediction_calls_.load(std::memory_order_relaxed);
  s.batch_calls = batch_calls_.load(std::memory_order_relaxed);
  s.item_evaluations = item_evaluations_.load(std::memory_order_relaxed);
  s.simulations = simulations_.load(std::memory_order_relaxed);
  s.expansions = expansions_.load(std::memory_order_relaxed);
  s.early_terminations = early_terminations_.load(std::memory_order_relaxed);
  s.searches = searches_.load(std::memory_order_relaxed);
  s.data_process_ops = data_process_ops_.load(std::memory_order_relaxed);
  s.virtual_time_ms = virtual_time_ms_.load(std::memory_order_relaxed);
  s.wall_time_ms = wall_time_ms_.load(std::memory_order_relaxed);
  return s;
}

ScopedWallTimer::~ScopedWallTimer() {
  const auto elapsed = std::chrono::steady_clock::now() - start_;
  ledger_.add_wall_time_ms(std::chrono::duration<double, std::milli>(elapsed).count());
}

}  // namespace rezero
