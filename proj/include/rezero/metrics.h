#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace rezero {

/// Plain-value copy of a MetricsLedger at one instant. Subtracting two
/// snapshots gives the delta attributable to the work in between.
struct MetricsSnapshot {
  std::uint64_t dynamics_calls = 0;
  std::uint64_t prediction_calls = 0;
  std::uint64_t batch_calls = 0;
  std::uint64_t item_evaluations = 0;
  std::uint64_t simulations = 0;
  std::uint64_t expansions = 0;
  std::uint64_t early_terminations = 0;
  std::uint64_t searches = 0;
  // Target-construction operations: one per normalized policy target written
  // and one per value target written.
  std::uint64_t data_process_ops = 0;
  double virtual_time_ms = 0.0;
  double wall_time_ms = 0.0;

  MetricsSnapshot operator-(const MetricsSnapshot& start) const;
};

/// Monotone counters shared by everything that touches one model. All updates
/// are relaxed atomic increments, so disjoint searches may share a ledger.
class MetricsLedger {
 public:
  void add_dynamics_calls(std::uint64_t n) { dynamics_calls_.fetch_add(n, std::memory_order_relaxed); }
  void add_prediction_calls(std::uint64_t n) { prediction_calls_.fetch_add(n, std::memory_order_relaxed); }
  void add_batch_call(std::uint64_t items) {
    batch_calls_.fetch_add(1, std::memory_order_relaxed);
    item_evaluations_.fetch_add(items, std::memory_order_relaxed);
  }
  void add_simulations(std::uint64_t n) { simulations_.fetch_add(n, std::memory_order_relaxed); }
  void add_expansions(std::uint64_t n) { expansions_.fetch_add(n, std::memory_order_relaxed); }
  void add_early_terminations(std::uint64_t n) { early_terminations_.fetch_add(n, std::memory_order_relaxed); }
  void add_searches(std::uint64_t n) { searches_.fetch_add(n, std::memory_order_relaxed); }
  void add_data_process_ops(std::uint64_t n) { data_process_ops_.fetch_add(n, std::memory_order_relaxed); }
  void add_virtual_time_ms(double ms);
  void add_wall_time_ms(double ms);

  MetricsSnapshot snapshot() const;

 private:
  std::atomic<std::uint64_t> dynamics_calls_{0};
  std::atomic<std::uint64_t> prediction_calls_{0};
  std::atomic<std::uint64_t> batch_calls_{0};
  std::atomic<std::uint64_t> item_evaluations_{0};
  std::atomic<std::uint64_t> simulations_{0};
  std::atomic<std::uint64_t> expansions_{0};
  std::atomic<std::uint64_t> early_terminations_{0};
  std::atomic<std::uint64_t> searches_{0};
  std::atomic<std::uint64_t> data_process_ops_{0};
  std::atomic<double> virtual_time_ms_{0.0};
  std::atomic<double> wall_time_ms_{0.0};
};

class ScopedWallTimer {
 public:
  explicit ScopedWallTimer(MetricsLedger& ledger)
      : ledger_(ledger), start_(std::chrono::steady_clock::now()) {}
  ~ScopedWallTimer();
  ScopedWallTimer(const ScopedWallTimer&) = delete;
  ScopedWallTimer& operator=(const ScopedWallTimer&) = delete;

 private:
  MetricsLedger& ledger_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace rezero
