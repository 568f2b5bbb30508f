#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "rezero/gridworld.h"
#include "rezero/mcts.h"
#include "rezero/metrics.h"
#include "rezero/rng.h"
#include "rezero/segment.h"

namespace rezero {

/// Oldest-first FIFO of game segments, bounded by the number of stored transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::int64_t capacity_transitions);

  // Appends and evicts from the front until the transition count fits. A
  // segment longer than the whole capacity is rejected.
  void push(GameSegment segment);

  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  std::int64_t transitions() const { return transitions_; }
  std::int64_t capacity() const { return capacity_; }
  std::int64_t evicted_segments() const { return evicted_; }
  std::int64_t total_env_steps() const { return total_env_steps_; }
  void add_env_steps(std::int64_t n) { total_env_steps_ += n; }

  GameSegment& operator[](std::size_t i) { return segments_[i]; }
  const GameSegment& operator[](std::size_t i) const { return segments_[i]; }
  const std::deque<GameSegment>& segments() const { return segments_; }

 private:
  std::deque<GameSegment> segments_;
  std::int64_t capacity_;
  std::int64_t transitions_ = 0;
  std::int64_t evicted_ = 0;
  std::int64_t total_env_steps_ = 0;
};

/// Tabular stand-in for the policy/value network. Unseen states read as a
/// uniform policy and value 0.
class TabularLearner {
 public:
  TabularLearner(const GridWorldSpec& spec, double policy_step_size, double value_step_size);

  std::vector<double> policy(StateHandle s) const;
  double value(StateHandle s) const;
  bool seen(StateHandle s) const { return policy_table_.count(s.id) != 0; }

  void update_policy(StateHandle s, const std::vector<double>& target);
  void update_value(StateHandle s, double target);

  double policy_step_size() const { return policy_step_size_; }
  double value_step_size() const { return value_step_size_; }
  const GridWorldSpec& spec() const { return spec_; }

 private:
  GridWorldSpec spec_;
  double policy_step_size_;
  double value_step_size_;
  std::map<std::int64_t, std::vector<double>> policy_table_;
  std::map<std::int64_t, double> value_table_;
};

// Predictor reading the learner's current tables (the learner must outlive it).
GridPredictor make_learner_predictor(const TabularLearner& learner);

struct TrainConfig {
  double replay_ratio = 0.25;
  double reanalyze_frequency = 1.0;
  int td_steps = 5;
  int segment_length = 20;
  int minibatch_size = 256;
  int reanalyze_batch_size = 2000;
  int epochs = 100;
  int collect_steps_per_epoch = 20;
  int max_episode_steps = 100;
  double temperature = 1.0;
  double policy_step_size = 0.5;
  double value_step_size = 0.1;
  std::int64_t buffer_capacity = 1000000;
  int eval_episodes = 5;
  int eval_max_steps = 50;
  std::uint64_t seed = 0;
  SearchConfig search = default_search();
  SyntheticLatency latency;

  static SearchConfig default_search();
  void validate() const;
};

enum class TrainMode { kRezero, kBaseline };
const char* train_mode_name(TrainMode m);

struct CollectResult {
  std::vector<GameSegment> segments;
  int steps = 0;
  bool reached_goal = false;
  bool truncated = false;
};

/// Samples actions from the learner policy (no search) for at most
/// max_steps steps and slices the episode into segments.
CollectResult collect_episode(const GridWorldSpec& spec, const TabularLearner& learner, Rng& rng, int max_steps,
                              int segment_length, std::int64_t episode_id = 0);

// Visit counts raised to 1/temperature and normalized; temperature 0 is one-hot argmax.
std::vector<double> visit_policy_target(const std::vector<int>& visits, double temperature);

/// n-step bootstrapped target from the segment's stored root values:
/// sum_{k<td} gamma^k r_{t+k} + gamma^td * m_{t+td}, truncated at the end
/// of the segment. A segment ending on a terminal transition is never
/// bootstrapped past its last reward. Throws kStaleTargets when the needed
/// root value is missing.
double compute_value_target(const GameSegment& segment, std::size_t t, int td_steps, double gamma);

// Same shape, but bootstrapping from an arbitrary per-state value source.
double n_step_target(const GameSegment& segment, std::size_t t, int td_steps, double gamma,
                     const std::vector<double>& bootstrap_values);

struct ReanalyzeStats {
  std::size_t chunks = 0;
  std::size_t segments = 0;
  std::size_t transitions = 0;
};

/// Refreshes every segment in chunks of at most reanalyze_batch_size
/// segments through the column-wise backward reanalyze. Writes policy
/// targets, stored root values and value targets in place.
ReanalyzeStats reanalyze_entire_buffer(ReplayBuffer& buffer, Evaluator& evaluator, const TrainConfig& cfg,
                                       std::int64_t epoch, std::uint64_t pass_seed);

struct TrainSample {
  StateHandle state;
  const std::vector<double>* policy_target = nullptr;
  double value_target = 0.0;
};

struct TrainLoss {
  double policy_cross_entropy = 0.0;
  double value_squared_error = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Moves the tables toward each sample's targets. Samples without targets are skipped and counted.
TrainLoss train_step(TabularLearner& learner, std::span<const TrainSample> minibatch);

/// Number of entire-buffer passes scheduled inside epoch e (1-based):
/// floor(e f) - floor((e - 1) f).
int passes_in_epoch(double f, int epoch);

// Train-step indices (0-based) before which those passes run, evenly spaced.
std::vector<int> pass_positions(int passes, int n_train);

struct EpochRecord {
  int epoch = 0;
  std::int64_t env_steps = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  std::uint64_t cum_simulations = 0;
  std::uint64_t cum_dynamics_calls = 0;
  int cum_reanalyze_passes = 0;
  double virtual_time_ms = 0.0;
  double wall_time_ms = 0.0;
  std::int64_t cum_train_steps = 0;
  std::int64_t cum_skipped_samples = 0;
  std::int64_t stale_samples = 0;  // samples whose targets predate their insertion
};

struct TrainingReport {
  TrainMode mode = TrainMode::kRezero;
  double reanalyze_frequency = 0.0;
  std::vector<EpochRecord> epochs;
  MetricsSnapshot totals;

  // First epoch whose evaluation mean reaches the threshold.
  std::optional<EpochRecord> first_reaching(double threshold) const;
  void write_csv(std::ostream& os) const;
};

// Greedy (argmax, random tie-break) episodes from the start cell; returns undiscounted returns.
std::vector<double> evaluate_greedy(const GridWorldSpec& spec, const TabularLearner& learner, int episodes,
                                    int max_steps, Rng& rng);

// learner_out, when given, receives the final tables.
TrainingReport run_training(const GridWorldSpec& spec, const TrainConfig& cfg, TrainMode mode,
                            TabularLearner* learner_out = nullptr);

}  // namespace rezero
