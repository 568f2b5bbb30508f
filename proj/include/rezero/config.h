#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rezero/bandit.h"
#include "rezero/gridworld.h"
#include "rezero/mcts.h"
#include "rezero/pipeline.h"
#include "rezero/toycase.h"
#include "rezero/world_model.h"

namespace rezero {

enum class PredictorKind { kOracle, kRollout, kUniformZero };
PredictorKind parse_predictor_kind(const std::string& name);
const char* predictor_kind_name(PredictorKind k);
GridPredictor make_predictor(PredictorKind kind, double gamma);

struct ReuseStatsOptions {
  int segments = 100;
  int segment_length = 20;
  int max_episode_steps = 200;
  PredictorKind predictor = PredictorKind::kOracle;
};

struct BatchBenchOptions {
  std::vector<int> batch_sizes{1, 4, 16, 64, 256};
  int roots = 256;
  PredictorKind predictor = PredictorKind::kOracle;
};

struct BanditOptions {
  BanditSpec spec = reference_bandit_spec();
  BanditSweep sweep;
  bool calibrate = true;
  std::vector<double> candidates;  // C ladder tried by the drift audit, ascending
  std::vector<int> audit_sample_counts{1, 2, 4, 8, 16, 32, 64, 128};
  std::vector<double> audit_epsilons{0.02, 0.05, 0.1, 0.2};
  int audit_seeds = 100000;

  static std::vector<double> default_candidates();
};

/// Everything a bench command can be configured with. Each JSON section is
/// optional; absent fields keep their defaults, unknown fields are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  GridWorldSpec grid = GridWorldSpec::walled_7x7();
  SearchConfig search;
  SyntheticLatency latency{5.0, 0.1, true};
  TrainConfig train;
  BanditOptions bandit;
  UctOptions toycase;
  ReuseStatsOptions reuse_stats;
  BatchBenchOptions batch_bench;
};

// Parses a UTF-8 JSON document; throws kConfig on malformed input or unknown keys.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Gridworld section alone: {"width":7,"height":7,"start":[0,0],"goal":[6,6],"walls":[[2,2],...]} or {"preset":"walled7x7"}.
GridWorldSpec parse_gridworld(const std::string& json_text);

// 64-bit FNV-1a of the text, lowercase hex.
std::string fnv1a_hex(const std::string& text);

}  // namespace rezero
