#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rezero/bandit.h"
#include "rezero/config.h"
#include "rezero/metrics.h"
#include "rezero/pipeline.h"
#include "rezero/segment.h"
#include "rezero/toycase.h"

namespace rezero {

inline constexpr const char* kVersion = "0.1.0";

/// Reproducibility sidecar written next to every CSV as <csv>.manifest.json.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::string started_at;
  std::string finished_at;
  std::string output;
  std::string notes;
};

std::string utc_timestamp();
void write_manifest(const std::filesystem::path& csv_path, const RunManifest& manifest);

// ---- reuse-stats ----------------------------------------------------------

// Episodes of a uniformly random policy sliced into segments; the first `segments` are kept.
std::vector<GameSegment> random_policy_buffer(const GridWorldSpec& spec, int segments, int segment_length,
                                              int max_episode_steps, std::uint64_t seed);

struct ReuseStatsRow {
  std::string mode;
  MetricsSnapshot delta;
  double avg_search_virtual_ms = 0.0;  // total virtual time / searches
};

struct ReuseStatsResult {
  ReuseStatsRow plain;
  ReuseStatsRow reuse;
  std::size_t segments = 0;
  std::size_t roots = 0;
  double dynamics_ratio = 0.0;  // reuse / plain dynamics calls
};

/// Reanalyzes one random-policy buffer twice with identical seeds: every root
/// searched plainly, then backward with root-value reuse.
ReuseStatsResult run_reuse_stats(const RunConfig& cfg);
void write_reuse_stats_csv(std::ostream& os, const ReuseStatsResult& r);

// ---- batch-bench ----------------------------------------------------------

struct BatchBenchRow {
  int batch_size = 0;
  std::uint64_t batch_calls = 0;
  double virtual_ms = 0.0;
  double virtual_ms_per_root = 0.0;
  double wall_ms_per_root = 0.0;
};

struct BatchBenchResult {
  std::vector<BatchBenchRow> rows;
  bool strictly_decreasing = false;
  bool identical_results = false;  // every batch size produced the same visit counts
};

/// Searches the same root set at each batch size (root i always uses the
/// seed derive_seed(seed, i)) and reports virtual time per root.
BatchBenchResult run_batch_bench(const RunConfig& cfg);
void write_batch_bench_csv(std::ostream& os, const BatchBenchResult& r);

// ---- bandit ---------------------------------------------------------------

struct BanditRunResult {
  BanditSpec spec;  // with the calibrated C when calibration ran
  std::optional<double> calibrated_C;
  DriftAudit audit;
  std::vector<ConcentrationReport> reports;
};

BanditRunResult run_bandit_experiment(const RunConfig& cfg);
void write_concentration_csv(std::ostream& os, const ConcentrationReport& r);
void write_drift_audit_csv(std::ostream& os, const DriftAudit& a);

// ---- toycase --------------------------------------------------------------

void write_toycase_csv(std::ostream& os, const ToycaseReport& r);

// ---- train ----------------------------------------------------------------

// The reanalyze-frequency sweep {0, 1/3, 1, 2}.
std::vector<double> frequency_sweep();
std::string frequency_label(double f);

// ---- commands -------------------------------------------------------------

struct CommandContext {
  std::string config_text;  // raw document, hashed into the manifest
  std::filesystem::path out_dir = ".";
  std::string mode = "rezero";
  std::ostream* log = nullptr;  // human-readable summary, may be null
};

// Each command writes its CSV(s) plus manifests into ctx.out_dir and returns 0 on success.
int cmd_toycase(const RunConfig& cfg, const CommandContext& ctx);
int cmd_reuse_stats(const RunConfig& cfg, const CommandContext& ctx);
int cmd_bandit(const RunConfig& cfg, const CommandContext& ctx);
int cmd_train(const RunConfig& cfg, const CommandContext& ctx);
int cmd_batch_bench(const RunConfig& cfg, const CommandContext& ctx);

// Dispatches by name: toycase | reuse-stats | bandit | train | batch-bench.
int run_command(const std::string& name, const RunConfig& cfg, const CommandContext& ctx);

}  // namespace rezero
