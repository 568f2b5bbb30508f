#include "rezero/experiments.h"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "rezero/errors.h"
#include "rezero/reuse.h"

namespace rezero {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

RunManifest start_manifest(const std::string& command, const RunConfig& cfg, const CommandContext& ctx) {
  RunManifest m;
  m.command = command;
  m.config_hash = fnv1a_hex(ctx.config_text + "\nseed=" + std::to_string(cfg.seed));
  m.seed = cfg.seed;
  m.started_at = utc_timestamp();
  return m;
}

void finish_output(const std::filesystem::path& csv, RunManifest m) {
  m.finished_at = utc_timestamp();
  m.output = csv.filename().string();
  write_manifest(csv, m);
}

std::ostream& log_of(const CommandContext& ctx) {
  static std::ostringstream sink;
  if (ctx.log) return *ctx.log;
  sink.str("");
  return sink;
}

// Searches every segment, writes fresh targets into the copies and counts the target writes.
void reanalyze_copies(std::vector<GameSegment>& segments, Evaluator& evaluator, const SearchConfig& search,
                      int td_steps) {
  std::vector<const GameSegment*> ptrs;
  for (const GameSegment& s : segments) ptrs.push_back(&s);
  ReanalyzeBatchResult r = reanalyze_batch(ptrs, evaluator, search);
  std::uint64_t ops = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    GameSegment& seg = segments[i];
    seg.policy_targets.clear();
    seg.stored_root_values.clear();
    for (const SearchResult& res : r.per_segment[i]) {
      seg.policy_targets.push_back(visit_policy_target(res.child_visits, 1.0));
      seg.stored_root_values.push_back(res.root_value);
    }
    seg.value_targets.assign(seg.num_transitions(), 0.0);
    for (std::size_t t = 0; t < seg.num_transitions(); ++t) {
      seg.value_targets[t] = compute_value_target(seg, t, td_steps, search.gamma);
    }
    seg.targets_epoch = 0;
    ops += seg.num_roots() + seg.num_transitions();
  }
  evaluator.ledger().add_data_process_ops(ops);
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_manifest(const std::filesystem::path& csv_path, const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["output"] = m.output;
  if (!m.notes.empty()) j["notes"] = m.notes;
  std::filesystem::path path = csv_path;
  path += ".manifest.json";
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<GameSegment> random_policy_buffer(const GridWorldSpec& spec, int segments, int segment_length,
                                              int max_episode_steps, std::uint64_t seed) {
  const TabularLearner uniform(spec, 0.0, 0.0);
  Rng rng(seed);
  std::vector<GameSegment> out;
  std::int64_t episode = 0;
  while (static_cast<int>(out.size()) < segments) {
    CollectResult c = collect_episode(spec, uniform, rng, max_episode_steps, segment_length, episode++);
    for (GameSegment& s : c.segments) {
      if (static_cast<int>(out.size()) == segments) break;
      out.push_back(std::move(s));
    }
  }
  return out;
}

ReuseStatsResult run_reuse_stats(const RunConfig& cfg) {
  const ReuseStatsOptions& opt = cfg.reuse_stats;
  const std::vector<GameSegment> buffer = random_policy_buffer(cfg.grid, opt.segments, opt.segment_length,
                                                               opt.max_episode_steps, derive_seed(cfg.seed, 11));
  GridWorldModel model(cfg.grid, make_predictor(opt.predictor, cfg.search.gamma));
  ReuseStatsResult out;
  out.segments = buffer.size();
  for (const GameSegment& s : buffer) out.roots += s.num_roots();

  auto run = [&](bool reuse) {
    MetricsLedger ledger;
    Evaluator evaluator(model, ledger, cfg.latency);
    SearchConfig search = cfg.search;
    search.rng_seed = derive_seed(cfg.seed, 12);
    search.reuse_enabled = reuse;
    std::vector<GameSegment> copies = buffer;
    const MetricsSnapshot before = ledger.snapshot();
    {
      ScopedWallTimer timer(ledger);
      reanalyze_copies(copies, evaluator, search, cfg.train.td_steps);
    }
    ReuseStatsRow row;
    row.mode = reuse ? "reuse" : "plain";
    row.delta = ledger.snapshot() - before;
    row.avg_search_virtual_ms =
        row.delta.searches > 0 ? row.delta.virtual_time_ms / static_cast<double>(row.delta.searches) : 0.0;
    return row;
  };
  out.plain = run(false);
  out.reuse = run(true);
  out.dynamics_ratio = out.plain.delta.dynamics_calls > 0
                           ? static_cast<double>(out.reuse.delta.dynamics_calls) / out.plain.delta.dynamics_calls
                           : 0.0;
  return out;
}

void write_reuse_stats_csv(std::ostream& os, const ReuseStatsResult& r) {
  // data_process_ops: target-construction operations (one per policy target, one per value target).
  os << "mode,segments,searches,simulations,early_terminations,expansions,dynamics_calls,prediction_calls,"
        "batch_calls,data_process_ops,virtual_time_ms,avg_search_virtual_ms,wall_time_ms\n";
  for (const ReuseStatsRow* row : {&r.plain, &r.reuse}) {
    const MetricsSnapshot& d = row->delta;
    os << row->mode << ',' << r.segments << ',' << d.searches << ',' << d.simulations << ',' << d.early_terminations
       << ',' << d.expansions << ',' << d.dynamics_calls << ',' << d.prediction_calls << ',' << d.batch_calls << ','
       << d.data_process_ops << ',' << d.virtual_time_ms << ',' << row->avg_search_virtual_ms << ','
       << d.wall_time_ms << '\n';
  }
}

BatchBenchResult run_batch_bench(const RunConfig& cfg) {
  const BatchBenchOptions& opt = cfg.batch_bench;
  require(cfg.latency.enabled, ErrorCode::kPrecondition, "batch-bench needs the synthetic latency model enabled");
  std::vector<StateHandle> open;
  for (int r = 0; r < cfg.grid.height; ++r) {
    for (int c = 0; c < cfg.grid.width; ++c) {
      const Cell cell{r, c};
      if (cfg.grid.is_open(cell) && cell != cfg.grid.goal) open.push_back(cfg.grid.handle(cell));
    }
  }
  require(!open.empty(), ErrorCode::kPrecondition, "gridworld has no searchable cells");
  std::vector<SearchJob> all;
  for (int i = 0; i < opt.roots; ++i) {
    all.push_back(SearchJob{open[static_cast<std::size_t>(i) % open.size()], derive_seed(cfg.seed, i), std::nullopt});
  }

  GridWorldModel model(cfg.grid, make_predictor(opt.predictor, cfg.search.gamma));
  BatchBenchResult out;
  out.identical_results = true;
  std::vector<std::vector<int>> reference;
  for (int b : opt.batch_sizes) {
    MetricsLedger ledger;
    Evaluator evaluator(model, ledger, cfg.latency);
    std::vector<std::vector<int>> visits;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t begin = 0; begin < all.size(); begin += static_cast<std::size_t>(b)) {
      const std::size_t end = std::min(all.size(), begin + static_cast<std::size_t>(b));
      const std::vector<SearchResult> results =
          run_search_jobs(std::span(all).subspan(begin, end - begin), evaluator, cfg.search);
      for (const SearchResult& r : results) visits.push_back(r.child_visits);
    }
    const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (reference.empty()) {
      reference = visits;
    } else if (visits != reference) {
      out.identical_results = false;
    }
    const MetricsSnapshot snap = ledger.snapshot();
    BatchBenchRow row;
    row.batch_size = b;
    row.batch_calls = snap.batch_calls;
    row.virtual_ms = snap.virtual_time_ms;
    row.virtual_ms_per_root = snap.virtual_time_ms / static_cast<double>(all.size());
    row.wall_ms_per_root = wall / static_cast<double>(all.size());
    out.rows.push_back(row);
  }
  out.strictly_decreasing = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (!(out.rows[i].virtual_ms_per_root < out.rows[i - 1].virtual_ms_per_root)) out.strictly_decreasing = false;
  }
  return out;
}

void write_batch_bench_csv(std::ostream& os, const BatchBenchResult& r) {
  os << "batch_size,batch_calls,virtual_time_ms,virtual_ms_per_root,wall_ms_per_root\n";
  for (const BatchBenchRow& row : r.rows) {
    os << row.batch_size << ',' << row.batch_calls << ',' << row.virtual_ms << ',' << row.virtual_ms_per_root << ','
       << row.wall_ms_per_root << '\n';
  }
}

BanditRunResult run_bandit_experiment(const RunConfig& cfg) {
  const BanditOptions& opt = cfg.bandit;
  BanditRunResult out;
  out.spec = opt.spec;
  const std::uint64_t audit_seed = derive_seed(cfg.seed, 21);
  if (opt.calibrate) {
    const std::vector<double> candidates = opt.candidates.empty() ? BanditOptions::default_candidates() : opt.candidates;
    out.calibrated_C = calibrate_concentration(out.spec, candidates, opt.audit_sample_counts, opt.audit_epsilons,
                                               opt.audit_seeds, audit_seed);
    if (out.calibrated_C) out.spec.C = *out.calibrated_C;
  }
  out.audit = drift_condition_audit(out.spec, out.spec.C, opt.audit_sample_counts, opt.audit_epsilons,
                                    opt.audit_seeds, audit_seed);
  BanditSweep sweep = opt.sweep;
  sweep.seed = derive_seed(cfg.seed, 22);
  out.reports = run_bandit_sweep(out.spec, sweep);
  return out;
}

void write_concentration_csv(std::ostream& os, const ConcentrationReport& r) {
  os << "arm,n,mean_T,bound,pass\n";
  for (const ConcentrationRow& row : r.rows) {
    os << row.arm << ',' << row.n << ',' << row.mean_pulls << ',';
    if (row.bound) os << *row.bound;
    os << ',' << (row.pass ? "true" : "false") << '\n';
  }
}

void write_drift_audit_csv(std::ostream& os, const DriftAudit& a) {
  os << "arm,s,epsilon,upper_frequency,lower_frequency,allowed,pass\n";
  for (const DriftAuditCell& c : a.cells) {
    os << c.arm << ',' << c.s << ',' << c.epsilon << ',' << c.upper_frequency << ',' << c.lower_frequency << ','
       << c.allowed << ',' << (c.pass ? "true" : "false") << '\n';
  }
}

void write_toycase_csv(std::ostream& os, const ToycaseReport& r) {
  os << "row,col,reachable,plain_expansions,reuse_expansions,plain_simulations,reuse_simulations,reuse_stops,"
        "plain_wall_ms,reuse_wall_ms,plain_root_value,reuse_row,reuse_col,reuse_value\n";
  for (const ToycaseCell& c : r.cells) {
    os << c.cell.row << ',' << c.cell.col << ',' << (c.reachable ? "true" : "false") << ',';
    if (c.reachable) {
      os << c.plain.expansions << ',' << c.reuse.expansions << ',' << c.plain.iterations << ',' << c.reuse.iterations
         << ',' << c.reuse.reuse_stops << ',' << c.plain.wall_ms << ',' << c.reuse.wall_ms << ','
         << c.plain.root_value << ',' << c.reuse_position.row << ',' << c.reuse_position.col << ',' << c.reuse_value;
    } else {
      os << ",,,,,,,,,,";
    }
    os << '\n';
  }
}

std::vector<double> frequency_sweep() { return {0.0, 1.0 / 3.0, 1.0, 2.0}; }

std::string frequency_label(double f) {
  if (std::abs(f - 1.0 / 3.0) < 1e-12) return "1_3";
  std::ostringstream os;
  os << f;
  std::string s = os.str();
  for (char& ch : s) {
    if (ch == '.') ch = 'p';
  }
  return s;
}

int cmd_toycase(const RunConfig& cfg, const CommandContext& ctx) {
  RunManifest m = start_manifest("toycase", cfg, ctx);
  const ToycaseReport report = run_toycase(cfg.grid, cfg.toycase, cfg.seed);
  const auto path = ctx.out_dir / "toycase.csv";
  {
    std::ofstream out = open_output(path);
    write_toycase_csv(out, report);
  }
  m.notes = "expansions count nodes added per search; iterations per search = " +
            std::to_string(cfg.toycase.iterations);
  finish_output(path, m);
  std::ostream& log = log_of(ctx);
  log << toycase_heatmap(cfg.grid, report, false) << '\n' << toycase_heatmap(cfg.grid, report, true) << '\n';
  log << "mean expansions plain " << report.mean_plain_expansions << " reuse " << report.mean_reuse_expansions
      << " reduction " << report.expansion_reduction << " cells not worse " << report.fraction_not_worse << '\n';
  log << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_reuse_stats(const RunConfig& cfg, const CommandContext& ctx) {
  RunManifest m = start_manifest("reuse-stats", cfg, ctx);
  const ReuseStatsResult r = run_reuse_stats(cfg);
  const auto path = ctx.out_dir / "reuse_stats.csv";
  {
    std::ofstream out = open_output(path);
    write_reuse_stats_csv(out, r);
  }
  m.notes = "data_process_ops counts target writes: one per policy target and one per value target";
  finish_output(path, m);
  std::ostream& log = log_of(ctx);
  log << "dynamics calls plain " << r.plain.delta.dynamics_calls << " reuse " << r.reuse.delta.dynamics_calls
      << " ratio " << r.dynamics_ratio << '\n';
  log << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_bandit(const RunConfig& cfg, const CommandContext& ctx) {
  RunManifest m = start_manifest("bandit", cfg, ctx);
  const BanditRunResult r = run_bandit_experiment(cfg);
  std::ostream& log = log_of(ctx);
  if (cfg.bandit.calibrate && !r.calibrated_C) log << "no candidate C passed the drift audit; using C = " << r.spec.C << '\n';
  const auto audit_path = ctx.out_dir / "bandit_drift_audit.csv";
  {
    std::ofstream out = open_output(audit_path);
    write_drift_audit_csv(out, r.audit);
  }
  m.notes = "C = " + std::to_string(r.spec.C);
  finish_output(audit_path, m);
  log << "drift audit C=" << r.spec.C << ' ' << (r.audit.pass ? "pass" : "FAIL") << '\n';
  for (const ConcentrationReport& rep : r.reports) {
    const auto path = ctx.out_dir / (std::string("bandit_") + bandit_policy_name(rep.policy) + ".csv");
    {
      std::ofstream out = open_output(path);
      write_concentration_csv(out, rep);
    }
    finish_output(path, m);
    log << bandit_policy_name(rep.policy) << ": trend " << (rep.trend_pass ? "pass" : "fail") << ", bound "
        << (rep.bound_pass ? "pass" : "fail") << '\n';
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, const CommandContext& ctx) {
  std::ostream& log = log_of(ctx);
  std::vector<std::pair<TrainMode, double>> runs;
  if (ctx.mode == "baseline") {
    runs.emplace_back(TrainMode::kBaseline, cfg.train.reanalyze_frequency);
  } else if (ctx.mode == "rezero") {
    for (double f : frequency_sweep()) runs.emplace_back(TrainMode::kRezero, f);
  } else {
    fail(ErrorCode::kConfig, "unknown mode \"" + ctx.mode + "\" (rezero, baseline)");
  }
  for (const auto& [mode, f] : runs) {
    RunManifest m = start_manifest("train", cfg, ctx);
    TrainConfig tc = cfg.train;
    tc.reanalyze_frequency = f;
    tc.seed = cfg.seed;
    const TrainingReport report = run_training(cfg.grid, tc, mode);
    const std::string name = mode == TrainMode::kBaseline ? "train_baseline.csv"
                                                          : "train_rezero_f" + frequency_label(f) + ".csv";
    const auto path = ctx.out_dir / name;
    {
      std::ofstream out = open_output(path);
      report.write_csv(out);
    }
    m.notes = std::string("mode ") + train_mode_name(mode) + ", reanalyze_frequency " + std::to_string(f);
    finish_output(path, m);
    const auto hit = report.first_reaching(0.95);
    log << name << ": ";
    if (hit) {
      log << "return >= 0.95 at " << hit->env_steps << " env steps, " << hit->cum_simulations << " simulations\n";
    } else {
      log << "return 0.95 not reached in " << report.epochs.back().env_steps << " env steps\n";
    }
  }
  return 0;
}

int cmd_batch_bench(const RunConfig& cfg, const CommandContext& ctx) {
  RunManifest m = start_manifest("batch-bench", cfg, ctx);
  const BatchBenchResult r = run_batch_bench(cfg);
  const auto path = ctx.out_dir / "batch_bench.csv";
  {
    std::ofstream out = open_output(path);
    write_batch_bench_csv(out, r);
  }
  std::ostringstream notes;
  notes << "virtual clock: alpha " << cfg.latency.per_call_overhead_alpha << " ms + beta "
        << cfg.latency.per_item_cost_beta << " ms per item";
  m.notes = notes.str();
  finish_output(path, m);
  std::ostream& log = log_of(ctx);
  for (const BatchBenchRow& row : r.rows) {
    log << "B=" << row.batch_size << " virtual ms/root " << row.virtual_ms_per_root << '\n';
  }
  log << "strictly decreasing: " << (r.strictly_decreasing ? "yes" : "no") << ", identical results across B: "
      << (r.identical_results ? "yes" : "no") << '\n';
  return 0;
}

int run_command(const std::string& name, const RunConfig& cfg, const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  if (name == "toycase") return cmd_toycase(cfg, ctx);
  if (name == "reuse-stats") return cmd_reuse_stats(cfg, ctx);
  if (name == "bandit") return cmd_bandit(cfg, ctx);
  if (name == "train") return cmd_train(cfg, ctx);
  if (name == "batch-bench") return cmd_batch_bench(cfg, ctx);
  fail(ErrorCode::kConfig, "unknown command \"" + name + "\"");
}

}  // namespace rezero
