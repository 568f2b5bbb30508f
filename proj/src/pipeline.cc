#include "rezero/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "rezero/errors.h"
#include "rezero/reuse.h"

namespace rezero {

ReplayBuffer::ReplayBuffer(std::int64_t capacity_transitions) : capacity_(capacity_transitions) {
  require(capacity_ > 0, ErrorCode::kConfig, "buffer capacity must be positive");
}

void ReplayBuffer::push(GameSegment segment) {
  segment.validate();
  const auto n = static_cast<std::int64_t>(segment.num_transitions());
  require(n <= capacity_, ErrorCode::kPrecondition, "segment is larger than the buffer capacity");
  segments_.push_back(std::move(segment));
  transitions_ += n;
  while (transitions_ > capacity_) {
    transitions_ -= static_cast<std::int64_t>(segments_.front().num_transitions());
    segments_.pop_front();
    ++evicted_;
  }
}

TabularLearner::TabularLearner(const GridWorldSpec& spec, double policy_step_size, double value_step_size)
    : spec_(spec), policy_step_size_(policy_step_size), value_step_size_(value_step_size) {
  spec_.validate();
  require(policy_step_size >= 0.0 && policy_step_size <= 1.0 && value_step_size >= 0.0 && value_step_size <= 1.0,
          ErrorCode::kConfig, "learner step sizes must lie in [0, 1]");
}

std::vector<double> TabularLearner::policy(StateHandle s) const {
  auto it = policy_table_.find(s.id);
  if (it != policy_table_.end()) return it->second;
  const std::size_t n = gw_legal_actions(spec_, spec_.cell(s)).size();
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

double TabularLearner::value(StateHandle s) const {
  auto it = value_table_.find(s.id);
  return it == value_table_.end() ? 0.0 : it->second;
}

void TabularLearner::update_policy(StateHandle s, const std::vector<double>& target) {
  std::vector<double> p = policy(s);
  require(p.size() == target.size(), ErrorCode::kContractViolation, "policy target does not match legal actions");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = (1.0 - policy_step_size_) * p[i] + policy_step_size_ * target[i];
    total += p[i];
  }
  for (double& x : p) x /= total;
  policy_table_[s.id] = std::move(p);
}

void TabularLearner::update_value(StateHandle s, double target) {
  const double v = value(s);
  value_table_[s.id] = (1.0 - value_step_size_) * v + value_step_size_ * target;
}

GridPredictor make_learner_predictor(const TabularLearner& learner) {
  return [&learner](const GridWorldSpec& spec, Cell c, std::uint64_t) {
    const StateHandle s = spec.handle(c);
    Prediction p;
    p.actions = gw_legal_actions(spec, c);
    p.prior = learner.policy(s);
    p.value = learner.value(s);
    return p;
  };
}

SearchConfig TrainConfig::default_search() {
  // Tabular values start at zero, so raw Q gives unvisited children the same
  // score as losing ones; normalized Q with parent-mean fill keeps reuse from
  // locking onto the pre-evaluated child.
  SearchConfig s;
  s.gamma = 0.9;
  s.value_normalization = true;
  s.unvisited_q_parent_mean = true;
  return s;
}

void TrainConfig::validate() const {
  require(replay_ratio > 0.0, ErrorCode::kConfig, "replay_ratio must be positive");
  require(reanalyze_frequency >= 0.0, ErrorCode::kConfig, "reanalyze_frequency must be non-negative");
  require(td_steps >= 1, ErrorCode::kConfig, "td_steps must be at least 1");
  require(segment_length >= 1, ErrorCode::kConfig, "segment_length must be at least 1");
  require(minibatch_size >= 1, ErrorCode::kConfig, "minibatch_size must be at least 1");
  require(reanalyze_batch_size >= 1, ErrorCode::kConfig, "reanalyze_batch_size must be at least 1");
  require(epochs >= 1, ErrorCode::kConfig, "epochs must be at least 1");
  require(collect_steps_per_epoch >= 1, ErrorCode::kConfig, "collect_steps_per_epoch must be at least 1");
  require(max_episode_steps >= 1, ErrorCode::kConfig, "max_episode_steps must be at least 1");
  require(temperature >= 0.0, ErrorCode::kConfig, "temperature must be non-negative");
  require(eval_episodes >= 1 && eval_max_steps >= 1, ErrorCode::kConfig, "evaluation sizes must be positive");
  require(buffer_capacity >= segment_length, ErrorCode::kConfig, "buffer must hold at least one segment");
  search.validate();
  latency.validate();
}

const char* train_mode_name(TrainMode m) { return m == TrainMode::kRezero ? "rezero" : "baseline"; }

CollectResult collect_episode(const GridWorldSpec& spec, const TabularLearner& learner, Rng& rng, int max_steps,
                              int segment_length, std::int64_t episode_id) {
  require(segment_length >= 1, ErrorCode::kPrecondition, "segment_length must be positive");
  CollectResult out;
  std::vector<StateHandle> states{spec.handle(spec.start)};
  std::vector<ActionId> actions;
  std::vector<double> rewards;
  Cell pos = spec.start;
  while (out.steps < max_steps) {
    const std::vector<ActionId> legal = gw_legal_actions(spec, pos);
    const std::vector<double> p = learner.policy(spec.handle(pos));
    std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
    const ActionId a = legal[pick(rng)];
    const TransitionResult tr = gw_step(spec, pos, a);
    actions.push_back(a);
    rewards.push_back(tr.reward);
    ++out.steps;
    pos = spec.cell(tr.next_state);
    if (tr.terminal) {
      out.reached_goal = true;
      break;
    }
    states.push_back(tr.next_state);
  }
  out.truncated = !out.reached_goal;

  const std::size_t n = actions.size();
  const auto len = static_cast<std::size_t>(segment_length);
  for (std::size_t begin = 0; begin < n; begin += len) {
    const std::size_t end = std::min(n, begin + len);
    GameSegment seg;
    seg.episode_id = episode_id;
    seg.start_step = static_cast<std::int64_t>(begin);
    seg.actions.assign(actions.begin() + static_cast<std::ptrdiff_t>(begin),
                       actions.begin() + static_cast<std::ptrdiff_t>(end));
    seg.rewards.assign(rewards.begin() + static_cast<std::ptrdiff_t>(begin),
                       rewards.begin() + static_cast<std::ptrdiff_t>(end));
    const bool last = end == n;
    seg.ends_terminal = last && out.reached_goal;
    seg.truncated = last && out.truncated;
    // The terminal successor is never stored; otherwise keep the boundary state.
    const std::size_t state_end = seg.ends_terminal ? end : end + 1;
    seg.states.assign(states.begin() + static_cast<std::ptrdiff_t>(begin),
                      states.begin() + static_cast<std::ptrdiff_t>(state_end));
    out.segments.push_back(std::move(seg));
  }
  return out;
}

std::vector<double> visit_policy_target(const std::vector<int>& visits, double temperature) {
  require(!visits.empty(), ErrorCode::kPrecondition, "no visit counts");
  std::vector<double> out(visits.size(), 0.0);
  if (temperature == 0.0) {
    out[static_cast<std::size_t>(std::max_element(visits.begin(), visits.end()) - visits.begin())] = 1.0;
    return out;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < visits.size(); ++i) {
    out[i] = std::pow(static_cast<double>(visits[i]), 1.0 / temperature);
    total += out[i];
  }
  require(total > 0.0, ErrorCode::kPrecondition, "visit counts are all zero");
  for (double& x : out) x /= total;
  return out;
}

double n_step_target(const GameSegment& segment, std::size_t t, int td_steps, double gamma,
                     const std::vector<double>& bootstrap_values) {
  const std::size_t n = segment.num_transitions();
  require(t < n, ErrorCode::kPrecondition, "value target index past the last transition");
  const std::size_t end = std::min(n, t + static_cast<std::size_t>(td_steps));
  double g = 0.0;
  double discount = 1.0;
  for (std::size_t k = t; k < end; ++k) {
    g += discount * segment.rewards[k];
    discount *= gamma;
  }
  if (end < segment.num_roots()) {
    require(end < bootstrap_values.size(), ErrorCode::kStaleTargets, "bootstrap value is missing");
    g += discount * bootstrap_values[end];
  }
  return g;
}

double compute_value_target(const GameSegment& segment, std::size_t t, int td_steps, double gamma) {
  require(segment.stored_root_values.size() == segment.num_roots(), ErrorCode::kStaleTargets,
          "segment has no stored root values; reanalyze it first");
  return n_step_target(segment, t, td_steps, gamma, segment.stored_root_values);
}

ReanalyzeStats reanalyze_entire_buffer(ReplayBuffer& buffer, Evaluator& evaluator, const TrainConfig& cfg,
                                       std::int64_t epoch, std::uint64_t pass_seed) {
  require(!buffer.empty(), ErrorCode::kPrecondition, "reanalyze needs a non-empty buffer");
  ReanalyzeStats stats;
  const auto chunk = static_cast<std::size_t>(cfg.reanalyze_batch_size);
  std::vector<const GameSegment*> ptrs;
  std::vector<std::uint64_t> seeds;
  std::uint64_t ops = 0;
  for (std::size_t begin = 0; begin < buffer.size(); begin += chunk) {
    const std::size_t end = std::min(buffer.size(), begin + chunk);
    ptrs.clear();
    seeds.clear();
    for (std::size_t i = begin; i < end; ++i) {
      ptrs.push_back(&buffer[i]);
      seeds.push_back(derive_seed(pass_seed, i));
    }
    ReanalyzeBatchResult r = reanalyze_batch(ptrs, evaluator, cfg.search, seeds);
    for (std::size_t k = 0; k < ptrs.size(); ++k) {
      GameSegment& seg = buffer[begin + k];
      const std::vector<SearchResult>& results = r.per_segment[k];
      seg.policy_targets.resize(results.size());
      seg.stored_root_values.resize(results.size());
      for (std::size_t t = 0; t < results.size(); ++t) {
        seg.policy_targets[t] = visit_policy_target(results[t].child_visits, cfg.temperature);
        seg.stored_root_values[t] = results[t].root_value;
      }
      seg.value_targets.resize(seg.num_transitions());
      for (std::size_t t = 0; t < seg.num_transitions(); ++t) {
        seg.value_targets[t] = compute_value_target(seg, t, cfg.td_steps, cfg.search.gamma);
      }
      seg.targets_epoch = epoch;
      ops += results.size() + seg.num_transitions();
      stats.transitions += seg.num_transitions();
    }
    stats.segments += ptrs.size();
    ++stats.chunks;
  }
  evaluator.ledger().add_data_process_ops(ops);
  return stats;
}

TrainLoss train_step(TabularLearner& learner, std::span<const TrainSample> minibatch) {
  TrainLoss loss;
  for (const TrainSample& s : minibatch) {
    if (s.policy_target == nullptr) {
      ++loss.skipped;
      continue;
    }
    const std::vector<double> p = learner.policy(s.state);
    for (std::size_t i = 0; i < p.size() && i < s.policy_target->size(); ++i) {
      if ((*s.policy_target)[i] > 0.0) loss.policy_cross_entropy -= (*s.policy_target)[i] * std::log(std::max(p[i], 1e-12));
    }
    const double err = learner.value(s.state) - s.value_target;
    loss.value_squared_error += err * err;
    learner.update_policy(s.state, *s.policy_target);
    learner.update_value(s.state, s.value_target);
    ++loss.used;
  }
  if (loss.used > 0) {
    loss.policy_cross_entropy /= static_cast<double>(loss.used);
    loss.value_squared_error /= static_cast<double>(loss.used);
  }
  return loss;
}

int passes_in_epoch(double f, int epoch) {
  require(f >= 0.0 && epoch >= 1, ErrorCode::kPrecondition, "invalid scheduler arguments");
  // Tolerance keeps f = 1/3 from losing a pass to rounding at multiples of 3.
  auto fl = [f](int e) { return static_cast<int>(std::floor(e * f + 1e-9)); };
  return fl(epoch) - fl(epoch - 1);
}

std::vector<int> pass_positions(int passes, int n_train) {
  std::vector<int> out;
  for (int j = 0; j < passes; ++j) out.push_back(static_cast<int>((static_cast<std::int64_t>(j) + 1) * n_train / (passes + 1)));
  return out;
}

std::optional<EpochRecord> TrainingReport::first_reaching(double threshold) const {
  for (const EpochRecord& r : epochs) {
    if (r.eval_return_mean >= threshold) return r;
  }
  return std::nullopt;
}

void TrainingReport::write_csv(std::ostream& os) const {
  os << "epoch,env_steps,eval_return_mean,eval_return_std,cum_simulations,cum_dynamics_calls,"
        "cum_reanalyze_passes,virtual_time_ms,wall_time_ms\n";
  for (const EpochRecord& r : epochs) {
    os << r.epoch << ',' << r.env_steps << ',' << r.eval_return_mean << ',' << r.eval_return_std << ','
       << r.cum_simulations << ',' << r.cum_dynamics_calls << ',' << r.cum_reanalyze_passes << ','
       << r.virtual_time_ms << ',' << r.wall_time_ms << '\n';
  }
}

std::vector<double> evaluate_greedy(const GridWorldSpec& spec, const TabularLearner& learner, int episodes,
                                    int max_steps, Rng& rng) {
  std::vector<double> returns;
  for (int e = 0; e < episodes; ++e) {
    Cell pos = spec.start;
    double ret = 0.0;
    for (int step = 0; step < max_steps; ++step) {
      const std::vector<ActionId> legal = gw_legal_actions(spec, pos);
      const std::vector<double> p = learner.policy(spec.handle(pos));
      const double best = *std::max_element(p.begin(), p.end());
      std::vector<std::size_t> ties;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == best) ties.push_back(i);
      }
      std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
      const TransitionResult tr = gw_step(spec, pos, legal[ties[pick(rng)]]);
      ret += tr.reward;
      pos = spec.cell(tr.next_state);
      if (tr.terminal) break;
    }
    returns.push_back(ret);
  }
  return returns;
}

namespace {

struct Position {
  std::size_t segment;
  std::size_t t;
};

std::vector<Position> trainable_positions(const ReplayBuffer& buffer, bool need_targets) {
  std::vector<Position> out;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const GameSegment& seg = buffer[i];
    if (need_targets && !seg.has_targets()) continue;
    for (std::size_t t = 0; t < seg.num_transitions(); ++t) out.push_back(Position{i, t});
  }
  return out;
}

}  // namespace

TrainingReport run_training(const GridWorldSpec& spec, const TrainConfig& cfg, TrainMode mode,
                            TabularLearner* learner_out) {
  spec.validate();
  cfg.validate();
  const auto wall_start = std::chrono::steady_clock::now();

  TabularLearner learner(spec, cfg.policy_step_size, cfg.value_step_size);
  GridWorldModel model(spec, make_learner_predictor(learner));
  MetricsLedger ledger;
  Evaluator evaluator(model, ledger, cfg.latency);
  ReplayBuffer buffer(cfg.buffer_capacity);

  Rng collect_rng(derive_seed(cfg.seed, 1));
  Rng train_rng(derive_seed(cfg.seed, 2));
  Rng eval_rng(derive_seed(cfg.seed, 3));
  const std::uint64_t reanalyze_seed = derive_seed(cfg.seed, 4);
  const std::uint64_t baseline_seed = derive_seed(cfg.seed, 5);

  SearchConfig baseline_search = cfg.search;
  baseline_search.reuse_enabled = false;

  const int n_train = static_cast<int>(std::ceil(cfg.replay_ratio * cfg.collect_steps_per_epoch - 1e-9));
  TrainingReport report;
  report.mode = mode;
  report.reanalyze_frequency = cfg.reanalyze_frequency;

  int passes = 0;
  std::int64_t episode_id = 0;
  std::int64_t train_steps = 0;
  std::int64_t skipped = 0;
  std::int64_t stale = 0;

  auto reanalyze_pass = [&](int epoch) {
    reanalyze_entire_buffer(buffer, evaluator, cfg, epoch, derive_seed(reanalyze_seed, static_cast<std::uint64_t>(passes)));
    ++passes;
  };

  std::vector<TrainSample> batch;
  std::vector<std::vector<double>> baseline_policies;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    int remaining = cfg.collect_steps_per_epoch;
    while (remaining > 0) {
      CollectResult c = collect_episode(spec, learner, collect_rng, std::min(remaining, cfg.max_episode_steps),
                                        cfg.segment_length, episode_id++);
      remaining -= c.steps;
      buffer.add_env_steps(c.steps);
      for (GameSegment& seg : c.segments) {
        seg.insert_epoch = epoch;
        buffer.push(std::move(seg));
      }
    }

    std::vector<int> schedule;
    if (mode == TrainMode::kRezero) {
      if (epoch == 1) reanalyze_pass(epoch);
      schedule = pass_positions(passes_in_epoch(cfg.reanalyze_frequency, epoch), n_train);
    }
    std::size_t next_pass = 0;

    for (int step = 0; step < n_train; ++step) {
      while (next_pass < schedule.size() && schedule[next_pass] == step) {
        reanalyze_pass(epoch);
        ++next_pass;
      }
      batch.clear();
      const std::vector<Position> positions = trainable_positions(buffer, mode == TrainMode::kRezero);
      if (positions.empty()) {
        skipped += cfg.minibatch_size;
        ++train_steps;
        continue;
      }
      std::uniform_int_distribution<std::size_t> pick(0, positions.size() - 1);
      std::vector<Position> chosen(static_cast<std::size_t>(cfg.minibatch_size));
      for (Position& p : chosen) p = positions[pick(train_rng)];

      if (mode == TrainMode::kRezero) {
        for (const Position& p : chosen) {
          const GameSegment& seg = buffer[p.segment];
          if (seg.targets_epoch < seg.insert_epoch) ++stale;
          batch.push_back(TrainSample{seg.states[p.t], &seg.policy_targets[p.t], seg.value_targets[p.t]});
        }
      } else {
        // Fresh plain search per sampled position right before the update.
        std::vector<StateHandle> roots;
        roots.reserve(chosen.size());
        for (const Position& p : chosen) roots.push_back(buffer[p.segment].states[p.t]);
        baseline_search.rng_seed = derive_seed(baseline_seed, static_cast<std::uint64_t>(train_steps));
        const std::vector<SearchResult> results = run_mcts_batched(roots, evaluator, baseline_search);
        baseline_policies.assign(chosen.size(), {});
        for (std::size_t k = 0; k < chosen.size(); ++k) {
          const GameSegment& seg = buffer[chosen[k].segment];
          baseline_policies[k] = visit_policy_target(results[k].child_visits, cfg.temperature);
          std::vector<double> boot(seg.num_roots());
          for (std::size_t j = 0; j < boot.size(); ++j) boot[j] = learner.value(seg.states[j]);
          const double v = n_step_target(seg, chosen[k].t, cfg.td_steps, cfg.search.gamma, boot);
          batch.push_back(TrainSample{seg.states[chosen[k].t], &baseline_policies[k], v});
        }
        ledger.add_data_process_ops(2 * chosen.size());
      }
      const TrainLoss loss = train_step(learner, batch);
      skipped += static_cast<std::int64_t>(loss.skipped);
      ++train_steps;
    }

    const std::vector<double> returns = evaluate_greedy(spec, learner, cfg.eval_episodes, cfg.eval_max_steps, eval_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.env_steps = buffer.total_env_steps();
    const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    rec.eval_return_mean = mean;
    rec.eval_return_std = std::sqrt(var / static_cast<double>(returns.size()));
    const MetricsSnapshot snap = ledger.snapshot();
    rec.cum_simulations = snap.simulations;
    rec.cum_dynamics_calls = snap.dynamics_calls;
    rec.cum_reanalyze_passes = passes;
    rec.virtual_time_ms = snap.virtual_time_ms;
    rec.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall_start).count();
    rec.cum_train_steps = train_steps;
    rec.cum_skipped_samples = skipped;
    rec.stale_samples = stale;
    report.epochs.push_back(rec);
  }
  ledger.add_wall_time_ms(report.epochs.back().wall_time_ms);
  report.totals = ledger.snapshot();
  if (learner_out) *learner_out = learner;
  return report;
}

}  // namespace rezero
