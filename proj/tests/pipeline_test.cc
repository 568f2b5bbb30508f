#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <map>
#include <sstream>

#include "rezero/errors.h"
#include "rezero/pipeline.h"
#include "rezero/reuse.h"

using namespace rezero;

namespace {

constexpr int kDown = 0, kRight = 3;

GameSegment corridor_segment(const GridWorldSpec& spec, Cell start, int moves, int action) {
  GameSegment seg;
  Cell pos = start;
  seg.states.push_back(spec.handle(pos));
  for (int i = 0; i < moves; ++i) {
    const TransitionResult t = gw_step(spec, pos, ActionId{action});
    seg.actions.push_back(ActionId{action});
    seg.rewards.push_back(t.reward);
    pos = spec.cell(t.next_state);
    if (t.terminal) {
      seg.ends_terminal = true;
      break;
    }
    seg.states.push_back(t.next_state);
  }
  return seg;
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.seed = seed;
  cfg.search.num_simulations = 16;
  return cfg;
}

}  // namespace

TEST(ValueTarget, TerminalWithinHorizon) {
  // Rewards 0, 0, 1 with the last transition terminal: with gamma 1 the target is 1.
  const GridWorldSpec spec = GridWorldSpec::walled_7x7();
  GameSegment seg;
  seg.states = {spec.handle({4, 6}), spec.handle({5, 6}), spec.handle({6, 5})};
  seg.actions = {ActionId{kDown}, ActionId{kDown}, ActionId{kRight}};
  seg.rewards = {0.0, 0.0, 1.0};
  seg.ends_terminal = true;
  seg.stored_root_values = {0.3, 0.3, 0.3};
  EXPECT_DOUBLE_EQ(compute_value_target(seg, 0, 5, 1.0), 1.0);
}

TEST(ValueTarget, BootstrapsFromRootValue) {
  GameSegment seg;
  seg.states = {StateHandle{0}, StateHandle{1}, StateHandle{2}};
  seg.actions = {ActionId{0}, ActionId{0}};
  seg.rewards = {0.0, 0.0};
  seg.stored_root_values = {0.0, 0.0, 1.0};
  EXPECT_NEAR(compute_value_target(seg, 0, 2, 0.9), 0.81, 1e-12);
  // td beyond the segment truncates at its last state.
  EXPECT_NEAR(compute_value_target(seg, 0, 5, 0.9), 0.81, 1e-12);
  EXPECT_NEAR(n_step_target(seg, 0, 2, 0.9, {0.0, 0.0, 0.5}), 0.405, 1e-12);
}

TEST(ValueTarget, MissingRootValuesAreStale) {
  GameSegment seg;
  seg.states = {StateHandle{0}, StateHandle{1}};
  seg.actions = {ActionId{0}};
  seg.rewards = {0.0};
  try {
    compute_value_target(seg, 0, 5, 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStaleTargets);
  }
}

TEST(PolicyTarget, TemperatureShapes) {
  EXPECT_EQ(visit_policy_target({1, 3}, 1.0), (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(visit_policy_target({1, 3}, 0.0), (std::vector<double>{0.0, 1.0}));
  const std::vector<double> sharp = visit_policy_target({1, 3}, 0.5);
  EXPECT_NEAR(sharp[1], 0.9, 1e-12);
}

TEST(Collect, SlicesEpisodeIntoSegments) {
  // A forced 45-step walk: a 1x46 corridor whose goal is 45 moves away.
  GridWorldSpec spec{46, 1, {0, 0}, {0, 45}, {}};
  TabularLearner learner(spec, 1.0, 1.0);
  for (int c = 0; c < 45; ++c) {
    const std::vector<ActionId> legal = gw_legal_actions(spec, {0, c});
    std::vector<double> target(legal.size(), 0.0);
    for (std::size_t i = 0; i < legal.size(); ++i) target[i] = legal[i].index == kRight ? 1.0 : 0.0;
    learner.update_policy(spec.handle({0, c}), target);
  }
  Rng rng(0);
  const CollectResult r = collect_episode(spec, learner, rng, 100, 20);
  EXPECT_EQ(r.steps, 45);
  EXPECT_TRUE(r.reached_goal);
  ASSERT_EQ(r.segments.size(), 3u);
  EXPECT_EQ(r.segments[0].num_transitions(), 20u);
  EXPECT_EQ(r.segments[1].num_transitions(), 20u);
  EXPECT_EQ(r.segments[2].num_transitions(), 5u);
  EXPECT_EQ(r.segments[0].num_roots(), 21u);
  EXPECT_EQ(r.segments[2].num_roots(), 5u);  // terminal successor not stored
  EXPECT_TRUE(r.segments[2].ends_terminal);
  for (const GameSegment& s : r.segments) EXPECT_NO_THROW(s.validate());
}

TEST(ReplayBuffer, EvictsOldestFirstWithinCapacity) {
  Rng rng(123);
  ReplayBuffer buffer(50);
  std::deque<std::int64_t> model;  // episode ids in expected order
  std::int64_t transitions = 0;
  std::map<std::int64_t, std::int64_t> sizes;
  for (std::int64_t id = 0; id < 400; ++id) {
    const int len = 1 + static_cast<int>(rng() % 20);
    GameSegment seg;
    for (int i = 0; i <= len; ++i) seg.states.push_back(StateHandle{i});
    seg.actions.assign(static_cast<std::size_t>(len), ActionId{0});
    seg.rewards.assign(static_cast<std::size_t>(len), 0.0);
    seg.episode_id = id;
    buffer.push(seg);
    model.push_back(id);
    sizes[id] = len;
    transitions += len;
    while (transitions > 50) {
      transitions -= sizes[model.front()];
      model.pop_front();
    }
    ASSERT_LE(buffer.transitions(), 50);
    ASSERT_EQ(buffer.transitions(), transitions);
    ASSERT_EQ(buffer.size(), model.size());
    for (std::size_t i = 0; i < model.size(); ++i) ASSERT_EQ(buffer[i].episode_id, model[i]);
  }
}

TEST(ReplayBuffer, RejectsOversizedSegment) {
  ReplayBuffer buffer(3);
  GameSegment seg;
  seg.states.assign(6, StateHandle{0});
  seg.actions.assign(5, ActionId{0});
  seg.rewards.assign(5, 0.0);
  EXPECT_THROW(buffer.push(seg), Error);
}

TEST(TrainStep, FullStepCopiesTarget) {
  const GridWorldSpec spec = GridWorldSpec::walled_7x7();
  TabularLearner learner(spec, 1.0, 1.0);
  const std::vector<double> target{0.2, 0.8};
  const TrainSample sample{spec.handle({0, 0}), &target, 0.6};
  const TrainLoss loss = train_step(learner, std::span(&sample, 1));
  EXPECT_EQ(learner.policy(spec.handle({0, 0})), target);
  EXPECT_DOUBLE_EQ(learner.value(spec.handle({0, 0})), 0.6);
  EXPECT_EQ(loss.used, 1u);
}

TEST(TrainStep, ZeroStepKeepsTablesButReportsLoss) {
  const GridWorldSpec spec = GridWorldSpec::walled_7x7();
  TabularLearner learner(spec, 0.0, 0.0);
  const std::vector<double> before = learner.policy(spec.handle({0, 0}));
  const std::vector<double> target{0.2, 0.8};
  const TrainSample samples[] = {{spec.handle({0, 0}), &target, 0.6}, {spec.handle({0, 1}), nullptr, 0.0}};
  const TrainLoss loss = train_step(learner, samples);
  EXPECT_EQ(learner.policy(spec.handle({0, 0})), before);
  EXPECT_EQ(learner.value(spec.handle({0, 0})), 0.0);
  EXPECT_GT(loss.policy_cross_entropy, 0.0);
  EXPECT_NEAR(loss.value_squared_error, 0.36, 1e-12);
  EXPECT_EQ(loss.used, 1u);
  EXPECT_EQ(loss.skipped, 1u);
}

TEST(Scheduler, PassesPerEpoch) {
  auto total = [](double f, int epochs) {
    int n = 0;
    for (int e = 1; e <= epochs; ++e) n += passes_in_epoch(f, e);
    return n;
  };
  EXPECT_EQ(total(1.0, 10), 10);
  EXPECT_EQ(total(1.0 / 3.0, 9), 3);
  EXPECT_EQ(passes_in_epoch(1.0 / 3.0, 3), 1);
  EXPECT_EQ(passes_in_epoch(1.0 / 3.0, 2), 0);
  EXPECT_EQ(total(0.0, 50), 0);
  EXPECT_EQ(total(2.0, 7), 14);
  EXPECT_EQ(pass_positions(2, 5), (std::vector<int>{1, 3}));  // evenly spaced inside the epoch
  EXPECT_EQ(pass_positions(1, 5), (std::vector<int>{2}));
}

TEST(EntireBuffer, ChunksByBatchSize) {
  const GridWorldSpec spec = GridWorldSpec::open_4x4();
  ReplayBuffer buffer(1000000);
  for (int i = 0; i < 2500; ++i) {
    GameSegment seg;
    seg.states = {spec.handle({3, 0})};
    buffer.push(seg);
  }
  TrainConfig cfg;
  cfg.search.num_simulations = 2;
  GridWorldModel model(spec, make_uniform_zero_predictor());
  MetricsLedger ledger;
  Evaluator ev(model, ledger);
  const ReanalyzeStats stats = reanalyze_entire_buffer(buffer, ev, cfg, 1, 9);
  EXPECT_EQ(stats.chunks, 2u);
  EXPECT_EQ(stats.segments, 2500u);
  for (const GameSegment& s : buffer.segments()) EXPECT_EQ(s.targets_epoch, 1);
}

TEST(EntireBuffer, SingleSegmentEqualsSearchBackwards) {
  const GridWorldSpec spec = GridWorldSpec::walled_7x7();
  ReplayBuffer buffer(100);
  buffer.push(corridor_segment(spec, {0, 0}, 4, kDown));
  TrainConfig cfg;
  GridWorldModel model(spec, make_oracle_predictor(cfg.search.gamma));
  MetricsLedger ledger;
  Evaluator ev(model, ledger);
  reanalyze_entire_buffer(buffer, ev, cfg, 0, 44);
  SearchConfig sc = cfg.search;
  sc.rng_seed = derive_seed(44, 0);
  const std::vector<SearchResult> expect = search_backwards(buffer[0], ev, sc);
  ASSERT_EQ(buffer[0].policy_targets.size(), expect.size());
  for (std::size_t t = 0; t < expect.size(); ++t) {
    EXPECT_EQ(buffer[0].policy_targets[t], visit_policy_target(expect[t].child_visits, cfg.temperature));
    EXPECT_EQ(buffer[0].stored_root_values[t], expect[t].root_value);
  }
  EXPECT_EQ(buffer[0].value_targets.size(), buffer[0].num_transitions());
}

TEST(Training, SchedulerExactnessAndAccounting) {
  const GridWorldSpec spec = GridWorldSpec::walled_7x7();
  for (double f : {0.0, 1.0 / 3.0, 1.0, 2.0}) {
    TrainConfig cfg = small_config(3);
    cfg.reanalyze_frequency = f;
    const TrainingReport r = run_training(spec, cfg, TrainMode::kRezero);
    ASSERT_EQ(r.epochs.size(), 6u);
    std::int64_t expected_steps = 0;
    for (const EpochRecord& e : r.epochs) {
      EXPECT_EQ(e.cum_reanalyze_passes, 1 + static_cast<int>(std::floor(e.epoch * f + 1e-9))) << "f " << f;
      expected_steps += static_cast<std::int64_t>(std::ceil(cfg.replay_ratio * cfg.collect_steps_per_epoch));
      EXPECT_EQ(e.cum_train_steps, expected_steps);
      EXPECT_EQ(e.env_steps, static_cast<std::int64_t>(e.epoch) * cfg.collect_steps_per_epoch);
    }
    if (f > 0.0) EXPECT_EQ(r.epochs.back().stale_samples, 0);
  }
}

TEST(Training, DeterministicUnderSeedBothModes) {
  const GridWorldSpec spec = GridWorldSpec::walled_7x7();
  for (TrainMode mode : {TrainMode::kRezero, TrainMode::kBaseline}) {
    const TrainConfig cfg = small_config(17);
    const TrainingReport a = run_training(spec, cfg, mode);
    const TrainingReport b = run_training(spec, cfg, mode);
    ASSERT_EQ(a.epochs.size(), b.epochs.size());
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
      EXPECT_EQ(a.epochs[i].eval_return_mean, b.epochs[i].eval_return_mean);
      EXPECT_EQ(a.epochs[i].cum_simulations, b.epochs[i].cum_simulations);
      EXPECT_EQ(a.epochs[i].cum_dynamics_calls, b.epochs[i].cum_dynamics_calls);
      EXPECT_EQ(a.epochs[i].virtual_time_ms, b.epochs[i].virtual_time_ms);
    }
  }
}

TEST(Training, BaselineNeverReanalyzes) {
  const GridWorldSpec spec = GridWorldSpec::walled_7x7();
  TrainConfig cfg = small_config(5);
  cfg.epochs = 2;
  const TrainingReport r = run_training(spec, cfg, TrainMode::kBaseline);
  for (const EpochRecord& e : r.epochs) EXPECT_EQ(e.cum_reanalyze_passes, 0);
  EXPECT_GT(r.epochs.back().cum_simulations, 0u);
}

TEST(Training, CsvColumns) {
  const GridWorldSpec spec = GridWorldSpec::open_4x4();
  TrainConfig cfg = small_config(1);
  cfg.epochs = 2;
  std::ostringstream os;
  run_training(spec, cfg, TrainMode::kRezero).write_csv(os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "epoch,env_steps,eval_return_mean,eval_return_std,cum_simulations,cum_dynamics_calls,"
            "cum_reanalyze_passes,virtual_time_ms,wall_time_ms");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(Training, LearnsOpenGrid) {
  const GridWorldSpec spec = GridWorldSpec::open_4x4();
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 2;
  const TrainingReport r = run_training(spec, cfg, TrainMode::kRezero);
  EXPECT_TRUE(r.first_reaching(0.95).has_value());
}
