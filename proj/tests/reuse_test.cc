#include <gtest/gtest.h>

#include <algorithm>

#include "rezero/errors.h"
#include "rezero/gridworld.h"
#include "rezero/reuse.h"

using namespace rezero;

namespace {

constexpr int kDown = 0, kUp = 1, kLeft = 2, kRight = 3;

// Walks `moves` from `start`; the terminal successor is not stored.
GameSegment walk(const GridWorldSpec& spec, Cell start, const std::vector<int>& moves) {
  GameSegment seg;
  Cell pos = start;
  seg.states.push_back(spec.handle(pos));
  for (int a : moves) {
    const std::vector<ActionId> legal = gw_legal_actions(spec, pos);
    EXPECT_NE(std::find(legal.begin(), legal.end(), ActionId{a}), legal.end()) << "illegal test move";
    const TransitionResult t = gw_step(spec, pos, ActionId{a});
    seg.actions.push_back(ActionId{a});
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

SearchConfig base_config(std::uint64_t seed = 0) {
  SearchConfig cfg;
  cfg.gamma = 0.9;
  cfg.rng_seed = seed;
  cfg.num_simulations = 50;
  return cfg;
}

void expect_same(const SearchResult& a, const SearchResult& b) {
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.child_visits, b.child_visits);
  EXPECT_EQ(a.root_value, b.root_value);
  EXPECT_EQ(a.child_q, b.child_q);
}

int visits_of(const SearchResult& r, int action) {
  for (std::size_t i = 0; i < r.actions.size(); ++i)
    if (r.actions[i].index == action) return r.child_visits[i];
  return -1;
}

double q_of(const SearchResult& r, int action) {
  for (std::size_t i = 0; i < r.actions.size(); ++i)
    if (r.actions[i].index == action) return r.child_q[i];
  return -1e300;
}

class ReuseTest : public ::testing::Test {
 protected:
  GridWorldSpec maze = GridWorldSpec::walled_7x7();
  GridWorldModel oracle{maze, make_oracle_predictor(0.9)};
  GridWorldModel rollout{maze, make_rollout_predictor(RolloutOptions{RolloutMode::kLibrary, 0.9, 1000})};
};

}  // namespace

TEST(ReuseIndex, Formula) {
  SearchConfig cfg;
  cfg.gamma = 0.997;
  const RootReuseContext ctx{ActionId{0}, 2.0, 1.0, RewardSource::kStored};
  EXPECT_NEAR(reuse_index(ctx, cfg), 2.994, 1e-12);
}

TEST(ReuseSelect, ConstantBeatsWeakerChildren) {
  SearchTree tree(StateHandle{0});
  Prediction p;
  p.actions = {ActionId{0}, ActionId{1}, ActionId{2}};
  p.prior = {0.0, 0.0, 1.0};
  expand(tree, 0, p);
  // Children 0 and 1 score their Q (prior 0), both below 0.5.
  tree.node(1).visit_count = 2;
  tree.node(1).value_sum = 0.4;
  tree.node(2).visit_count = 2;
  tree.node(2).value_sum = 0.6;
  SearchConfig cfg;
  cfg.gamma = 1.0;
  const RootReuseContext ctx{ActionId{2}, 0.5, 0.0, RewardSource::kStored};
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    EXPECT_EQ(select_root_child_reuse(tree, ctx, cfg, rng), 3);
  }
}

TEST(ReuseSelect, MissingReusedActionIsContractViolation) {
  SearchTree tree(StateHandle{0});
  Prediction p;
  p.actions = {ActionId{0}, ActionId{1}};
  p.prior = {0.5, 0.5};
  expand(tree, 0, p);
  Rng rng(0);
  try {
    select_root_child_reuse(tree, RootReuseContext{ActionId{3}, 0.0, 0.0, RewardSource::kStored}, SearchConfig{}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kContractViolation);
  }
}

TEST_F(ReuseTest, LargeReusedValueTakesMajorityWithFewerCalls) {
  // Prior concentrated on 'right', the reused action, which carries a large constant.
  GridWorldModel peaked(maze, [](const GridWorldSpec& spec, Cell c, std::uint64_t) {
    Prediction p = uniform_prediction(spec, c, 0.0);
    for (std::size_t i = 0; i < p.actions.size(); ++i) p.prior[i] = p.actions[i].index == kRight ? 0.97 : 0.01;
    double total = 0;
    for (double x : p.prior) total += x;
    for (double& x : p.prior) x /= total;
    return p;
  });
  SearchConfig cfg = base_config(3);
  MetricsLedger plain_ledger, reuse_ledger;
  Evaluator plain_ev(peaked, plain_ledger), reuse_ev(peaked, reuse_ledger);
  const StateHandle root = maze.handle({5, 5});
  const SearchResult plain = run_mcts(root, plain_ev, cfg);
  const RootReuseContext ctx{ActionId{kRight}, 5.0, 0.0, RewardSource::kStored};
  const SearchResult reuse = reuse_mcts(root, ctx, reuse_ev, cfg);
  EXPECT_GT(2 * visits_of(reuse, kRight), cfg.num_simulations);
  EXPECT_LT(reuse_ledger.snapshot().dynamics_calls, plain_ledger.snapshot().dynamics_calls);
}

TEST_F(ReuseTest, ReusedChildQIsExactConstant) {
  const double m = 1.0;  // (6,5) is one step from the goal, so its exact value is 1
  const RootReuseContext ctx{ActionId{kDown}, m, 0.0, RewardSource::kStored};
  SearchConfig cfg = base_config(8);
  MetricsLedger ledger;
  Evaluator ev(oracle, ledger);
  SearchTree tree(StateHandle{0});
  const SearchResult r = reuse_mcts(maze.handle({5, 5}), ctx, ev, cfg, &tree);
  ASSERT_GT(visits_of(r, kDown), 0);
  EXPECT_DOUBLE_EQ(q_of(r, kDown), 0.0 + 0.9 * m);
  const SearchNode& reused = tree.node(tree.child_for(0, ActionId{kDown}));
  // Every backup through that edge carried the same m.
  EXPECT_DOUBLE_EQ(reused.value_sum, reused.visit_count * m);
  EXPECT_FALSE(reused.expanded);
}

TEST_F(ReuseTest, NoDescentAndConservationOverSeeds) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SearchConfig cfg = base_config(seed);
    cfg.num_simulations = 20 + static_cast<int>(seed);
    MetricsLedger plain_ledger, reuse_ledger;
    Evaluator plain_ev(rollout, plain_ledger), reuse_ev(rollout, reuse_ledger);
    const Cell c{static_cast<int>(seed % 5), 0};
    const std::vector<ActionId> legal = gw_legal_actions(maze, c);
    const RootReuseContext ctx{legal[seed % legal.size()], 0.3 + 0.02 * static_cast<double>(seed), 0.0,
                               RewardSource::kStored};
    const SearchResult plain = run_mcts(maze.handle(c), plain_ev, cfg);
    const SearchResult reuse = reuse_mcts(maze.handle(c), ctx, reuse_ev, cfg);
    int total = 0;
    for (int v : reuse.child_visits) total += v;
    EXPECT_EQ(total, cfg.num_simulations);
    EXPECT_EQ(reuse.counters.expansions_below_reused, 0u);
    EXPECT_EQ(reuse.counters.reused_subtree_model_calls, 0u);
    const int reused_visits = visits_of(reuse, ctx.reused_action.index);
    EXPECT_EQ(reuse.counters.early_terminations, static_cast<std::uint64_t>(reused_visits));
    EXPECT_LE(reuse_ledger.snapshot().dynamics_calls, plain_ledger.snapshot().dynamics_calls);
    if (reused_visits > 0) EXPECT_LT(reuse_ledger.snapshot().dynamics_calls, plain_ledger.snapshot().dynamics_calls);
    EXPECT_EQ(plain.counters.early_terminations, 0u);
  }
}

TEST_F(ReuseTest, BuildContextFromStoredReward) {
  const GameSegment seg = walk(maze, {0, 0}, {kRight, kRight});
  SearchResult successor;
  successor.root_value = 0.8;
  MetricsLedger ledger;
  Evaluator ev(oracle, ledger);
  const RootReuseContext ctx = build_reuse_context(seg, 0, successor, ev, base_config());
  EXPECT_EQ(ctx.reused_action, ActionId{kRight});
  EXPECT_EQ(ctx.edge_reward, 0.0);
  EXPECT_EQ(ctx.reused_value, 0.8);
  EXPECT_EQ(ledger.snapshot().dynamics_calls, 0u);
}

TEST_F(ReuseTest, ModelRewardMatchesStoredAndCostsOneCall) {
  const GameSegment seg = walk(maze, {6, 4}, {kRight, kRight});
  ASSERT_TRUE(seg.ends_terminal);
  SearchResult successor;
  successor.root_value = 1.0;
  SearchConfig cfg = base_config();
  cfg.reward_source = RewardSource::kModel;
  MetricsLedger ledger;
  Evaluator ev(oracle, ledger);
  const RootReuseContext ctx = build_reuse_context(seg, 0, successor, ev, cfg);
  EXPECT_EQ(ctx.edge_reward, seg.rewards[0]);
  EXPECT_EQ(ledger.snapshot().dynamics_calls, 1u);
}

TEST_F(ReuseTest, LengthOneSegmentIsPlainSearch) {
  GameSegment seg;
  seg.states = {maze.handle({2, 0})};
  seg.ends_terminal = false;
  MetricsLedger ledger;
  Evaluator ev(rollout, ledger);
  SearchConfig cfg = base_config(12);
  const std::vector<SearchResult> back = search_backwards(seg, ev, cfg);
  ASSERT_EQ(back.size(), 1u);
  SearchConfig one = cfg;
  one.rng_seed = derive_seed(cfg.rng_seed, 0);
  expect_same(back[0], run_mcts(seg.states[0], ev, one));
  EXPECT_EQ(ledger.snapshot().early_terminations, 0u);
}

TEST_F(ReuseTest, TargetsCoverEveryRoot) {
  const GameSegment seg = walk(maze, {0, 0}, {kRight, kRight, kRight, kDown, kLeft});
  MetricsLedger ledger;
  Evaluator ev(rollout, ledger);
  const std::vector<SearchResult> back = search_backwards(seg, ev, base_config(2));
  ASSERT_EQ(back.size(), seg.num_roots());
  for (std::size_t t = 0; t < back.size(); ++t) {
    double total = 0;
    for (double p : back[t].visit_distribution) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(back[t].reused_action.has_value(), t + 1 < back.size());
  }
}

TEST_F(ReuseTest, BatchOfOneEqualsSequential) {
  const GameSegment seg = walk(maze, {0, 0}, {kRight, kLeft, kDown, kDown});
  MetricsLedger ledger;
  Evaluator ev(rollout, ledger);
  SearchConfig cfg = base_config(21);
  const GameSegment* ptrs[] = {&seg};
  const ReanalyzeBatchResult batch = reanalyze_batch(ptrs, ev, cfg);
  SearchConfig seq_cfg = cfg;
  seq_cfg.rng_seed = derive_seed(cfg.rng_seed, 0);
  const std::vector<SearchResult> seq = search_backwards(seg, ev, seq_cfg);
  ASSERT_EQ(batch.per_segment[0].size(), seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) expect_same(batch.per_segment[0][t], seq[t]);
}

TEST_F(ReuseTest, BatchEqualsSequentialAcrossLengths) {
  std::vector<GameSegment> segs{
      walk(maze, {0, 0}, {kDown, kDown, kRight, kDown}),
      walk(maze, {6, 4}, {kRight, kRight}),  // terminal tail
      walk(maze, {4, 0}, {kUp, kUp, kRight, kDown, kDown, kDown}),
      walk(maze, {0, 0}, {kDown, kDown, kDown, kRight}),
      walk(maze, {2, 1}, {kLeft}),
  };
  std::vector<const GameSegment*> ptrs;
  for (const GameSegment& s : segs) ptrs.push_back(&s);
  for (bool reuse : {true, false}) {
    SearchConfig cfg = base_config(31);
    cfg.reuse_enabled = reuse;
    MetricsLedger batch_ledger, seq_ledger;
    Evaluator batch_ev(rollout, batch_ledger), seq_ev(rollout, seq_ledger);
    const ReanalyzeBatchResult batch = reanalyze_batch(ptrs, batch_ev, cfg);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      SearchConfig seq_cfg = cfg;
      seq_cfg.rng_seed = derive_seed(cfg.rng_seed, i);
      const std::vector<SearchResult> seq = search_backwards(segs[i], seq_ev, seq_cfg);
      ASSERT_EQ(batch.per_segment[i].size(), seq.size());
      for (std::size_t t = 0; t < seq.size(); ++t) expect_same(batch.per_segment[i][t], seq[t]);
    }
    EXPECT_EQ(batch_ledger.snapshot().dynamics_calls, seq_ledger.snapshot().dynamics_calls);
    EXPECT_LT(batch_ledger.snapshot().batch_calls, seq_ledger.snapshot().batch_calls);
  }
}

TEST_F(ReuseTest, ReuseCutsDynamicsCallsOnSegments) {
  std::vector<GameSegment> segs;
  for (int i = 0; i < 6; ++i) segs.push_back(walk(maze, {0, 0}, {kDown, kDown, kRight, kDown, kDown, kRight}));
  std::vector<const GameSegment*> ptrs;
  for (const GameSegment& s : segs) ptrs.push_back(&s);
  SearchConfig cfg = base_config(5);
  MetricsLedger plain_ledger, reuse_ledger;
  Evaluator plain_ev(oracle, plain_ledger), reuse_ev(oracle, reuse_ledger);
  cfg.reuse_enabled = false;
  reanalyze_batch(ptrs, plain_ev, cfg);
  cfg.reuse_enabled = true;
  reanalyze_batch(ptrs, reuse_ev, cfg);
  EXPECT_LT(reuse_ledger.snapshot().dynamics_calls, plain_ledger.snapshot().dynamics_calls);
  EXPECT_GT(reuse_ledger.snapshot().early_terminations, 0u);
  EXPECT_EQ(plain_ledger.snapshot().early_terminations, 0u);
}
