#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "rezero/errors.h"
#include "rezero/gridworld.h"
#include "rezero/mcts.h"

using namespace rezero;

namespace {

Prediction uniform(int k) {
  Prediction p;
  for (int i = 0; i < k; ++i) {
    p.actions.push_back(ActionId{i});
    p.prior.push_back(1.0 / k);
  }
  return p;
}

Prediction with_priors(std::vector<double> priors) {
  Prediction p;
  for (std::size_t i = 0; i < priors.size(); ++i) p.actions.push_back(ActionId{static_cast<int>(i)});
  p.prior = std::move(priors);
  return p;
}

SearchConfig quiet_config() {
  SearchConfig cfg;
  cfg.root_noise_enabled = false;
  cfg.gamma = 0.9;
  return cfg;
}

// Recursive visit conservation: N(node) == sum of child visits + evaluations stopped at node.
void check_conservation(const SearchTree& tree, NodeIndex n) {
  const SearchNode& node = tree.node(n);
  if (!node.expanded) return;
  const int below = tree.child_visit_sum(n);
  // The root's own prediction is never backed up; any other expanded node
  // also counts the one simulation that expanded it.
  EXPECT_EQ(node.visit_count - below, n == tree.root() ? 0 : 1) << "node " << n;
  for (NodeIndex c : tree.children(n)) check_conservation(tree, c);
}

}  // namespace

TEST(Ucb, UnvisitedChildFormula) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, with_priors({1.0, 0.0}));
  tree.node(2).visit_count = 4;  // sum_b N = 4 via the sibling
  tree.node(2).value_sum = 0.0;
  SearchConfig cfg;
  cfg.c_puct = 1.25;
  EXPECT_DOUBLE_EQ(ucb_score(tree, 0, 1, cfg), 2.5);
}

TEST(Ucb, ZeroPriorScoresQ) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, with_priors({1.0, 0.0}));
  SearchNode& c = tree.node(2);
  c.visit_count = 3;
  c.value_sum = 1.5;
  c.reward = 0.2;
  SearchConfig cfg;
  cfg.gamma = 0.9;
  EXPECT_DOUBLE_EQ(ucb_score(tree, 0, 2, cfg), 0.2 + 0.9 * 0.5);
  EXPECT_DOUBLE_EQ(ucb_score(tree, 0, 2, cfg), child_q(tree, 0, 2, cfg));
}

TEST(Ucb, ParentMeanForUnvisitedChildren) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, uniform(2));
  tree.node(0).visit_count = 2;
  tree.node(0).value_sum = 0.8;
  SearchConfig cfg;
  EXPECT_EQ(child_q(tree, 0, 1, cfg), 0.0);
  cfg.unvisited_q_parent_mean = true;
  EXPECT_DOUBLE_EQ(child_q(tree, 0, 1, cfg), 0.4);
}

TEST(SelectChild, SingleChild) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, uniform(1));
  Rng rng(1);
  EXPECT_EQ(select_child(tree, 0, SearchConfig{}, rng), 1);
}

TEST(SelectChild, StrictArgmax) {
  // Scores 2.5, 1.0, 1.0 at sum N = 4 with c = 1.25.
  SearchTree tree(StateHandle{0});
  expand(tree, 0, with_priors({0.5, 0.25, 0.25}));
  SearchConfig cfg;
  cfg.c_puct = 1.25;
  cfg.gamma = 1.0;
  tree.node(1).visit_count = 1;
  tree.node(1).value_sum = 2.5 - 1.25 * 0.5 * 2.0 / 2.0;
  tree.node(2).visit_count = 1;
  tree.node(2).value_sum = 1.0 - 1.25 * 0.25 * 2.0 / 2.0;
  tree.node(3).visit_count = 2;
  tree.node(3).value_sum = 2.0 * (1.0 - 1.25 * 0.25 * 2.0 / 3.0);
  EXPECT_NEAR(ucb_score(tree, 0, 1, cfg), 2.5, 1e-12);
  EXPECT_NEAR(ucb_score(tree, 0, 2, cfg), 1.0, 1e-12);
  EXPECT_NEAR(ucb_score(tree, 0, 3, cfg), 1.0, 1e-12);
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    EXPECT_EQ(select_child(tree, 0, cfg, rng), 1);
  }
}

TEST(SelectChild, TiesSplitEvenly) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, uniform(2));
  Rng rng(2024);
  int first = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) first += select_child(tree, 0, SearchConfig{}, rng) == 1;
  EXPECT_NEAR(first / static_cast<double>(draws), 0.5, 0.05);
}

TEST(SelectChild, UnexpandedNodeIsContractViolation) {
  SearchTree tree(StateHandle{0});
  Rng rng(1);
  try {
    select_child(tree, 0, SearchConfig{}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kContractViolation);
  }
}

TEST(SelectChild, ArgmaxInvariantUnderPriorScaling) {
  SearchTree a(StateHandle{0});
  SearchTree b(StateHandle{0});
  expand(a, 0, with_priors({0.2, 0.5, 0.3}));
  // Multiply by 3 and renormalize: the same distribution.
  const double s = 0.6 + 1.5 + 0.9;
  expand(b, 0, with_priors({0.6 / s, 1.5 / s, 0.9 / s}));
  for (SearchTree* t : {&a, &b}) {
    t->node(1).visit_count = 2;
    t->node(1).value_sum = 0.6;
    t->node(2).visit_count = 1;
    t->node(2).value_sum = 0.1;
  }
  Rng ra(5), rb(5);
  EXPECT_EQ(select_child(a, 0, SearchConfig{}, ra), select_child(b, 0, SearchConfig{}, rb));
}

TEST(Expand, CopiesPriors) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, with_priors({0.7, 0.3}));
  EXPECT_DOUBLE_EQ(tree.node(1).prior, 0.7);
  EXPECT_DOUBLE_EQ(tree.node(2).prior, 0.3);
  EXPECT_THROW(expand(tree, 0, with_priors({0.7, 0.3})), Error);
}

TEST(Expand, RejectsTerminalAndBadPriors) {
  SearchTree tree(StateHandle{0});
  tree.node(0).terminal = true;
  EXPECT_THROW(expand(tree, 0, uniform(2)), Error);
  SearchTree other(StateHandle{0});
  EXPECT_THROW(expand(other, 0, with_priors({0.7, 0.7})), Error);
}

TEST(Backpropagate, RootOnly) {
  SearchTree tree(StateHandle{0});
  const NodeIndex path[] = {0};
  backpropagate(tree, path, 0.37, quiet_config());
  EXPECT_EQ(tree.node(0).visit_count, 1);
  EXPECT_DOUBLE_EQ(tree.node(0).value_sum, 0.37);
}

TEST(Backpropagate, DiscountsAlongDepthThreePath) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, uniform(1));
  tree.node(1).resolved = true;
  expand(tree, 1, uniform(1));
  tree.node(2).resolved = true;
  expand(tree, 2, uniform(1));
  const NodeIndex path[] = {0, 1, 2, 3};
  backpropagate(tree, path, 1.0, quiet_config());
  EXPECT_NEAR(tree.node(0).value_sum, 0.729, 1e-12);
  EXPECT_NEAR(tree.node(1).value_sum, 0.81, 1e-12);
  EXPECT_NEAR(tree.node(2).value_sum, 0.9, 1e-12);
  EXPECT_NEAR(tree.node(3).value_sum, 1.0, 1e-12);
}

TEST(Noise, ZeroFractionKeepsPriors) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, with_priors({0.7, 0.3}));
  SearchConfig cfg;
  cfg.noise_fraction = 0.0;
  Rng rng(3);
  add_exploration_noise(tree, 0, cfg, rng);
  EXPECT_DOUBLE_EQ(tree.node(1).prior, 0.7);
  EXPECT_DOUBLE_EQ(tree.node(2).prior, 0.3);
}

TEST(Noise, SingleChildStaysOne) {
  SearchTree tree(StateHandle{0});
  expand(tree, 0, uniform(1));
  SearchConfig cfg;
  cfg.noise_fraction = 1.0;
  Rng rng(3);
  add_exploration_noise(tree, 0, cfg, rng);
  EXPECT_DOUBLE_EQ(tree.node(1).prior, 1.0);
}

class GridSearch : public ::testing::Test {
 protected:
  GridWorldSpec open = GridWorldSpec::open_4x4();
  GridWorldSpec maze = GridWorldSpec::walled_7x7();
};

TEST_F(GridSearch, OneSimulationIsOneHot) {
  GridWorldModel model(maze, make_uniform_zero_predictor());
  MetricsLedger ledger;
  Evaluator ev(model, ledger);
  SearchConfig cfg = quiet_config();
  cfg.num_simulations = 1;
  const SearchResult r = run_mcts(maze.handle({0, 0}), ev, cfg);
  int ones = 0;
  for (int v : r.child_visits) ones += v == 1;
  EXPECT_EQ(ones, 1);
  double total = 0;
  for (double p : r.visit_distribution) {
    EXPECT_TRUE(p == 0.0 || p == 1.0);
    total += p;
  }
  EXPECT_EQ(total, 1.0);
}

TEST_F(GridSearch, FindsOneStepGoal) {
  GridWorldModel model(open, make_uniform_zero_predictor());
  MetricsLedger ledger;
  Evaluator ev(model, ledger);
  SearchConfig cfg = quiet_config();
  cfg.num_simulations = 100;
  const SearchResult r = run_mcts(open.handle({0, 2}), ev, cfg);
  int right = -1, total = 0;
  for (std::size_t i = 0; i < r.actions.size(); ++i) {
    total += r.child_visits[i];
    if (r.actions[i].index == 3) right = r.child_visits[i];
  }
  EXPECT_EQ(total, 100);
  EXPECT_GT(2 * right, total);
}

TEST_F(GridSearch, RejectsTerminalRootAndZeroSimulations) {
  GridWorldModel model(maze, make_uniform_zero_predictor());
  MetricsLedger ledger;
  Evaluator ev(model, ledger);
  EXPECT_THROW(run_mcts(maze.handle(maze.goal), ev, quiet_config()), Error);
  SearchConfig zero = quiet_config();
  zero.num_simulations = 0;
  EXPECT_THROW(run_mcts(maze.handle({0, 0}), ev, zero), Error);
}

TEST_F(GridSearch, ConservationAndBoundsOverSeeds) {
  GridWorldModel model(maze, make_rollout_predictor(RolloutOptions{RolloutMode::kLibrary, 0.9, 1000}));
  MetricsLedger ledger;
  Evaluator ev(model, ledger);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SearchConfig cfg;
    cfg.gamma = 0.9;
    cfg.rng_seed = seed;
    cfg.num_simulations = 10 + static_cast<int>(seed) * 7;
    cfg.root_noise_enabled = seed % 2 == 0;
    SearchTree tree(StateHandle{0});
    const SearchResult r = run_mcts(maze.handle({static_cast<int>(seed % 3), 0}), ev, cfg, &tree);
    int total = 0;
    for (int v : r.child_visits) total += v;
    EXPECT_EQ(total, cfg.num_simulations);
    EXPECT_EQ(tree.node(0).visit_count, cfg.num_simulations);
    check_conservation(tree, 0);
    for (NodeIndex n = 1; n < static_cast<NodeIndex>(tree.size()); ++n) {
      const SearchNode& node = tree.node(n);
      if (node.visit_count == 0) continue;
      const double q = node.reward + cfg.gamma * node.mean_value();
      EXPECT_GE(q, -1e-12);
      EXPECT_LE(q, 1.0 / (1.0 - cfg.gamma) + 1e-12);
    }
  }
}

TEST_F(GridSearch, DeterministicUnderSeed) {
  GridWorldModel model(maze, make_rollout_predictor(RolloutOptions{RolloutMode::kLibrary, 0.9, 1000}));
  MetricsLedger ledger;
  Evaluator ev(model, ledger);
  SearchConfig cfg;
  cfg.gamma = 0.9;
  cfg.rng_seed = 99;
  const SearchResult a = run_mcts(maze.handle({0, 0}), ev, cfg);
  const SearchResult b = run_mcts(maze.handle({0, 0}), ev, cfg);
  EXPECT_EQ(a.child_visits, b.child_visits);
  EXPECT_EQ(a.root_value, b.root_value);
  EXPECT_EQ(a.child_q, b.child_q);
}

TEST_F(GridSearch, BatchedEqualsSequential) {
  GridWorldModel model(maze, make_rollout_predictor(RolloutOptions{RolloutMode::kLibrary, 0.9, 1000}));
  std::vector<StateHandle> roots;
  for (Cell c : {Cell{0, 0}, Cell{3, 3}, Cell{5, 5}, Cell{6, 0}, Cell{0, 6}}) roots.push_back(maze.handle(c));
  SearchConfig cfg;
  cfg.gamma = 0.9;
  cfg.rng_seed = 4;
  MetricsLedger batched_ledger, seq_ledger;
  Evaluator batched_ev(model, batched_ledger), seq_ev(model, seq_ledger);
  const std::vector<SearchResult> batched = run_mcts_batched(roots, batched_ev, cfg);
  for (std::size_t i = 0; i < roots.size(); ++i) {
    SearchConfig one = cfg;
    one.rng_seed = derive_seed(cfg.rng_seed, i);
    const SearchResult r = run_mcts(roots[i], seq_ev, one);
    EXPECT_EQ(batched[i].child_visits, r.child_visits);
    EXPECT_EQ(batched[i].root_value, r.root_value);
    EXPECT_EQ(batched[i].child_q, r.child_q);
  }
  // Same work, fewer calls.
  EXPECT_EQ(batched_ledger.snapshot().dynamics_calls, seq_ledger.snapshot().dynamics_calls);
  EXPECT_LT(batched_ledger.snapshot().batch_calls, seq_ledger.snapshot().batch_calls);
}

TEST_F(GridSearch, ArgmaxMatchesStraightLineReevaluation) {
  // Three-child root after 10 simulations: recompute PUCT from the recorded (Q, P, N).
  GridWorldSpec spec{3, 3, {1, 1}, {2, 2}, {{0, 1}}};
  GridWorldModel model(spec, make_rollout_predictor(RolloutOptions{RolloutMode::kLibrary, 0.9, 1000}));
  MetricsLedger ledger;
  Evaluator ev(model, ledger);
  SearchConfig cfg = quiet_config();
  cfg.num_simulations = 10;
  cfg.rng_seed = 17;
  SearchTree tree(StateHandle{0});
  run_mcts(spec.handle({1, 1}), ev, cfg, &tree);
  const std::vector<NodeIndex> kids = tree.children(0);
  ASSERT_EQ(kids.size(), 3u);
  double n_total = 0;
  for (NodeIndex c : kids) n_total += tree.node(c).visit_count;
  double best = -1e300;
  NodeIndex expect = kNoNode;
  for (NodeIndex c : kids) {
    const SearchNode& k = tree.node(c);
    const double q = k.visit_count ? k.reward + 0.9 * k.value_sum / k.visit_count : 0.0;
    const double u = q + 1.25 * k.prior * std::sqrt(n_total) / (1 + k.visit_count);
    if (u > best) {
      best = u;
      expect = c;
    }
  }
  Rng rng(0);
  EXPECT_EQ(select_child(tree, 0, cfg, rng), expect);
}
