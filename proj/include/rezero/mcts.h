#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rezero/rng.h"
#include "rezero/world_model.h"

namespace rezero {

enum class RewardSource { kStored, kModel };

struct SearchConfig {
  int num_simulations = 50;
  double c_puct = 1.25;
  double gamma = 0.997;
  double dirichlet_alpha = 0.3;
  double noise_fraction = 0.25;
  bool root_noise_enabled = true;
  bool value_normalization = false;
  // MuZero-style variant: an unvisited child's Q reads as the parent's mean value.
  bool unvisited_q_parent_mean = false;
  std::uint64_t rng_seed = 0;
  bool reuse_enabled = true;
  RewardSource reward_source = RewardSource::kStored;

  void validate() const;
};

/// The pre-evaluated child of a reuse search: selecting `reused_action` at
/// the root scores edge_reward + gamma * reused_value and ends the simulation.
struct RootReuseContext {
  ActionId reused_action;
  double reused_value = 0.0;
  double edge_reward = 0.0;
  RewardSource reward_source = RewardSource::kStored;

  void validate() const;
};

// Constant root index of the reused action.
inline double reuse_index(const RootReuseContext& ctx, const SearchConfig& cfg) {
  return ctx.edge_reward + cfg.gamma * ctx.reused_value;
}

using NodeIndex = std::int32_t;
inline constexpr NodeIndex kNoNode = -1;

struct SearchNode {
  ActionId action;  // incoming edge
  double prior = 0.0;
  int visit_count = 0;
  double value_sum = 0.0;
  double reward = 0.0;  // reward on the incoming edge
  StateHandle state;
  NodeIndex parent = kNoNode;
  NodeIndex first_child = kNoNode;
  int num_children = 0;
  bool resolved = false;  // dynamics applied: state, reward and terminal are known
  bool terminal = false;
  bool expanded = false;
  bool reused = false;

  double mean_value() const { return visit_count > 0 ? value_sum / visit_count : 0.0; }
};

/// Running min/max of backed-up Q values, used for optional normalization.
class MinMaxStats {
 public:
  void update(double v) {
    min_ = std::min(min_, v);
    max_ = std::max(max_, v);
  }
  double normalize(double v) const { return max_ > min_ ? (v - min_) / (max_ - min_) : v; }

 private:
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
};

/// Arena-allocated search tree. Children of a node are contiguous; hold
/// NodeIndex values, not references, across expansions.
class SearchTree {
 public:
  explicit SearchTree(StateHandle root_state);

  NodeIndex root() const { return 0; }
  const SearchNode& node(NodeIndex i) const { return nodes_[static_cast<std::size_t>(i)]; }
  SearchNode& node(NodeIndex i) { return nodes_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return nodes_.size(); }

  std::vector<NodeIndex> children(NodeIndex parent) const;
  NodeIndex child_for(NodeIndex parent, ActionId a) const;
  int child_visit_sum(NodeIndex parent) const;
  bool is_descendant_of(NodeIndex n, NodeIndex ancestor) const;

  MinMaxStats& min_max() { return min_max_; }
  const MinMaxStats& min_max() const { return min_max_; }

 private:
  friend void expand(SearchTree& tree, NodeIndex n, const Prediction& prediction);

  std::vector<SearchNode> nodes_;
  MinMaxStats min_max_;
};

// Q(s,a) = r(s,a) + gamma * mean value of the child; 0 for unvisited children.
double child_q(const SearchTree& tree, NodeIndex parent, NodeIndex child, const SearchConfig& cfg);

// Q(s,a) + c * P(s,a) * sqrt(sum_b N(s,b)) / (1 + N(s,a)).
double ucb_score(const SearchTree& tree, NodeIndex parent, NodeIndex child, const SearchConfig& cfg);

// Argmax of ucb_score over the children of `n`; exact ties broken uniformly with `rng`.
NodeIndex select_child(const SearchTree& tree, NodeIndex n, const SearchConfig& cfg, Rng& rng);

// Creates one child per predicted legal action. The child's state and edge
// reward are resolved lazily when a simulation first reaches it.
void expand(SearchTree& tree, NodeIndex n, const Prediction& prediction);

// Walks leaf to root with G <- r_edge + gamma * G, starting from G = leaf_value.
void backpropagate(SearchTree& tree, std::span<const NodeIndex> path, double leaf_value, const SearchConfig& cfg);

// Mixes Dirichlet(alpha) noise into the root priors with weight noise_fraction.
void add_exploration_noise(SearchTree& tree, NodeIndex root, const SearchConfig& cfg, Rng& rng);

struct SearchCounters {
  std::uint64_t simulations = 0;
  std::uint64_t expansions = 0;
  std::uint64_t dynamics_calls = 0;
  std::uint64_t prediction_calls = 0;
  std::uint64_t early_terminations = 0;
  std::uint64_t expansions_below_reused = 0;
  std::uint64_t reused_subtree_model_calls = 0;
};

struct SearchResult {
  std::vector<ActionId> actions;  // root children in legal-action order
  std::vector<int> child_visits;
  std::vector<double> visit_distribution;
  std::vector<double> child_q;
  double root_value = 0.0;  // root value_sum / root visit_count
  SearchCounters counters;
  std::optional<ActionId> reused_action;
};

struct SearchJob {
  StateHandle root_state;
  std::uint64_t seed = 0;
  std::optional<RootReuseContext> reuse;
};

/// Runs every job for cfg.num_simulations simulations. At each simulation
/// step the leaf evaluations of all trees are grouped into one batched call;
/// each tree owns its rng, so results do not depend on how jobs are grouped.
std::vector<SearchResult> run_search_jobs(std::span<const SearchJob> jobs, Evaluator& evaluator,
                                          const SearchConfig& cfg, std::vector<SearchTree>* trees_out = nullptr);

// Plain search seeded with cfg.rng_seed.
SearchResult run_mcts(StateHandle root_state, Evaluator& evaluator, const SearchConfig& cfg,
                      SearchTree* tree_out = nullptr);

// Root i is searched with seed derive_seed(cfg.rng_seed, i).
std::vector<SearchResult> run_mcts_batched(std::span<const StateHandle> roots, Evaluator& evaluator,
                                           const SearchConfig& cfg);

}  // namespace rezero
