#include "rezero/mcts.h"

#include <algorithm>
#include <cmath>

#include "rezero/errors.h"

namespace rezero {

void SearchConfig::validate() const {
  require(num_simulations > 0, ErrorCode::kConfig, "num_simulations must be positive");
  require(c_puct > 0.0, ErrorCode::kConfig, "c_puct must be positive");
  require(gamma > 0.0 && gamma <= 1.0, ErrorCode::kConfig, "gamma must lie in (0, 1]");
  require(dirichlet_alpha > 0.0, ErrorCode::kConfig, "dirichlet_alpha must be positive");
  require(noise_fraction >= 0.0 && noise_fraction <= 1.0, ErrorCode::kConfig, "noise_fraction must lie in [0, 1]");
}

void RootReuseContext::validate() const {
  require(std::isfinite(reused_value) && std::isfinite(edge_reward), ErrorCode::kContractViolation,
          "reuse context values must be finite");
}

SearchTree::SearchTree(StateHandle root_state) {
  SearchNode root;
  root.state = root_state;
  root.resolved = true;
  root.prior = 1.0;
  nodes_.push_back(root);
}

std::vector<NodeIndex> SearchTree::children(NodeIndex parent) const {
  const SearchNode& p = node(parent);
  std::vector<NodeIndex> out(static_cast<std::size_t>(p.num_children));
  for (int i = 0; i < p.num_children; ++i) out[static_cast<std::size_t>(i)] = p.first_child + i;
  return out;
}

NodeIndex SearchTree::child_for(NodeIndex parent, ActionId a) const {
  const SearchNode& p = node(parent);
  for (int i = 0; i < p.num_children; ++i) {
    if (node(p.first_child + i).action == a) return p.first_child + i;
  }
  return kNoNode;
}

int SearchTree::child_visit_sum(NodeIndex parent) const {
  const SearchNode& p = node(parent);
  int total = 0;
  for (int i = 0; i < p.num_children; ++i) total += node(p.first_child + i).visit_count;
  return total;
}

bool SearchTree::is_descendant_of(NodeIndex n, NodeIndex ancestor) const {
  for (NodeIndex cur = node(n).parent; cur != kNoNode; cur = node(cur).parent) {
    if (cur == ancestor) return true;
  }
  return false;
}

double child_q(const SearchTree& tree, NodeIndex parent, NodeIndex child, const SearchConfig& cfg) {
  const SearchNode& c = tree.node(child);
  if (c.visit_count == 0) return cfg.unvisited_q_parent_mean ? tree.node(parent).mean_value() : 0.0;
  return c.reward + cfg.gamma * c.mean_value();
}

double ucb_score(const SearchTree& tree, NodeIndex parent, NodeIndex child, const SearchConfig& cfg) {
  const SearchNode& c = tree.node(child);
  double q = child_q(tree, parent, child, cfg);
  if (cfg.value_normalization && c.visit_count > 0) q = tree.min_max().normalize(q);
  const double total = static_cast<double>(tree.child_visit_sum(parent));
  return q + cfg.c_puct * c.prior * std::sqrt(total) / (1.0 + c.visit_count);
}

NodeIndex select_child(const SearchTree& tree, NodeIndex n, const SearchConfig& cfg, Rng& rng) {
  const SearchNode& node = tree.node(n);
  require(node.expanded && node.num_children > 0, ErrorCode::kContractViolation,
          "select_child needs an expanded node with children");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<NodeIndex> best_children;
  for (int i = 0; i < node.num_children; ++i) {
    const NodeIndex c = node.first_child + i;
    const double score = ucb_score(tree, n, c, cfg);
    if (score > best) {
      best = score;
      best_children.assign(1, c);
    } else if (score == best) {
      best_children.push_back(c);
    }
  }
  if (best_children.size() == 1) return best_children.front();
  std::uniform_int_distribution<std::size_t> pick(0, best_children.size() - 1);
  return best_children[pick(rng)];
}

void expand(SearchTree& tree, NodeIndex n, const Prediction& prediction) {
  {
    const SearchNode& node = tree.node(n);
    require(!node.expanded, ErrorCode::kContractViolation, "node is already expanded");
    require(!node.terminal, ErrorCode::kContractViolation, "terminal nodes are never expanded");
    require(node.resolved, ErrorCode::kContractViolation, "node state is not resolved");
  }
  prediction.validate();
  const auto first = static_cast<NodeIndex>(tree.nodes_.size());
  for (std::size_t i = 0; i < prediction.actions.size(); ++i) {
    SearchNode child;
    child.action = prediction.actions[i];
    child.prior = prediction.prior[i];
    child.parent = n;
    tree.nodes_.push_back(child);
  }
  SearchNode& node = tree.node(n);
  node.first_child = first;
  node.num_children = static_cast<int>(prediction.actions.size());
  node.expanded = true;
}

void backpropagate(SearchTree& tree, std::span<const NodeIndex> path, double leaf_value, const SearchConfig& cfg) {
  require(!path.empty(), ErrorCode::kPrecondition, "backpropagate needs a non-empty path");
  double g = leaf_value;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    SearchNode& node = tree.node(*it);
    node.value_sum += g;
    node.visit_count += 1;
    tree.min_max().update(node.reward + cfg.gamma * node.mean_value());
    g = node.reward + cfg.gamma * g;
  }
}

void add_exploration_noise(SearchTree& tree, NodeIndex root, const SearchConfig& cfg, Rng& rng) {
  const SearchNode& r = tree.node(root);
  require(r.expanded, ErrorCode::kPrecondition, "exploration noise needs an expanded root");
  const int k = r.num_children;
  if (k == 0) return;
  std::vector<double> noise(static_cast<std::size_t>(k));
  std::gamma_distribution<double> gamma_draw(cfg.dirichlet_alpha, 1.0);
  double total = 0.0;
  for (double& d : noise) {
    d = gamma_draw(rng);
    total += d;
  }
  if (total <= 0.0) {
    // Every gamma draw underflowed; fall back to the symmetric point.
    std::fill(noise.begin(), noise.end(), 1.0 / k);
  } else {
    for (double& d : noise) d /= total;
  }
  const double f = cfg.noise_fraction;
  double prior_sum = 0.0;
  for (int i = 0; i < k; ++i) {
    SearchNode& c = tree.node(r.first_child + i);
    c.prior = (1.0 - f) * c.prior + f * noise[static_cast<std::size_t>(i)];
    prior_sum += c.prior;
  }
  if (prior_sum > 0.0 && prior_sum != 1.0) {
    for (int i = 0; i < k; ++i) tree.node(r.first_child + i).prior /= prior_sum;
  }
}

}  // namespace rezero
