#include <utility>

#include "rezero/errors.h"
#include "rezero/mcts.h"
#include "rezero/reuse.h"

namespace rezero {
namespace {

struct JobState {
  JobState(StateHandle root_state, std::uint64_t seed, std::optional<RootReuseContext> ctx)
      : tree(root_state), rng(seed), reuse(std::move(ctx)) {}

  SearchTree tree;
  Rng rng;
  std::optional<RootReuseContext> reuse;
  NodeIndex reused_child = kNoNode;
  SearchCounters counters;
};

struct PendingLeaf {
  std::size_t job = 0;
  std::vector<NodeIndex> path;
};

SearchResult summarize(const JobState& st, const SearchConfig& cfg) {
  const SearchTree& tree = st.tree;
  const NodeIndex root = tree.root();
  SearchResult out;
  const int total = tree.child_visit_sum(root);
  for (NodeIndex c : tree.children(root)) {
    const SearchNode& child = tree.node(c);
    out.actions.push_back(child.action);
    out.child_visits.push_back(child.visit_count);
    out.visit_distribution.push_back(total > 0 ? static_cast<double>(child.visit_count) / total : 0.0);
    out.child_q.push_back(child_q(tree, root, c, cfg));
  }
  out.root_value = tree.node(root).mean_value();
  out.counters = st.counters;
  if (st.reuse) out.reused_action = st.reuse->reused_action;
  return out;
}

}  // namespace

std::vector<SearchResult> run_search_jobs(std::span<const SearchJob> jobs, Evaluator& evaluator,
                                          const SearchConfig& cfg, std::vector<SearchTree>* trees_out) {
  cfg.validate();
  if (jobs.empty()) return {};
  const WorldModel& model = evaluator.model();

  std::vector<JobState> states;
  states.reserve(jobs.size());
  for (const SearchJob& job : jobs) {
    require(!model.is_terminal(job.root_state), ErrorCode::kPrecondition, "search root is terminal");
    if (job.reuse) job.reuse->validate();
    states.emplace_back(job.root_state, job.seed, job.reuse);
  }

  // Root wave: one prediction per tree, then expansion, noise and reuse wiring.
  std::vector<EvalQuery> queries;
  queries.reserve(states.size());
  for (JobState& st : states) {
    queries.push_back(EvalQuery{st.tree.node(st.tree.root()).state, std::nullopt, st.rng(), true});
  }
  std::vector<EvalResult> results = evaluator.batched_evaluate(queries);
  std::uint64_t total_expansions = 0;
  for (std::size_t j = 0; j < states.size(); ++j) {
    JobState& st = states[j];
    const NodeIndex root = st.tree.root();
    expand(st.tree, root, *results[j].prediction);
    st.counters.expansions += 1;
    st.counters.prediction_calls += 1;
    ++total_expansions;
    if (cfg.root_noise_enabled) add_exploration_noise(st.tree, root, cfg, st.rng);
    if (st.reuse) {
      const NodeIndex c = st.tree.child_for(root, st.reuse->reused_action);
      require(c != kNoNode, ErrorCode::kContractViolation, "reused action is not a root child");
      SearchNode& child = st.tree.node(c);
      child.reward = st.reuse->edge_reward;
      child.resolved = true;
      child.reused = true;
      st.reused_child = c;
      if (cfg.value_normalization) st.tree.min_max().update(reuse_index(*st.reuse, cfg));
    }
  }

  std::uint64_t total_sims = 0;
  std::uint64_t total_early = 0;
  std::vector<PendingLeaf> pending;
  for (int sim = 0; sim < cfg.num_simulations; ++sim) {
    pending.clear();
    queries.clear();
    for (std::size_t j = 0; j < states.size(); ++j) {
      JobState& st = states[j];
      SearchTree& tree = st.tree;
      const NodeIndex root = tree.root();
      std::vector<NodeIndex> path{root};
      NodeIndex node = root;
      bool early = false;
      while (tree.node(node).resolved && !tree.node(node).terminal) {
        const NodeIndex next = (node == root && st.reuse) ? select_root_child_reuse(tree, *st.reuse, cfg, st.rng)
                                                          : select_child(tree, node, cfg, st.rng);
        path.push_back(next);
        if (tree.node(next).reused) {
          early = true;
          break;
        }
        node = next;
      }
      if (early) {
        backpropagate(tree, path, st.reuse->reused_value, cfg);
        st.counters.early_terminations += 1;
        st.counters.simulations += 1;
        ++total_early;
        ++total_sims;
        continue;
      }
      const SearchNode& leaf = tree.node(path.back());
      if (leaf.resolved) {
        // Revisiting an absorbing state: value 0 beyond terminal, no model call.
        backpropagate(tree, path, 0.0, cfg);
        st.counters.simulations += 1;
        ++total_sims;
        continue;
      }
      const SearchNode& parent = tree.node(path[path.size() - 2]);
      queries.push_back(EvalQuery{parent.state, leaf.action, st.rng(), true});
      pending.push_back(PendingLeaf{j, std::move(path)});
    }
    if (queries.empty()) continue;
    results = evaluator.batched_evaluate(queries);
    for (std::size_t k = 0; k < pending.size(); ++k) {
      JobState& st = states[pending[k].job];
      SearchTree& tree = st.tree;
      const std::vector<NodeIndex>& path = pending[k].path;
      const NodeIndex leaf_index = path.back();
      const TransitionResult& tr = *results[k].transition;
      {
        SearchNode& leaf = tree.node(leaf_index);
        leaf.state = tr.next_state;
        leaf.reward = tr.reward;
        leaf.terminal = tr.terminal;
        leaf.resolved = true;
      }
      st.counters.dynamics_calls += 1;
      const bool below_reused = st.reused_child != kNoNode && tree.is_descendant_of(leaf_index, st.reused_child);
      if (below_reused) st.counters.reused_subtree_model_calls += 1;
      double value = 0.0;
      if (!tr.terminal) {
        const Prediction& prediction = *results[k].prediction;
        expand(tree, leaf_index, prediction);
        st.counters.expansions += 1;
        st.counters.prediction_calls += 1;
        ++total_expansions;
        if (below_reused) st.counters.expansions_below_reused += 1;
        value = prediction.value;
      }
      backpropagate(tree, path, value, cfg);
      st.counters.simulations += 1;
      ++total_sims;
    }
  }

  MetricsLedger& ledger = evaluator.ledger();
  ledger.add_simulations(total_sims);
  ledger.add_expansions(total_expansions);
  ledger.add_early_terminations(total_early);
  ledger.add_searches(states.size());

  std::vector<SearchResult> out;
  out.reserve(states.size());
  for (const JobState& st : states) out.push_back(summarize(st, cfg));
  if (trees_out) {
    trees_out->clear();
    for (JobState& st : states) trees_out->push_back(std::move(st.tree));
  }
  return out;
}

SearchResult run_mcts(StateHandle root_state, Evaluator& evaluator, const SearchConfig& cfg, SearchTree* tree_out) {
  const SearchJob job{root_state, cfg.rng_seed, std::nullopt};
  std::vector<SearchTree> trees;
  std::vector<SearchResult> r = run_search_jobs(std::span(&job, 1), evaluator, cfg, tree_out ? &trees : nullptr);
  if (tree_out) *tree_out = std::move(trees.front());
  return std::move(r.front());
}

std::vector<SearchResult> run_mcts_batched(std::span<const StateHandle> roots, Evaluator& evaluator,
                                           const SearchConfig& cfg) {
  std::vector<SearchJob> jobs;
  jobs.reserve(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) {
    jobs.push_back(SearchJob{roots[i], derive_seed(cfg.rng_seed, i), std::nullopt});
  }
  return run_search_jobs(jobs, evaluator, cfg);
}

}  // namespace rezero
