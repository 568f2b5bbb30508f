#include "rezero/reuse.h"

#include <limits>
#include <map>

#include "rezero/errors.h"

namespace rezero {

NodeIndex select_root_child_reuse(const SearchTree& tree, const RootReuseContext& ctx, const SearchConfig& cfg,
                                  Rng& rng) {
  const NodeIndex root = tree.root();
  const SearchNode& r = tree.node(root);
  require(r.expanded && r.num_children > 0, ErrorCode::kContractViolation, "reuse selection needs an expanded root");
  const NodeIndex reused = tree.child_for(root, ctx.reused_action);
  require(reused != kNoNode, ErrorCode::kContractViolation, "reused action is not a root child");

  double reused_score = reuse_index(ctx, cfg);
  if (cfg.value_normalization) reused_score = tree.min_max().normalize(reused_score);

  double best = -std::numeric_limits<double>::infinity();
  std::vector<NodeIndex> best_children;
  for (int i = 0; i < r.num_children; ++i) {
    const NodeIndex c = r.first_child + i;
    const double score = c == reused ? reused_score : ucb_score(tree, root, c, cfg);
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

SearchResult reuse_mcts(StateHandle root_state, const RootReuseContext& ctx, Evaluator& evaluator,
                        const SearchConfig& cfg, SearchTree* tree_out) {
  const SearchJob job{root_state, cfg.rng_seed, ctx};
  std::vector<SearchTree> trees;
  std::vector<SearchResult> r = run_search_jobs(std::span(&job, 1), evaluator, cfg, tree_out ? &trees : nullptr);
  if (tree_out) *tree_out = std::move(trees.front());
  return std::move(r.front());
}

RootReuseContext build_reuse_context(const GameSegment& segment, std::size_t t, const SearchResult& successor,
                                     Evaluator& evaluator, const SearchConfig& cfg) {
  require(t + 1 < segment.num_roots(), ErrorCode::kPrecondition, "reuse context needs a searched successor state");
  RootReuseContext ctx;
  ctx.reused_action = segment.actions[t];
  ctx.reused_value = successor.root_value;
  ctx.reward_source = cfg.reward_source;
  if (cfg.reward_source == RewardSource::kModel) {
    const EvalQuery q{segment.states[t], segment.actions[t], 0, false};
    ctx.edge_reward = evaluator.batched_evaluate(std::span(&q, 1)).front().transition->reward;
  } else {
    ctx.edge_reward = segment.rewards[t];
  }
  return ctx;
}

std::vector<SearchResult> search_backwards(const GameSegment& segment, Evaluator& evaluator, const SearchConfig& cfg) {
  segment.validate();
  const std::size_t roots = segment.num_roots();
  std::vector<SearchResult> out(roots);
  for (std::size_t i = roots; i-- > 0;) {
    SearchConfig step_cfg = cfg;
    step_cfg.rng_seed = derive_seed(cfg.rng_seed, i);
    if (i + 1 == roots || !cfg.reuse_enabled) {
      out[i] = run_mcts(segment.states[i], evaluator, step_cfg);
    } else {
      const RootReuseContext ctx = build_reuse_context(segment, i, out[i + 1], evaluator, cfg);
      out[i] = reuse_mcts(segment.states[i], ctx, evaluator, step_cfg);
    }
  }
  return out;
}

ReanalyzeBatchResult reanalyze_batch(std::span<const GameSegment* const> segments, Evaluator& evaluator,
                                     const SearchConfig& cfg, std::span<const std::uint64_t> segment_seeds) {
  require(segment_seeds.size() == segments.size(), ErrorCode::kPrecondition, "one seed per segment is required");
  ReanalyzeBatchResult out;
  out.per_segment.resize(segments.size());

  // Columns only line up inside a group of equal root count.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    segments[i]->validate();
    groups[segments[i]->num_roots()].push_back(i);
    out.per_segment[i].resize(segments[i]->num_roots());
  }

  std::vector<SearchJob> jobs;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    const std::size_t roots = it->first;
    const std::vector<std::size_t>& members = it->second;
    for (std::size_t t = roots; t-- > 0;) {
      jobs.clear();
      for (std::size_t i : members) {
        const GameSegment& seg = *segments[i];
        SearchJob job{seg.states[t], derive_seed(segment_seeds[i], t), std::nullopt};
        if (t + 1 < roots && cfg.reuse_enabled) {
          job.reuse = build_reuse_context(seg, t, out.per_segment[i][t + 1], evaluator, cfg);
        }
        jobs.push_back(job);
      }
      std::vector<SearchResult> column = run_search_jobs(jobs, evaluator, cfg);
      for (std::size_t k = 0; k < members.size(); ++k) out.per_segment[members[k]][t] = std::move(column[k]);
      ++out.waves;
    }
  }
  return out;
}

ReanalyzeBatchResult reanalyze_batch(std::span<const GameSegment* const> segments, Evaluator& evaluator,
                                     const SearchConfig& cfg) {
  std::vector<std::uint64_t> seeds(segments.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(cfg.rng_seed, i);
  return reanalyze_batch(segments, evaluator, cfg, seeds);
}

}  // namespace rezero
