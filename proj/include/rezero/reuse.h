#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rezero/mcts.h"
#include "rezero/segment.h"

namespace rezero {

/// Root selection with one pre-evaluated child: the reused action scores the
/// constant r + gamma * m, every other child its ucb_score. Exact ties are
/// broken uniformly with `rng`.
NodeIndex select_root_child_reuse(const SearchTree& tree, const RootReuseContext& ctx, const SearchConfig& cfg,
                                  Rng& rng);

/// Search whose simulations end at the root whenever the reused action is
/// selected. Seeded with cfg.rng_seed.
SearchResult reuse_mcts(StateHandle root_state, const RootReuseContext& ctx, Evaluator& evaluator,
                        const SearchConfig& cfg, SearchTree* tree_out = nullptr);

/// Context for searching segment.states[t] given the finished search of
/// states[t + 1]. reward_source = kModel costs one dynamics call.
RootReuseContext build_reuse_context(const GameSegment& segment, std::size_t t, const SearchResult& successor,
                                     Evaluator& evaluator, const SearchConfig& cfg);

/// Searches the segment's roots last to first; the last root gets a plain
/// search, every earlier root reuses its successor's root value (when
/// cfg.reuse_enabled). Timestep t uses seed derive_seed(cfg.rng_seed, t).
/// Results are returned in forward time order.
std::vector<SearchResult> search_backwards(const GameSegment& segment, Evaluator& evaluator, const SearchConfig& cfg);

struct ReanalyzeBatchResult {
  std::vector<std::vector<SearchResult>> per_segment;
  std::size_t waves = 0;  // batched sub-batch calls, one per timestep column
};

/// Column-wise backward reanalyze: segments are grouped by root count and,
/// within a group, all roots at timestep t are searched together. Segment i
/// behaves exactly like search_backwards with rng_seed = segment_seeds[i].
ReanalyzeBatchResult reanalyze_batch(std::span<const GameSegment* const> segments, Evaluator& evaluator,
                                     const SearchConfig& cfg, std::span<const std::uint64_t> segment_seeds);

// Overload using segment_seeds[i] = derive_seed(cfg.rng_seed, i).
ReanalyzeBatchResult reanalyze_batch(std::span<const GameSegment* const> segments, Evaluator& evaluator,
                                     const SearchConfig& cfg);

}  // namespace rezero
