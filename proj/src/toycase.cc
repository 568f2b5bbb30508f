#include "rezero/toycase.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "rezero/errors.h"

namespace rezero {
namespace {

struct UctNode {
  explicit UctNode(Cell p, int par = -1) : pos(p), parent(par) {}

  Cell pos;
  int parent = -1;
  std::vector<int> children;
  int visits = 0;
  double value = 0.0;
};

class Uct {
 public:
  Uct(const GridWorldSpec& spec, const UctOptions& options, Rng& rng) : spec_(spec), opt_(options), rng_(rng) {}

  UctOutcome run(Cell root, std::optional<std::pair<Cell, double>> reuse) {
    require(spec_.is_open(root), ErrorCode::kInvalidState, "toy search root must be an open cell");
    require(root != spec_.goal, ErrorCode::kPrecondition, "toy search root is the goal");
    require(opt_.iterations >= 1, ErrorCode::kConfig, "toy search needs at least one iteration");
    const auto start = std::chrono::steady_clock::now();
    nodes_.assign(1, UctNode{root});
    UctOutcome out;
    for (int it = 0; it < opt_.iterations; ++it) {
      const int leaf = select(0, reuse ? std::optional<Cell>(reuse->first) : std::nullopt, out);
      double reward = 0.0;
      if (reuse && nodes_[static_cast<std::size_t>(leaf)].pos == reuse->first) {
        reward = reuse->second;
        ++out.reuse_stops;
      } else {
        reward = simulate(nodes_[static_cast<std::size_t>(leaf)].pos, out);
      }
      backpropagate(leaf, reward);
      ++out.iterations;
    }
    out.best_child = nodes_[static_cast<std::size_t>(best_child(0, 0.0))].pos;
    out.root_value = nodes_[0].value;
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

 private:
  bool fully_expanded(const UctNode& n) const {
    return n.children.size() == gw_legal_actions(spec_, n.pos).size();
  }

  int select(int node, std::optional<Cell> stop_at, UctOutcome& out) {
    while (nodes_[static_cast<std::size_t>(node)].pos != spec_.goal &&
           !(stop_at && nodes_[static_cast<std::size_t>(node)].pos == *stop_at)) {
      if (!fully_expanded(nodes_[static_cast<std::size_t>(node)])) return expand(node, out);
      node = best_child(node, opt_.exploration_weight);
    }
    return node;
  }

  int expand(int node, UctOutcome& out) {
    const Cell pos = nodes_[static_cast<std::size_t>(node)].pos;
    for (ActionId a : gw_legal_actions(spec_, pos)) {
      const Cell next = spec_.cell(gw_step(spec_, pos, a).next_state);
      bool present = false;
      for (int c : nodes_[static_cast<std::size_t>(node)].children) present = present || nodes_[static_cast<std::size_t>(c)].pos == next;
      if (present) continue;
      const int child = static_cast<int>(nodes_.size());
      nodes_.push_back(UctNode{next, node});
      nodes_[static_cast<std::size_t>(node)].children.push_back(child);
      ++out.expansions;
      return child;
    }
    fail(ErrorCode::kContractViolation, "expand called on a fully expanded node");
  }

  // Terminal reward divided by the number of states visited, the first included.
  double simulate(Cell pos, UctOutcome& out) {
    int count = 1;
    while (pos != spec_.goal) {
      if (count > opt_.rollout_step_cap) return 0.0;
      const std::vector<ActionId> legal = gw_legal_actions(spec_, pos);
      std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
      pos = spec_.cell(gw_step(spec_, pos, legal[pick(rng_)]).next_state);
      ++count;
      ++out.rollout_steps;
    }
    return 1.0 / count;
  }

  void backpropagate(int node, double reward) {
    double g = opt_.gamma;
    while (node >= 0) {
      UctNode& n = nodes_[static_cast<std::size_t>(node)];
      n.visits += 1;
      n.value += reward * g;
      node = n.parent;
      g *= opt_.gamma;
    }
  }

  int best_child(int node, double weight) {
    const UctNode& n = nodes_[static_cast<std::size_t>(node)];
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> best_children;
    for (int c : n.children) {
      const UctNode& ch = nodes_[static_cast<std::size_t>(c)];
      const double exploit = ch.value / ch.visits;
      const double explore = std::sqrt(2.0 * std::log(static_cast<double>(n.visits)) / ch.visits);
      const double score = exploit + weight * explore;
      if (score > best) {
        best = score;
        best_children.assign(1, c);
      } else if (score == best) {
        best_children.push_back(c);
      }
    }
    require(!best_children.empty(), ErrorCode::kContractViolation, "node has no children");
    std::uniform_int_distribution<std::size_t> pick(0, best_children.size() - 1);
    return best_children[pick(rng_)];
  }

  const GridWorldSpec& spec_;
  const UctOptions& opt_;
  Rng& rng_;
  std::vector<UctNode> nodes_;
};

}  // namespace

UctOutcome uct_search(const GridWorldSpec& spec, Cell root, const UctOptions& options, Rng& rng) {
  return Uct(spec, options, rng).run(root, std::nullopt);
}

UctOutcome uct_reuse_search(const GridWorldSpec& spec, Cell root, double reuse_value, Cell reuse_position,
                            const UctOptions& options, Rng& rng) {
  return Uct(spec, options, rng).run(root, std::make_pair(reuse_position, reuse_value));
}

ToycaseReport run_toycase(const GridWorldSpec& spec, const UctOptions& options, std::uint64_t seed) {
  spec.validate();
  ToycaseReport report;
  std::map<Cell, double> recorded;
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const Cell cell{r, c};
      if (cell == spec.goal || spec.is_wall(cell)) continue;
      ToycaseCell row;
      row.cell = cell;
      row.reachable = shortest_path_oracle(spec, cell).has_value();
      if (row.reachable) {
        Rng rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(spec.handle(cell).id)));
        row.plain = uct_search(spec, cell, options, rng);
        recorded[cell] = row.plain.root_value;
      }
      report.cells.push_back(row);
    }
  }

  double plain_sum = 0.0, reuse_sum = 0.0, plain_ms = 0.0, reuse_ms = 0.0;
  int counted = 0, not_worse = 0;
  for (ToycaseCell& row : report.cells) {
    if (!row.reachable) continue;
    row.reuse_position = row.plain.best_child;
    row.reuse_value = row.reuse_position == spec.goal ? 1.0 : recorded.at(row.reuse_position);
    Rng rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(spec.handle(row.cell).id) + 1));
    row.reuse = uct_reuse_search(spec, row.cell, row.reuse_value, row.reuse_position, options, rng);
    plain_sum += row.plain.expansions;
    reuse_sum += row.reuse.expansions;
    plain_ms += row.plain.wall_ms;
    reuse_ms += row.reuse.wall_ms;
    ++counted;
    if (row.reuse.expansions <= row.plain.expansions) ++not_worse;
  }
  if (counted > 0) {
    report.mean_plain_expansions = plain_sum / counted;
    report.mean_reuse_expansions = reuse_sum / counted;
    report.expansion_reduction = plain_sum > 0.0 ? 1.0 - reuse_sum / plain_sum : 0.0;
    report.fraction_not_worse = static_cast<double>(not_worse) / counted;
    report.mean_plain_wall_ms = plain_ms / counted;
    report.mean_reuse_wall_ms = reuse_ms / counted;
  }
  return report;
}

std::string toycase_heatmap(const GridWorldSpec& spec, const ToycaseReport& report, bool reuse) {
  std::map<Cell, const ToycaseCell*> by_cell;
  for (const ToycaseCell& row : report.cells) by_cell[row.cell] = &row;
  std::ostringstream os;
  os << (reuse ? "reuse" : "plain") << " search expansions per cell\n";
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const Cell cell{r, c};
      os << std::setw(5);
      if (spec.is_wall(cell)) {
        os << '#';
      } else if (cell == spec.goal) {
        os << 'G';
      } else {
        const ToycaseCell* row = by_cell.at(cell);
        if (!row->reachable) {
          os << '?';
        } else {
          os << (reuse ? row->reuse.expansions : row->plain.expansions);
        }
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace rezero
