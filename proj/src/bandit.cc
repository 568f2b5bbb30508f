#include "rezero/bandit.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rezero/errors.h"

namespace rezero {
namespace {

int argmax_with_ties(const std::vector<double>& scores, Rng& rng) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> best_arms;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > best) {
      best = scores[i];
      best_arms.assign(1, static_cast<int>(i));
    } else if (scores[i] == best) {
      best_arms.push_back(static_cast<int>(i));
    }
  }
  if (best_arms.size() == 1) return best_arms.front();
  std::uniform_int_distribution<std::size_t> pick(0, best_arms.size() - 1);
  return best_arms[pick(rng)];
}

// Shared selection loop; reused_arm < 0 means plain prior-weighted UCB.
BanditStats run_policy(const BanditSpec& spec, std::int64_t n, int reused_arm, double fixed_mean, double c,
                       Rng& rng) {
  spec.validate();
  const auto k = static_cast<std::size_t>(spec.K);
  BanditStats stats;
  stats.pulls.assign(k, 0);
  stats.sample_means.assign(k, 0.0);
  stats.horizon = n;
  std::vector<double> scores(k);
  std::int64_t total = 0;
  for (std::int64_t round = 0; round < n; ++round) {
    const double root = std::sqrt(static_cast<double>(total));
    for (std::size_t i = 0; i < k; ++i) {
      if (static_cast<int>(i) == reused_arm) {
        scores[i] = fixed_mean;
      } else {
        const double q = stats.pulls[i] > 0 ? stats.sample_means[i] : 0.0;
        scores[i] = q + c * spec.priors[i] * root / (1.0 + static_cast<double>(stats.pulls[i]));
      }
    }
    const int arm = argmax_with_ties(scores, rng);
    const auto a = static_cast<std::size_t>(arm);
    const double reward = sample_arm(spec, arm, stats.pulls[a] + 1, rng);
    stats.pulls[a] += 1;
    stats.sample_means[a] += (reward - stats.sample_means[a]) / static_cast<double>(stats.pulls[a]);
    ++total;
  }
  return stats;
}

}  // namespace

void BanditSpec::validate() const {
  require(K >= 2, ErrorCode::kConfig, "bandit needs at least two arms");
  const auto k = static_cast<std::size_t>(K);
  require(mu.size() == k && priors.size() == k, ErrorCode::kConfig, "mu and priors must have K entries");
  require(drift.empty() || drift.size() == k, ErrorCode::kConfig, "drift must be empty or have K entries");
  double total = 0.0;
  for (double p : priors) {
    require(p > 0.0, ErrorCode::kConfig, "bandit priors must be positive");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::kConfig, "bandit priors must sum to 1");
  require(C > 0.0, ErrorCode::kConfig, "concentration constant C must be positive");
  require(reward_noise >= 0.0, ErrorCode::kConfig, "reward_noise must be non-negative");
}

int BanditSpec::optimal_arm() const {
  return static_cast<int>(std::max_element(mu.begin(), mu.end()) - mu.begin());
}

double sample_arm(const BanditSpec& spec, int arm, std::int64_t s, Rng& rng) {
  require(s >= 1, ErrorCode::kPrecondition, "sample index starts at 1");
  const auto a = static_cast<std::size_t>(arm);
  double r = spec.mu[a];
  if (!spec.drift.empty()) r += spec.drift[a] / std::sqrt(static_cast<double>(s));
  if (spec.reward_noise > 0.0) {
    std::uniform_real_distribution<double> noise(-spec.reward_noise, spec.reward_noise);
    r += noise(rng);
  }
  return r;
}

BanditStats run_puct_bandit(const BanditSpec& spec, std::int64_t n, double c, Rng& rng) {
  require(n >= spec.K, ErrorCode::kPrecondition, "horizon must be at least K");
  return run_policy(spec, n, -1, 0.0, c, rng);
}

BanditStats run_one_armed_reuse(const BanditSpec& spec, std::int64_t n, int reused_arm, double fixed_mean,
                                Rng& rng, double c) {
  require(n >= 1, ErrorCode::kPrecondition, "horizon must be positive");
  require(reused_arm >= 0 && reused_arm < spec.K, ErrorCode::kPrecondition, "reused arm out of range");
  return run_policy(spec, n, reused_arm, fixed_mean, c, rng);
}

double presample_mean(const BanditSpec& spec, int arm, std::int64_t n, Rng& rng) {
  double total = 0.0;
  for (std::int64_t s = 1; s <= n; ++s) total += sample_arm(spec, arm, s, rng);
  return total / static_cast<double>(n);
}

double theorem1_bound(const BanditSpec& spec, const BoundInputs& in, int arm, std::int64_t n) {
  require(in.epsilon > 0.0 && in.epsilon < in.delta, ErrorCode::kDomain, "epsilon must lie in (0, delta)");
  require(n >= 1, ErrorCode::kDomain, "horizon must be positive");
  const double c2 = spec.C * spec.C;
  const double nn = static_cast<double>(n);
  const double p_i = spec.priors[static_cast<std::size_t>(arm)];
  const double gap = in.delta - in.epsilon;
  const double explore = 2.0 * p_i * std::sqrt(nn - 1.0) / gap;
  if (in.bound_case == BoundCase::kKnownOptimal) {
    return 2.0 + explore + c2 / (gap * gap) + nn * std::exp(-nn * in.epsilon * in.epsilon / c2);
  }
  require(in.reused_arm >= 0 && in.reused_arm < spec.K, ErrorCode::kDomain, "known-suboptimal bound needs arm l");
  const double p1 = in.p1.value_or(spec.priors[static_cast<std::size_t>(in.reused_arm)]);
  const double eps4 = std::pow(in.epsilon, 4);
  const double reuse_term = 2.0 * std::pow(spec.C, 6) / (eps4 * p1 * p1);
  if (arm == in.reused_arm) {
    return 1.0 + reuse_term + nn * std::exp(-nn * gap * gap / c2);
  }
  return 3.0 + explore + c2 / (gap * gap) + reuse_term;
}

namespace {

struct AuditCounts {
  // [arm][s index][eps index] -> hits
  std::vector<std::vector<std::vector<std::int64_t>>> upper;
  std::vector<std::vector<std::vector<std::int64_t>>> lower;
};

AuditCounts count_deviations(const BanditSpec& spec, std::span<const int> sample_counts,
                             std::span<const double> epsilons, int seeds, std::uint64_t seed) {
  require(!sample_counts.empty() && !epsilons.empty() && seeds > 0, ErrorCode::kPrecondition,
          "audit grid must be non-empty");
  const int max_s = *std::max_element(sample_counts.begin(), sample_counts.end());
  const auto k = static_cast<std::size_t>(spec.K);
  AuditCounts counts;
  const std::vector<std::int64_t> zeros(epsilons.size(), 0);
  counts.upper.assign(k, std::vector<std::vector<std::int64_t>>(sample_counts.size(), zeros));
  counts.lower = counts.upper;
  for (std::size_t arm = 0; arm < k; ++arm) {
    Rng rng(derive_seed(seed, arm));
    for (int run = 0; run < seeds; ++run) {
      double sum = 0.0;
      for (int s = 1; s <= max_s; ++s) {
        sum += sample_arm(spec, static_cast<int>(arm), s, rng);
        for (std::size_t si = 0; si < sample_counts.size(); ++si) {
          if (sample_counts[si] != s) continue;
          const double dev = sum / s - spec.mu[arm];
          for (std::size_t e = 0; e < epsilons.size(); ++e) {
            if (dev >= epsilons[e]) ++counts.upper[arm][si][e];
            if (dev <= -epsilons[e]) ++counts.lower[arm][si][e];
          }
        }
      }
    }
  }
  return counts;
}

DriftAudit audit_from_counts(const BanditSpec& spec, const AuditCounts& counts, double C,
                             std::span<const int> sample_counts, std::span<const double> epsilons, int seeds,
                             double slack) {
  DriftAudit audit;
  audit.C = C;
  audit.pass = true;
  for (std::size_t arm = 0; arm < static_cast<std::size_t>(spec.K); ++arm) {
    for (std::size_t si = 0; si < sample_counts.size(); ++si) {
      for (std::size_t e = 0; e < epsilons.size(); ++e) {
        DriftAuditCell cell;
        cell.arm = static_cast<int>(arm);
        cell.s = sample_counts[si];
        cell.epsilon = epsilons[e];
        cell.upper_frequency = static_cast<double>(counts.upper[arm][si][e]) / seeds;
        cell.lower_frequency = static_cast<double>(counts.lower[arm][si][e]) / seeds;
        cell.allowed = std::exp(-cell.epsilon * cell.epsilon * cell.s / (C * C)) * (1.0 + slack);
        cell.pass = cell.upper_frequency <= cell.allowed && cell.lower_frequency <= cell.allowed;
        audit.pass = audit.pass && cell.pass;
        audit.cells.push_back(cell);
      }
    }
  }
  return audit;
}

}  // namespace

DriftAudit drift_condition_audit(const BanditSpec& spec, double C, std::span<const int> sample_counts,
                                 std::span<const double> epsilons, int seeds, std::uint64_t seed, double slack) {
  spec.validate();
  const AuditCounts counts = count_deviations(spec, sample_counts, epsilons, seeds, seed);
  return audit_from_counts(spec, counts, C, sample_counts, epsilons, seeds, slack);
}

std::optional<double> calibrate_concentration(const BanditSpec& spec, std::span<const double> candidates,
                                              std::span<const int> sample_counts, std::span<const double> epsilons,
                                              int seeds, std::uint64_t seed, double slack) {
  spec.validate();
  const AuditCounts counts = count_deviations(spec, sample_counts, epsilons, seeds, seed);
  std::vector<double> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  for (double C : sorted) {
    if (C <= 0.0) continue;
    if (audit_from_counts(spec, counts, C, sample_counts, epsilons, seeds, slack).pass) return C;
  }
  return std::nullopt;
}

const char* bandit_policy_name(BanditPolicy p) {
  switch (p) {
    case BanditPolicy::kPuct: return "puct";
    case BanditPolicy::kReuseKnownOptimal: return "reuse_known_optimal";
    case BanditPolicy::kReuseKnownSuboptimal: return "reuse_known_suboptimal";
  }
  return "unknown";
}

ConcentrationReport concentration_report(const BanditSpec& spec, BanditPolicy policy, int reused_arm,
                                         const std::map<std::int64_t, std::vector<BanditStats>>& runs,
                                         double epsilon_fraction) {
  spec.validate();
  require(runs.size() >= 2, ErrorCode::kPrecondition, "concentration report needs at least two horizons");
  for (const auto& [n, stats] : runs) {
    require(stats.size() >= 30, ErrorCode::kPrecondition, "concentration report needs at least 30 seeds per horizon");
  }
  const int best = spec.optimal_arm();
  ConcentrationReport report;
  report.policy = policy;
  report.reused_arm = reused_arm;
  for (int arm = 0; arm < spec.K; ++arm) {
    if (arm == best) continue;
    const double delta = spec.gap(arm);
    double previous_fraction = std::numeric_limits<double>::infinity();
    for (const auto& [n, stats] : runs) {
      ConcentrationRow row;
      row.arm = arm;
      row.n = n;
      double total = 0.0;
      for (const BanditStats& s : stats) total += static_cast<double>(s.pulls[static_cast<std::size_t>(arm)]);
      row.mean_pulls = total / static_cast<double>(stats.size());
      row.mean_fraction = row.mean_pulls / static_cast<double>(n);
      row.trend_ok = row.mean_fraction < previous_fraction;
      previous_fraction = row.mean_fraction;
      if (policy != BanditPolicy::kPuct && delta > 0.0) {
        BoundInputs in;
        in.delta = delta;
        in.epsilon = epsilon_fraction * delta;
        in.bound_case = policy == BanditPolicy::kReuseKnownOptimal ? BoundCase::kKnownOptimal
                                                                    : BoundCase::kKnownSuboptimal;
        in.reused_arm = reused_arm;
        row.bound = theorem1_bound(spec, in, arm, n);
        row.bound_ok = row.mean_pulls <= *row.bound;
      }
      row.pass = row.trend_ok && row.bound_ok;
      report.trend_pass = report.trend_pass && row.trend_ok;
      report.bound_pass = report.bound_pass && row.bound_ok;
      report.rows.push_back(row);
    }
  }
  report.pass = report.trend_pass && report.bound_pass;
  return report;
}

std::vector<ConcentrationReport> run_bandit_sweep(const BanditSpec& spec, const BanditSweep& sweep) {
  spec.validate();
  const int best = spec.optimal_arm();
  int sub = sweep.suboptimal_reused_arm;
  if (sub < 0) {
    double best_mu = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < spec.K; ++i) {
      if (i != best && spec.mu[static_cast<std::size_t>(i)] > best_mu) {
        best_mu = spec.mu[static_cast<std::size_t>(i)];
        sub = i;
      }
    }
  }
  std::map<std::int64_t, std::vector<BanditStats>> puct, known_opt, known_sub;
  for (std::int64_t n : sweep.horizons) {
    for (int s = 0; s < sweep.seeds; ++s) {
      const std::uint64_t run_seed = derive_seed(derive_seed(sweep.seed, static_cast<std::uint64_t>(n)), s);
      Rng puct_rng(derive_seed(run_seed, 0));
      puct[n].push_back(run_puct_bandit(spec, n, sweep.c, puct_rng));
      Rng opt_rng(derive_seed(run_seed, 1));
      const double opt_mean = presample_mean(spec, best, n, opt_rng);
      known_opt[n].push_back(run_one_armed_reuse(spec, n, best, opt_mean, opt_rng, sweep.c));
      Rng sub_rng(derive_seed(run_seed, 2));
      const double sub_mean = presample_mean(spec, sub, n, sub_rng);
      known_sub[n].push_back(run_one_armed_reuse(spec, n, sub, sub_mean, sub_rng, sweep.c));
    }
  }
  return {
      concentration_report(spec, BanditPolicy::kPuct, -1, puct, sweep.epsilon_fraction),
      concentration_report(spec, BanditPolicy::kReuseKnownOptimal, best, known_opt, sweep.epsilon_fraction),
      concentration_report(spec, BanditPolicy::kReuseKnownSuboptimal, sub, known_sub, sweep.epsilon_fraction),
  };
}

BanditSpec reference_bandit_spec() {
  BanditSpec spec;
  spec.K = 3;
  spec.mu = {0.9, 0.5, 0.4};
  spec.priors = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  spec.drift = {-0.05, 0.05, 0.05};
  spec.reward_noise = 0.1;
  spec.C = 1.0;
  return spec;
}

}  // namespace rezero
