#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "rezero/rng.h"

namespace rezero {

/// Non-stationary stochastic bandit. Pull number s of arm i returns
/// mu[i] + drift[i] / sqrt(s) + U(-reward_noise, reward_noise).
struct BanditSpec {
  int K = 0;
  std::vector<double> mu;
  std::vector<double> priors;
  double C = 1.0;  // concentration constant of the drift condition
  std::vector<double> drift;
  double reward_noise = 0.0;

  void validate() const;
  int optimal_arm() const;
  double gap(int arm) const { return mu[static_cast<std::size_t>(optimal_arm())] - mu[static_cast<std::size_t>(arm)]; }
};

struct BanditStats {
  std::vector<std::int64_t> pulls;
  std::vector<double> sample_means;  // meaningful only where pulls > 0
  std::int64_t horizon = 0;
};

double sample_arm(const BanditSpec& spec, int arm, std::int64_t s, Rng& rng);

// n rounds of prior-weighted UCB selection; Q is the running sample mean (0 before the first pull).
BanditStats run_puct_bandit(const BanditSpec& spec, std::int64_t n, double c, Rng& rng);

// As run_puct_bandit, except the reused arm's index is the constant fixed_mean.
BanditStats run_one_armed_reuse(const BanditSpec& spec, std::int64_t n, int reused_arm, double fixed_mean,
                                Rng& rng, double c = 1.0);

// Mean of n fresh pulls (pull indices 1..n), the estimate handed to a reuse run.
double presample_mean(const BanditSpec& spec, int arm, std::int64_t n, Rng& rng);

enum class BoundCase { kKnownOptimal, kKnownSuboptimal };

struct BoundInputs {
  double delta = 0.0;
  double epsilon = 0.0;
  BoundCase bound_case = BoundCase::kKnownOptimal;
  int reused_arm = -1;        // arm l in the known-suboptimal case
  std::optional<double> p1;   // prior in the 2C^6/(eps^4 P1^2) term; defaults to the reused arm's prior
};

/// Upper bound on E[T_arm(n)] for the one-armed reuse policy. Throws
/// kDomain unless 0 < epsilon < delta.
double theorem1_bound(const BanditSpec& spec, const BoundInputs& inputs, int arm, std::int64_t n);

struct DriftAuditCell {
  int arm = 0;
  int s = 0;
  double epsilon = 0.0;
  double upper_frequency = 0.0;  // P(mean_s - mu >= eps)
  double lower_frequency = 0.0;  // P(mean_s - mu <= -eps)
  double allowed = 0.0;          // exp(-eps^2 s / C^2) * (1 + slack)
  bool pass = false;
};

struct DriftAudit {
  double C = 0.0;
  std::vector<DriftAuditCell> cells;
  bool pass = false;
};

/// Empirical check of the sub-Gaussian drift condition for every arm over
/// the (s, epsilon) grid, using `seeds` independent sample paths.
DriftAudit drift_condition_audit(const BanditSpec& spec, double C, std::span<const int> sample_counts,
                                 std::span<const double> epsilons, int seeds, std::uint64_t seed,
                                 double slack = 0.1);

/// Smallest candidate C for which the audit passes; nullopt when none does.
/// The audit frequencies are computed once and checked against each candidate.
std::optional<double> calibrate_concentration(const BanditSpec& spec, std::span<const double> candidates,
                                              std::span<const int> sample_counts, std::span<const double> epsilons,
                                              int seeds, std::uint64_t seed, double slack = 0.1);

enum class BanditPolicy { kPuct, kReuseKnownOptimal, kReuseKnownSuboptimal };
const char* bandit_policy_name(BanditPolicy p);

struct ConcentrationRow {
  int arm = 0;
  std::int64_t n = 0;
  double mean_pulls = 0.0;
  double mean_fraction = 0.0;
  std::optional<double> bound;
  bool bound_ok = true;
  bool trend_ok = true;
  bool pass = true;
};

struct ConcentrationReport {
  BanditPolicy policy = BanditPolicy::kPuct;
  int reused_arm = -1;
  std::vector<ConcentrationRow> rows;
  bool trend_pass = true;
  bool bound_pass = true;
  bool pass = true;
};

/// Per tracked arm and horizon: mean T_i(n) and T_i(n)/n over seeds, whether
/// T_i(n)/n strictly decreases across horizons, and whether mean T_i(n) stays
/// under the applicable bound (epsilon = epsilon_fraction * gap). Needs at
/// least 2 horizons and 30 runs per horizon.
ConcentrationReport concentration_report(const BanditSpec& spec, BanditPolicy policy, int reused_arm,
                                         const std::map<std::int64_t, std::vector<BanditStats>>& runs,
                                         double epsilon_fraction = 0.5);

struct BanditSweep {
  std::vector<std::int64_t> horizons{250, 500, 1000, 2000};
  int seeds = 200;
  std::uint64_t seed = 0;
  double c = 1.0;
  double epsilon_fraction = 0.5;
  int suboptimal_reused_arm = -1;  // -1 picks the best suboptimal arm
};

// Runs all three policies over the sweep and reports each.
std::vector<ConcentrationReport> run_bandit_sweep(const BanditSpec& spec, const BanditSweep& sweep);

// K=3 spec used by the shipped bandit check; C must still be calibrated.
BanditSpec reference_bandit_spec();

}  // namespace rezero
