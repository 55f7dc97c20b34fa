#ifndef MSX_EVALUATE_HPP
#define MSX_EVALUATE_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "msx/factorize.hpp"
#include "msx/rng.hpp"
#include "msx/synthgen.hpp"

namespace msx {

struct MatchReport {
  std::vector<std::size_t> assignment;  // estimated index -> true index
  std::vector<double> correlations;     // |pearson| per estimated synergy
  bool fully_matched = false;
  // mean matched correlation, present only when fully_matched
  std::optional<double> trial_average;
};

// Free unconstrained matching: each estimated column pairs with the true
// column of highest |pearson|; duplicates mark the trial as not fully
// matched.
MatchReport match(const SynergySet& true_synergies,
                  const SynergySet& estimated_synergies);

struct ChanceBaseline {
  double grand_average = 0.0;  // over fully matched random sets
  double matched_rate = 0.0;
  std::size_t matched_count = 0;
};

// Random-pairing baseline: n_random nonsparse random synergy sets matched
// against the given truth.
ChanceBaseline chance_baseline(const SynergySet& true_synergies,
                               std::size_t n_random, Rng& rng);

// (grand - chance) / (1 - chance); may be negative.
double normalized_grand_average(double grand, double chance);

struct TestResult {
  double statistic = 0.0;
  double dof1 = 0.0;
  double dof2 = 0.0;  // zero for t-tests
  double p_value = 1.0;
  bool significant = false;  // p < 0.05
};

// Pooled-variance two-sample t test, two-sided.
TestResult two_sample_t(const std::vector<double>& a,
                        const std::vector<double>& b);

TestResult one_way_anova(const std::vector<std::vector<double>>& groups);

struct TwoWayAnovaResult {
  TestResult factor_a;
  TestResult factor_b;
  TestResult interaction;
};

// Balanced two-way layout with replication: cells[i][j] holds the samples of
// factor-A level i and factor-B level j; all cells must be the same size.
TwoWayAnovaResult two_way_anova(
    const std::vector<std::vector<std::vector<double>>>& cells);

struct CellSetting {
  bool sparse = false;
  std::size_t channels = 0;
  double snr_db = 0.0;
  Method method = Method::PCA;
};

struct CellSummary {
  CellSetting setting;
  std::size_t trial_count = 0;
  double success_rate = 0.0;       // fully matched fraction
  double grand_average = 0.0;      // over fully matched trials
  double chance_grand_average = 0.0;
  double chance_matched_rate = 0.0;
  double normalized = 0.0;         // normalized grand average
  double normalized_std = 0.0;     // stddev of per-trial normalized values
  double nonconvergence_rate = 0.0;
  std::size_t matched_count = 0;
  std::uint64_t chance_seed = 0;
  std::size_t chance_draws = 0;
};

struct EvaluatedTrial {
  std::size_t dataset = 0;
  std::size_t trial = 0;
  MatchReport report;
  bool converged = true;
  double residual = 0.0;
  bool degenerate = false;  // matching failed on a constant column
};

struct SummarizeConfig {
  std::size_t n_random = 1000;  // chance draws per cell
  std::uint64_t seed = 0;
};

EvaluatedTrial evaluate_trial(const SyntheticTrial& truth,
                              const FactorizationResult& result);

// Cell-level aggregation; the chance draws are spread round-robin across the
// trials' true synergy sets.
CellSummary summarize_cell(
    const std::vector<SyntheticTrial>& trials,
    const std::vector<FactorizationResult>& results, CellSetting setting,
    const SummarizeConfig& config,
    std::vector<EvaluatedTrial>* per_trial_out = nullptr);

// Per-trial normalized similarity values for matched trials (used by the
// statistical comparisons).
std::vector<double> normalized_trial_values(
    const std::vector<EvaluatedTrial>& trials, double chance);

}  // namespace msx

#endif
