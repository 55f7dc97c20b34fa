#include "msx/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "msx/errors.hpp"
#include "msx/stats.hpp"

namespace msx {

MatchReport match(const SynergySet& true_synergies,
                  const SynergySet& estimated_synergies) {
  const Matrix& ts = true_synergies.s;
  const Matrix& es = estimated_synergies.s;
  if (ts.rows() != es.rows())
    fail(ErrorCode::DomainError, "channel count mismatch in match");
  if (ts.cols() != es.cols())
    fail(ErrorCode::DomainError, "synergy count mismatch in match");
  const std::size_t r = ts.cols();

  MatchReport report;
  report.assignment.resize(r);
  report.correlations.resize(r);
  for (std::size_t j = 0; j < r; ++j) {
    const std::vector<double> est = es.column(j);
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < r; ++i) {
      const double corr = std::fabs(pearson(est, ts.column(i)));
      if (corr > best) {
        best = corr;
        best_i = i;
      }
    }
    report.assignment[j] = best_i;
    report.correlations[j] = best;
  }

  std::set<std::size_t> hit(report.assignment.begin(), report.assignment.end());
  report.fully_matched = hit.size() == r;
  if (report.fully_matched) {
    double sum = 0.0;
    for (double c : report.correlations) sum += c;
    report.trial_average = sum / static_cast<double>(r);
  }
  return report;
}

ChanceBaseline chance_baseline(const SynergySet& true_synergies,
                               std::size_t n_random, Rng& rng) {
  if (n_random < 100)
    fail(ErrorCode::DomainError, "chance baseline needs >= 100 draws");
  const std::size_t m = true_synergies.s.rows();
  const std::size_t r = true_synergies.s.cols();

  ChanceBaseline out;
  double sum = 0.0;
  for (std::size_t k = 0; k < n_random; ++k) {
    const SynergySet random_set = random_synergies(m, r, false, rng);
    const MatchReport report = match(true_synergies, random_set);
    if (report.fully_matched) {
      sum += *report.trial_average;
      ++out.matched_count;
    }
  }
  out.matched_rate = static_cast<double>(out.matched_count) /
                     static_cast<double>(n_random);
  out.grand_average = out.matched_count > 0
                          ? sum / static_cast<double>(out.matched_count)
                          : 0.0;
  return out;
}

double normalized_grand_average(double grand, double chance) {
  if (chance >= 1.0)
    fail(ErrorCode::DomainError, "chance grand average must be < 1");
  return (grand - chance) / (1.0 - chance);
}

TestResult two_sample_t(const std::vector<double>& a,
                        const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    fail(ErrorCode::DegenerateInput, "two_sample_t needs >= 2 samples per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = variance(a);
  const double vb = variance(b);
  const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
  if (pooled <= 0.0)
    fail(ErrorCode::DegenerateInput, "zero pooled variance");
  const double se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  TestResult result;
  result.statistic = (mean(a) - mean(b)) / se;
  result.dof1 = na + nb - 2.0;
  result.p_value = t_sf(result.statistic, result.dof1);
  result.significant = result.p_value < 0.05;
  return result;
}

TestResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2)
    fail(ErrorCode::DegenerateInput, "one_way_anova needs >= 2 groups");
  std::size_t total_n = 0;
  double grand_sum = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2)
      fail(ErrorCode::DegenerateInput, "every group needs >= 2 samples");
    total_n += g.size();
    for (double v : g) grand_sum += v;
  }
  const double grand_mean = grand_sum / static_cast<double>(total_n);

  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const double gm = mean(g);
    ss_between += static_cast<double>(g.size()) * (gm - grand_mean) * (gm - grand_mean);
    for (double v : g) ss_within += (v - gm) * (v - gm);
  }
  const double df_between = static_cast<double>(groups.size() - 1);
  const double df_within = static_cast<double>(total_n - groups.size());
  if (ss_within <= 0.0)
    fail(ErrorCode::DegenerateInput, "zero within-group variance");

  TestResult result;
  result.statistic = (ss_between / df_between) / (ss_within / df_within);
  result.dof1 = df_between;
  result.dof2 = df_within;
  result.p_value = f_sf(result.statistic, static_cast<std::size_t>(df_between),
                        static_cast<std::size_t>(df_within));
  result.significant = result.p_value < 0.05;
  return result;
}

TwoWayAnovaResult two_way_anova(
    const std::vector<std::vector<std::vector<double>>>& cells) {
  const std::size_t a_levels = cells.size();
  if (a_levels < 2) fail(ErrorCode::DegenerateInput, "two_way_anova needs >= 2 rows");
  const std::size_t b_levels = cells.front().size();
  if (b_levels < 2) fail(ErrorCode::DegenerateInput, "two_way_anova needs >= 2 columns");
  std::size_t cell_n = 0;
  for (const auto& row : cells) {
    if (row.size() != b_levels)
      fail(ErrorCode::UnbalancedDesign, "ragged factor-B levels");
    for (const auto& cell : row) {
      if (cell_n == 0) cell_n = cell.size();
      if (cell.size() != cell_n)
        fail(ErrorCode::UnbalancedDesign, "unequal cell sizes");
    }
  }
  if (cell_n < 2)
    fail(ErrorCode::DegenerateInput, "two_way_anova needs >= 2 samples per cell");

  const double da = static_cast<double>(a_levels);
  const double db = static_cast<double>(b_levels);
  const double dc = static_cast<double>(cell_n);
  const double total_n = da * db * dc;

  double grand_sum = 0.0;
  for (const auto& row : cells)
    for (const auto& cell : row)
      for (double v : cell) grand_sum += v;
  const double grand_mean = grand_sum / total_n;

  std::vector<double> a_means(a_levels, 0.0), b_means(b_levels, 0.0);
  for (std::size_t i = 0; i < a_levels; ++i)
    for (std::size_t j = 0; j < b_levels; ++j)
      for (double v : cells[i][j]) {
        a_means[i] += v;
        b_means[j] += v;
      }
  for (double& v : a_means) v /= db * dc;
  for (double& v : b_means) v /= da * dc;

  double ss_a = 0.0, ss_b = 0.0, ss_ab = 0.0, ss_e = 0.0;
  for (std::size_t i = 0; i < a_levels; ++i) ss_a += (a_means[i] - grand_mean) * (a_means[i] - grand_mean);
  ss_a *= db * dc;
  for (std::size_t j = 0; j < b_levels; ++j) ss_b += (b_means[j] - grand_mean) * (b_means[j] - grand_mean);
  ss_b *= da * dc;
  for (std::size_t i = 0; i < a_levels; ++i)
    for (std::size_t j = 0; j < b_levels; ++j) {
      const double cm = mean(cells[i][j]);
      const double inter = cm - a_means[i] - b_means[j] + grand_mean;
      ss_ab += inter * inter;
      for (double v : cells[i][j]) ss_e += (v - cm) * (v - cm);
    }
  ss_ab *= dc;

  const double df_a = da - 1.0;
  const double df_b = db - 1.0;
  const double df_ab = df_a * df_b;
  const double df_e = da * db * (dc - 1.0);
  if (ss_e <= 0.0) fail(ErrorCode::DegenerateInput, "zero error variance");
  const double mse = ss_e / df_e;

  const auto make = [&](double ss, double df) {
    TestResult r;
    r.statistic = (ss / df) / mse;
    r.dof1 = df;
    r.dof2 = df_e;
    r.p_value = f_sf(r.statistic, static_cast<std::size_t>(df),
                     static_cast<std::size_t>(df_e));
    r.significant = r.p_value < 0.05;
    return r;
  };
  return TwoWayAnovaResult{make(ss_a, df_a), make(ss_b, df_b), make(ss_ab, df_ab)};
}

EvaluatedTrial evaluate_trial(const SyntheticTrial& truth,
                              const FactorizationResult& result) {
  EvaluatedTrial out;
  out.dataset = truth.dataset;
  out.trial = truth.trial;
  out.converged = result.converged;
  out.residual = result.residual;
  try {
    out.report = match(truth.true_synergies, result.synergies);
  } catch (const Error& error) {
    if (error.code() != ErrorCode::DegenerateInput) throw;
    // A constant estimated column cannot be correlation-matched; count the
    // trial as not fully matched.
    out.degenerate = true;
    out.report = MatchReport{};
  }
  return out;
}

CellSummary summarize_cell(const std::vector<SyntheticTrial>& trials,
                           const std::vector<FactorizationResult>& results,
                           CellSetting setting, const SummarizeConfig& config,
                           std::vector<EvaluatedTrial>* per_trial_out) {
  if (trials.empty() || trials.size() != results.size())
    fail(ErrorCode::EmptyCell, "cell has no evaluable trials");

  CellSummary cell;
  cell.setting = setting;
  cell.trial_count = trials.size();
  cell.chance_seed = config.seed;
  cell.chance_draws = config.n_random;

  std::vector<EvaluatedTrial> evaluated;
  evaluated.reserve(trials.size());
  double matched_sum = 0.0;
  std::size_t matched = 0;
  std::size_t nonconverged = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    EvaluatedTrial trial = evaluate_trial(trials[i], results[i]);
    if (!trial.converged) ++nonconverged;
    if (trial.report.fully_matched) {
      matched_sum += *trial.report.trial_average;
      ++matched;
    }
    evaluated.push_back(std::move(trial));
  }
  cell.matched_count = matched;
  cell.success_rate = static_cast<double>(matched) /
                      static_cast<double>(trials.size());
  cell.nonconvergence_rate = static_cast<double>(nonconverged) /
                             static_cast<double>(trials.size());
  cell.grand_average =
      matched > 0 ? matched_sum / static_cast<double>(matched) : 0.0;

  // Chance draws round-robin over the trials' individual truths.
  Rng rng(derive_seed(config.seed, 0xC4A7CE));
  double chance_sum = 0.0;
  std::size_t chance_matched = 0;
  for (std::size_t k = 0; k < config.n_random; ++k) {
    const SynergySet& truth = trials[k % trials.size()].true_synergies;
    const SynergySet random_set =
        random_synergies(truth.s.rows(), truth.s.cols(), false, rng);
    const MatchReport report = match(truth, random_set);
    if (report.fully_matched) {
      chance_sum += *report.trial_average;
      ++chance_matched;
    }
  }
  cell.chance_matched_rate = static_cast<double>(chance_matched) /
                             static_cast<double>(config.n_random);
  cell.chance_grand_average =
      chance_matched > 0 ? chance_sum / static_cast<double>(chance_matched) : 0.0;

  cell.normalized =
      normalized_grand_average(cell.grand_average, cell.chance_grand_average);
  const std::vector<double> per_trial =
      normalized_trial_values(evaluated, cell.chance_grand_average);
  if (per_trial.size() >= 2) {
    cell.normalized_std = std::sqrt(variance(per_trial));
  }

  if (per_trial_out) *per_trial_out = std::move(evaluated);
  return cell;
}

std::vector<double> normalized_trial_values(
    const std::vector<EvaluatedTrial>& trials, double chance) {
  std::vector<double> values;
  values.reserve(trials.size());
  for (const EvaluatedTrial& trial : trials)
    if (trial.report.fully_matched)
      values.push_back(normalized_grand_average(*trial.report.trial_average, chance));
  return values;
}

}  // namespace msx
