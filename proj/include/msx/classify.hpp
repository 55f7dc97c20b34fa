#ifndef MSX_CLASSIFY_HPP
#define MSX_CLASSIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "msx/factorize.hpp"
#include "msx/rng.hpp"

namespace msx {

struct LabeledFeature {
  std::vector<double> vector;  // unit-norm synergy coefficients
  std::string label;
  std::string subject;
  int repetition = 0;
};

// One canonical synergy from a single-task epoch (r = 1 factorisation).
LabeledFeature extract_feature(const EmgEpoch& epoch, Method method,
                               std::uint64_t seed);

struct SplitConfig {
  double train_fraction = 0.6;
  bool randomize = false;  // deterministic split by repetition index otherwise
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<LabeledFeature> train;
  std::vector<LabeledFeature> test;
};

// Per (subject, label) stratified split. With the default deterministic mode
// the first ceil(fraction * reps) repetitions by index train. Throws
// InsufficientRepetitions when any stratum ends up without test items.
Split split(const std::vector<LabeledFeature>& dataset,
            const SplitConfig& config = {});

struct KnnModel {
  std::size_t k = 3;
  std::vector<LabeledFeature> training;
};

// Euclidean k-NN with majority vote; vote ties fall back to the single
// nearest neighbour, distance ties to the lower training index.
std::string knn_predict(const KnnModel& model, const std::vector<double>& query);

struct DofGroup {
  std::string name;
  std::string task_a;
  std::string task_b;
};

struct DofOutcome {
  std::string name;
  std::size_t errors = 0;
  std::size_t total = 0;
  double error_percent = 0.0;
};

struct ClassificationReport {
  Method method = Method::PCA;
  std::vector<DofOutcome> per_dof;
  DofOutcome all_tasks;
};

struct ExperimentConfig {
  std::size_t k = 3;
  SplitConfig split;
  std::uint64_t seed = 0;
};

// Per-subject binary classifiers for each degree-of-freedom pair plus one
// all-task classifier; error counts accumulate over subjects and test
// repetitions.
ClassificationReport run_experiment(const std::vector<EmgEpoch>& epochs,
                                    Method method,
                                    const std::vector<DofGroup>& dofs,
                                    const ExperimentConfig& config = {});

}  // namespace msx

#endif
