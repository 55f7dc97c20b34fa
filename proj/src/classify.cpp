#include "msx/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "msx/errors.hpp"

namespace msx {

LabeledFeature extract_feature(const EmgEpoch& epoch, Method method,
                               std::uint64_t seed) {
  if (!epoch.label) fail(ErrorCode::DomainError, "epoch has no task label");
  const FactorizationResult result = factorize(epoch, method, 1, seed);
  LabeledFeature feature;
  feature.vector = result.synergies.s.column(0);
  feature.label = *epoch.label;
  feature.subject = epoch.subject.value_or("");
  feature.repetition = epoch.repetition.value_or(0);
  return feature;
}

Split split(const std::vector<LabeledFeature>& dataset,
            const SplitConfig& config) {
  if (dataset.empty()) fail(ErrorCode::EmptyInput, "empty dataset");
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    strata[{dataset[i].subject, dataset[i].label}].push_back(i);

  Split out;
  Rng rng(derive_seed(config.seed, 0x5B117));
  for (auto& [key, indices] : strata) {
    if (indices.size() < 2)
      fail(ErrorCode::InsufficientRepetitions,
           "stratum " + key.first + "/" + key.second + " has < 2 repetitions");
    std::stable_sort(indices.begin(), indices.end(),
                     [&dataset](std::size_t a, std::size_t b) {
                       return dataset[a].repetition < dataset[b].repetition;
                     });
    if (config.randomize) rng.shuffle(indices);
    const std::size_t train_count = static_cast<std::size_t>(
        std::ceil(config.train_fraction * static_cast<double>(indices.size())));
    if (train_count >= indices.size())
      fail(ErrorCode::InsufficientRepetitions,
           "stratum " + key.first + "/" + key.second + " leaves no test items");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      (i < train_count ? out.train : out.test).push_back(dataset[indices[i]]);
    }
  }
  return out;
}

std::string knn_predict(const KnnModel& model, const std::vector<double>& query) {
  if (model.training.empty()) fail(ErrorCode::EmptyInput, "empty k-NN model");
  const std::size_t k = std::min(model.k, model.training.size());

  std::vector<std::pair<double, std::size_t>> distances;
  distances.reserve(model.training.size());
  for (std::size_t i = 0; i < model.training.size(); ++i) {
    const std::vector<double>& point = model.training[i].vector;
    double sum = 0.0;
    for (std::size_t d = 0; d < query.size(); ++d) {
      const double diff = query[d] - point[d];
      sum += diff * diff;
    }
    distances.emplace_back(sum, i);
  }
  // pair ordering resolves distance ties toward the lower training index
  std::partial_sort(distances.begin(), distances.begin() + k, distances.end());

  std::map<std::string, std::size_t> votes;
  for (std::size_t j = 0; j < k; ++j)
    ++votes[model.training[distances[j].second].label];
  std::size_t best_count = 0;
  for (const auto& [label, count] : votes) best_count = std::max(best_count, count);
  std::size_t winners = 0;
  std::string winner;
  for (const auto& [label, count] : votes)
    if (count == best_count) {
      ++winners;
      winner = label;
    }
  if (winners == 1) return winner;
  return model.training[distances.front().second].label;
}

ClassificationReport run_experiment(const std::vector<EmgEpoch>& epochs,
                                    Method method,
                                    const std::vector<DofGroup>& dofs,
                                    const ExperimentConfig& config) {
  if (epochs.empty()) fail(ErrorCode::EmptyInput, "no epochs");

  std::set<std::string> wanted;
  for (const DofGroup& dof : dofs) {
    wanted.insert(dof.task_a);
    wanted.insert(dof.task_b);
  }
  std::set<std::string> present;
  for (const EmgEpoch& epoch : epochs)
    if (epoch.label) present.insert(*epoch.label);
  for (const std::string& task : wanted)
    if (!present.count(task))
      fail(ErrorCode::DomainError, "dataset lacks task " + task);

  // Features are deterministic in (epoch order, seed).
  std::vector<LabeledFeature> features;
  features.reserve(epochs.size());
  for (std::size_t i = 0; i < epochs.size(); ++i)
    features.push_back(extract_feature(
        epochs[i], method, derive_seed(config.seed, 0xFEA7, i)));

  std::set<std::string> subjects;
  for (const LabeledFeature& f : features) subjects.insert(f.subject);

  ClassificationReport report;
  report.method = method;
  report.per_dof.resize(dofs.size());
  for (std::size_t d = 0; d < dofs.size(); ++d) report.per_dof[d].name = dofs[d].name;
  report.all_tasks.name = "all";

  for (const std::string& subject : subjects) {
    std::vector<LabeledFeature> subject_features;
    for (const LabeledFeature& f : features)
      if (f.subject == subject) subject_features.push_back(f);
    const Split parts = split(subject_features, config.split);

    for (std::size_t d = 0; d < dofs.size(); ++d) {
      KnnModel model;
      model.k = config.k;
      for (const LabeledFeature& f : parts.train)
        if (f.label == dofs[d].task_a || f.label == dofs[d].task_b)
          model.training.push_back(f);
      for (const LabeledFeature& f : parts.test) {
        if (f.label != dofs[d].task_a && f.label != dofs[d].task_b) continue;
        ++report.per_dof[d].total;
        if (knn_predict(model, f.vector) != f.label) ++report.per_dof[d].errors;
      }
    }

    KnnModel all_model;
    all_model.k = config.k;
    all_model.training = parts.train;
    for (const LabeledFeature& f : parts.test) {
      ++report.all_tasks.total;
      if (knn_predict(all_model, f.vector) != f.label) ++report.all_tasks.errors;
    }
  }

  const auto percent = [](DofOutcome& outcome) {
    outcome.error_percent =
        outcome.total == 0
            ? 0.0
            : 100.0 * static_cast<double>(outcome.errors) /
                  static_cast<double>(outcome.total);
  };
  for (DofOutcome& outcome : report.per_dof) percent(outcome);
  percent(report.all_tasks);
  return report;
}

}  // namespace msx
