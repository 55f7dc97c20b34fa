#ifndef MSX_RUNNER_HPP
#define MSX_RUNNER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msx/classify.hpp"
#include "msx/evaluate.hpp"
#include "msx/io.hpp"
#include "msx/synthgen.hpp"

namespace msx {

struct ExperimentSpec {
  std::string command;

  // generation grid; one cell per (sparsity, channels, snr) combination
  std::vector<std::size_t> channels = {12};
  std::vector<double> snr_db = {15.0};
  std::vector<bool> sparsity = {false};
  std::size_t synergies = 4;
  std::size_t samples = 0;  // 0 = per-command default (500; bench 1000)
  double sample_rate = 100.0;
  std::size_t trials = 0;    // 0 = scale default
  std::size_t datasets = 0;  // 0 = scale default
  bool paper_scale = false;  // 1000 trials x 10 datasets instead of 100 x 3

  std::vector<Method> methods = {Method::PCA, Method::ICA, Method::NMF,
                                 Method::SOBI};
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::size_t workers = 1;
  ReportFormat format = ReportFormat::StructuredRecords;

  std::string manifest_path;  // dataset input instead of in-memory generation
  std::string corpus_dir;     // envelope corpus for corpus-mode generation

  std::size_t chance_draws = 1000;
  std::size_t bench_runs = 100;
  std::size_t knn_k = 3;
  double train_fraction = 0.6;
  std::vector<DofGroup> dofs;  // empty = paired from sorted task names

  std::size_t effective_trials() const {
    return trials ? trials : (paper_scale ? 1000 : 100);
  }
  std::size_t effective_datasets() const {
    return datasets ? datasets : (paper_scale ? 10 : 3);
  }
  std::size_t effective_samples(std::size_t fallback = 500) const {
    return samples ? samples : fallback;
  }
};

// Parse a spec document (JSON text); unknown fields are rejected. Throws
// SpecError with a field-level message.
ExperimentSpec parse_spec_json(const std::string& text);

// Throws SpecError on invalid combinations (bad grid, missing seed for a
// stochastic command, missing inputs).
void validate_spec(const ExperimentSpec& spec);

// Hash of the semantic fields only; workers, output directory and report
// format do not change numeric results and are excluded.
std::string spec_hash(const ExperimentSpec& spec);

// Bounded worker pool over [0, count); the work function sees the item
// index. Results must be written to per-index slots so that scheduling order
// cannot influence output.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& work);

int run_command(const ExperimentSpec& spec);

// Individual commands (exposed for tests).
void cmd_generate(const ExperimentSpec& spec);
void cmd_factorize(const ExperimentSpec& spec);
void cmd_select_order(const ExperimentSpec& spec);
void cmd_evaluate(const ExperimentSpec& spec);
void cmd_classify(const ExperimentSpec& spec);
void cmd_bench(const ExperimentSpec& spec);

}  // namespace msx

#endif
