#include "msx/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "msx/errors.hpp"
#include "msx/model_order.hpp"
#include "msx/stats.hpp"

namespace msx {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kCommands[] = {"generate",     "factorize", "select-order",
                                     "evaluate",     "classify",  "bench"};

std::string cell_tag(bool sparse, std::size_t channels, double snr) {
  std::ostringstream tag;
  tag << (sparse ? "sparse" : "dense") << "_" << channels << "ch_" << snr << "db";
  std::string s = tag.str();
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

struct Cell {
  bool sparse;
  std::size_t channels;
  double snr_db;
};

std::vector<Cell> grid_cells(const ExperimentSpec& spec) {
  std::vector<Cell> cells;
  for (bool sparse : spec.sparsity)
    for (std::size_t m : spec.channels)
      for (double snr : spec.snr_db) cells.push_back({sparse, m, snr});
  return cells;
}

GenConfig cell_config(const ExperimentSpec& spec, const Cell& cell,
                      std::size_t samples_fallback = 500) {
  GenConfig config;
  config.channels = cell.channels;
  config.synergies = spec.synergies;
  config.samples = spec.effective_samples(samples_fallback);
  config.sample_rate = spec.sample_rate;
  config.snr_db = cell.snr_db;
  config.sparse = cell.sparse;
  config.trials = spec.effective_trials();
  config.datasets = spec.effective_datasets();
  config.seed = spec.seed.value_or(0);
  config.envelope_source = spec.corpus_dir.empty() ? EnvelopeSource::Surrogate
                                                   : EnvelopeSource::Corpus;
  return config;
}

EnvelopeCorpus spec_corpus(const ExperimentSpec& spec) {
  if (spec.corpus_dir.empty()) return {};
  return load_corpus(spec.corpus_dir);
}

fs::path ensure_out_dir(const ExperimentSpec& spec) {
  if (spec.out_dir.empty()) fail(ErrorCode::SpecError, "output directory not set");
  fs::create_directories(spec.out_dir);
  return spec.out_dir;
}

std::string report_extension(ReportFormat format) {
  return format == ReportFormat::StructuredRecords ? ".jsonl" : ".csv";
}

// Every report carries the spec hash and seed as its first record so that
// any artifact names the run it came from.
ReportRecord provenance_record(const ExperimentSpec& spec) {
  return {{"record", "provenance"},
          {"spec_hash", spec_hash(spec)},
          {"seed", std::to_string(spec.seed.value_or(0))}};
}

void write_records(const ExperimentSpec& spec, std::vector<ReportRecord> records,
                   const fs::path& path) {
  if (spec.format == ReportFormat::StructuredRecords) {
    records.insert(records.begin(), provenance_record(spec));
    write_report(records, path.string(), spec.format);
    return;
  }
  // CSV keeps a rectangular body; provenance rides in a comment line.
  std::ostringstream header;
  header << "# spec_hash=" << spec_hash(spec) << " seed="
         << spec.seed.value_or(0) << "\n";
  const std::string tmp = path.string() + ".body";
  write_report(records, tmp, spec.format);
  std::ifstream body(tmp, std::ios::binary);
  std::ofstream out(path, std::ios::binary);
  out << header.str() << body.rdbuf();
  body.close();
  fs::remove(tmp);
}

std::vector<std::string> file_provenance(const ExperimentSpec& spec) {
  return {"spec_hash=" + spec_hash(spec),
          "seed=" + std::to_string(spec.seed.value_or(0))};
}

std::string trial_stem(std::size_t dataset, std::size_t trial) {
  return "d" + std::to_string(dataset) + "_t" + std::to_string(trial);
}

struct LoadedDataset {
  std::vector<EmgEpoch> epochs;
  std::vector<TruthSidecar> truths;  // empty when no sidecars exist
  Manifest manifest;
};

LoadedDataset load_dataset(const std::string& manifest_path, bool want_truth) {
  LoadedDataset data;
  data.manifest = read_manifest(manifest_path);
  data.epochs = load_manifest_epochs(data.manifest, manifest_path);
  if (!want_truth) return data;
  const fs::path base = fs::path(manifest_path).parent_path();
  for (const ManifestEntry& entry : data.manifest.entries) {
    fs::path truth = base / entry.path;
    truth.replace_extension(".truth.json");
    if (!fs::exists(truth)) {
      data.truths.clear();
      return data;
    }
    data.truths.push_back(read_sidecar(truth.string()));
  }
  return data;
}

std::string format_cell_value(double value) {
  if (std::isnan(value)) return "nan";
  return format_double(value);
}

}  // namespace

ExperimentSpec parse_spec_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& error) {
    fail(ErrorCode::SpecError, std::string("spec is not valid JSON: ") + error.what());
  }
  if (!doc.is_object()) fail(ErrorCode::SpecError, "spec must be a JSON object");

  ExperimentSpec spec;
  const std::set<std::string> known = {
      "command",     "channels",    "snr_db",       "sparsity",
      "synergies",   "samples",     "sample_rate",  "trials",
      "datasets",    "paper_scale", "methods",      "seed",
      "out",         "workers",     "format",       "manifest",
      "corpus",      "chance_draws", "bench_runs",  "knn_k",
      "train_fraction", "dofs"};
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) fail(ErrorCode::SpecError, "unknown spec field '" + key + "'");

  try {
    if (doc.contains("command")) spec.command = doc.at("command").get<std::string>();
    if (doc.contains("channels"))
      spec.channels = doc.at("channels").get<std::vector<std::size_t>>();
    if (doc.contains("snr_db"))
      spec.snr_db = doc.at("snr_db").get<std::vector<double>>();
    if (doc.contains("sparsity"))
      spec.sparsity = doc.at("sparsity").get<std::vector<bool>>();
    if (doc.contains("synergies")) spec.synergies = doc.at("synergies").get<std::size_t>();
    if (doc.contains("samples")) spec.samples = doc.at("samples").get<std::size_t>();
    if (doc.contains("sample_rate")) spec.sample_rate = doc.at("sample_rate").get<double>();
    if (doc.contains("trials")) spec.trials = doc.at("trials").get<std::size_t>();
    if (doc.contains("datasets")) spec.datasets = doc.at("datasets").get<std::size_t>();
    if (doc.contains("paper_scale")) spec.paper_scale = doc.at("paper_scale").get<bool>();
    if (doc.contains("methods")) {
      spec.methods.clear();
      for (const auto& item : doc.at("methods")) {
        const auto method = method_from_name(item.get<std::string>());
        if (!method)
          fail(ErrorCode::SpecError, "unknown method '" + item.get<std::string>() + "'");
        spec.methods.push_back(*method);
      }
    }
    if (doc.contains("seed")) spec.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("out")) spec.out_dir = doc.at("out").get<std::string>();
    if (doc.contains("workers")) spec.workers = doc.at("workers").get<std::size_t>();
    if (doc.contains("format")) {
      const std::string format = doc.at("format").get<std::string>();
      if (format == "records")
        spec.format = ReportFormat::StructuredRecords;
      else if (format == "table")
        spec.format = ReportFormat::DelimitedTable;
      else
        fail(ErrorCode::SpecError, "format must be 'records' or 'table'");
    }
    if (doc.contains("manifest")) spec.manifest_path = doc.at("manifest").get<std::string>();
    if (doc.contains("corpus")) spec.corpus_dir = doc.at("corpus").get<std::string>();
    if (doc.contains("chance_draws"))
      spec.chance_draws = doc.at("chance_draws").get<std::size_t>();
    if (doc.contains("bench_runs")) spec.bench_runs = doc.at("bench_runs").get<std::size_t>();
    if (doc.contains("knn_k")) spec.knn_k = doc.at("knn_k").get<std::size_t>();
    if (doc.contains("train_fraction"))
      spec.train_fraction = doc.at("train_fraction").get<double>();
    if (doc.contains("dofs")) {
      for (const auto& item : doc.at("dofs")) {
        DofGroup dof;
        dof.name = item.at("name").get<std::string>();
        dof.task_a = item.at("task_a").get<std::string>();
        dof.task_b = item.at("task_b").get<std::string>();
        spec.dofs.push_back(std::move(dof));
      }
    }
  } catch (const nlohmann::json::exception& error) {
    fail(ErrorCode::SpecError, std::string("bad spec field: ") + error.what());
  }
  return spec;
}

void validate_spec(const ExperimentSpec& spec) {
  const bool known_command =
      std::any_of(std::begin(kCommands), std::end(kCommands),
                  [&](const char* c) { return spec.command == c; });
  if (!known_command)
    fail(ErrorCode::SpecError, "unknown command '" + spec.command + "'");

  if (spec.methods.empty()) fail(ErrorCode::SpecError, "at least one method required");
  if (spec.channels.empty() || spec.snr_db.empty() || spec.sparsity.empty())
    fail(ErrorCode::SpecError, "empty setting grid");
  for (std::size_t m : spec.channels)
    if (m < spec.synergies)
      fail(ErrorCode::SpecError, "channels must be >= synergies in every cell");
  for (double snr : spec.snr_db)
    if (!(snr > 0.0)) fail(ErrorCode::SpecError, "snr_db values must be > 0");
  if (spec.synergies < 1) fail(ErrorCode::SpecError, "synergies must be >= 1");
  if (spec.workers < 1) fail(ErrorCode::SpecError, "workers must be >= 1");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    fail(ErrorCode::SpecError, "train_fraction must be in (0, 1)");
  if (spec.knn_k < 1 || spec.knn_k % 2 == 0)
    fail(ErrorCode::SpecError, "knn_k must be odd");

  const bool uses_generation = spec.manifest_path.empty();
  const bool stochastic_methods =
      std::any_of(spec.methods.begin(), spec.methods.end(), [](Method m) {
        return m == Method::ICA || m == Method::NMF;
      });
  bool needs_seed = false;
  if (spec.command == "generate" || spec.command == "bench") needs_seed = true;
  if ((spec.command == "evaluate" || spec.command == "select-order") &&
      uses_generation)
    needs_seed = true;
  if ((spec.command == "factorize" || spec.command == "classify" ||
       spec.command == "evaluate") &&
      stochastic_methods)
    needs_seed = true;
  if (needs_seed && !spec.seed)
    fail(ErrorCode::SpecError, "seed is mandatory for this command");

  if ((spec.command == "factorize" || spec.command == "classify") &&
      spec.manifest_path.empty())
    fail(ErrorCode::SpecError, spec.command + " requires a dataset manifest");
  if (spec.command != "bench" && spec.out_dir.empty())
    fail(ErrorCode::SpecError, "output directory not set");
}

std::string spec_hash(const ExperimentSpec& spec) {
  std::ostringstream canon;
  canon << "command=" << spec.command << ";synergies=" << spec.synergies
        << ";samples=" << spec.samples << ";rate=" << spec.sample_rate
        << ";trials=" << spec.effective_trials()
        << ";datasets=" << spec.effective_datasets() << ";channels=";
  for (std::size_t m : spec.channels) canon << m << ",";
  canon << ";snr=";
  for (double snr : spec.snr_db) canon << format_double(snr) << ",";
  canon << ";sparsity=";
  for (bool sparse : spec.sparsity) canon << (sparse ? 1 : 0) << ",";
  canon << ";methods=";
  for (Method method : spec.methods) canon << method_name(method) << ",";
  canon << ";seed=" << spec.seed.value_or(0) << ";manifest=" << spec.manifest_path
        << ";corpus=" << spec.corpus_dir << ";chance=" << spec.chance_draws
        << ";bench=" << spec.bench_runs << ";k=" << spec.knn_k
        << ";fraction=" << format_double(spec.train_fraction) << ";dofs=";
  for (const DofGroup& dof : spec.dofs)
    canon << dof.name << ":" << dof.task_a << ":" << dof.task_b << ",";

  // FNV-1a 64
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : canon.str()) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << hash;
  return hex.str();
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& work) {
  if (count == 0) return;
  const std::size_t pool = std::min(std::max<std::size_t>(workers, 1), count);
  if (pool == 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (std::size_t w = 0; w < pool; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          work(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& thread : threads) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

void cmd_generate(const ExperimentSpec& spec) {
  const fs::path out = ensure_out_dir(spec);
  const EnvelopeCorpus corpus = spec_corpus(spec);
  const std::vector<std::string> provenance = file_provenance(spec);

  for (const Cell& cell : grid_cells(spec)) {
    const fs::path cell_dir = out / cell_tag(cell.sparse, cell.channels, cell.snr_db);
    fs::create_directories(cell_dir);
    const GenConfig config = cell_config(spec, cell);
    const TrialGenerator generator(config, corpus);

    const std::size_t total = config.datasets * config.trials;
    std::vector<ManifestEntry> entries(total);
    parallel_for(total, spec.workers, [&](std::size_t index) {
      const std::size_t d = index / config.trials;
      const std::size_t t = index % config.trials;
      const SyntheticTrial trial = generator.trial(d, t);
      const std::string stem = trial_stem(d, t);

      EmgEpoch epoch = trial.epoch;
      epoch.subject = "d" + std::to_string(d);
      epoch.label = "synthetic";
      epoch.repetition = static_cast<int>(t);
      write_epoch(epoch, (cell_dir / (stem + ".csv")).string(), provenance);

      TruthSidecar sidecar;
      sidecar.dataset = d;
      sidecar.trial = t;
      sidecar.true_synergies = trial.true_synergies.s;
      sidecar.noise_power = trial.noise_power;
      sidecar.generator_seed = config.seed;
      write_sidecar(sidecar, (cell_dir / (stem + ".truth.json")).string(),
                    {{"spec_hash", spec_hash(spec)}});

      entries[index] = ManifestEntry{"d" + std::to_string(d), "synthetic",
                                     static_cast<int>(t), stem + ".csv"};
    });

    Manifest manifest;
    manifest.source = "synthetic";
    manifest.sample_rate = config.sample_rate;
    manifest.entries = std::move(entries);
    manifest.metadata["spec_hash"] = spec_hash(spec);
    manifest.metadata["seed"] = std::to_string(config.seed);
    manifest.metadata["sparse"] = cell.sparse ? "true" : "false";
    manifest.metadata["snr_db"] = format_double(cell.snr_db);
    manifest.metadata["synergies"] = std::to_string(config.synergies);
    write_manifest(manifest, (cell_dir / "manifest.json").string());
  }
}

void cmd_factorize(const ExperimentSpec& spec) {
  const fs::path out = ensure_out_dir(spec);
  const LoadedDataset data = load_dataset(spec.manifest_path, false);
  const std::size_t r = spec.synergies;

  std::vector<ReportRecord> records(data.epochs.size() * spec.methods.size());
  parallel_for(records.size(), spec.workers, [&](std::size_t index) {
    const std::size_t e = index / spec.methods.size();
    const Method method = spec.methods[index % spec.methods.size()];
    const EmgEpoch& epoch = data.epochs[e];
    const std::uint64_t seed = derive_seed(spec.seed.value_or(0), e,
                                           static_cast<std::uint64_t>(method));
    const FactorizationResult result =
        factorize(epoch, method, std::min<std::size_t>(r, epoch.channels()), seed);

    ReportRecord record;
    record.emplace_back("subject", data.manifest.entries[e].subject);
    record.emplace_back("task", data.manifest.entries[e].task);
    record.emplace_back("repetition",
                        std::to_string(data.manifest.entries[e].repetition));
    record.emplace_back("method", method_name(method));
    record.emplace_back("synergies", std::to_string(result.synergies.synergy_count()));
    record.emplace_back("iterations", std::to_string(result.iterations));
    record.emplace_back("converged", result.converged ? "1" : "0");
    record.emplace_back("residual", format_double(result.residual));
    std::ostringstream s_values;
    for (std::size_t i = 0; i < result.synergies.s.rows(); ++i)
      for (std::size_t j = 0; j < result.synergies.s.cols(); ++j) {
        if (i + j) s_values << ' ';
        s_values << format_double(result.synergies.s(i, j));
      }
    record.emplace_back("synergy_matrix", s_values.str());
    records[index] = std::move(record);
  });

  write_records(spec, std::move(records),
                out / ("factorize" + report_extension(spec.format)));
}

void cmd_select_order(const ExperimentSpec& spec) {
  const fs::path out = ensure_out_dir(spec);
  std::vector<ReportRecord> records;

  const auto report_epoch = [&](const std::string& subject, const std::string& task,
                                int repetition, const MdlReport& mdl) {
    ReportRecord record;
    record.emplace_back("subject", subject);
    record.emplace_back("task", task);
    record.emplace_back("repetition", std::to_string(repetition));
    record.emplace_back("r_star", std::to_string(mdl.r_star));
    record.emplace_back("r_max", std::to_string(mdl.r_max));
    std::ostringstream scores;
    for (const auto& [r, score] : mdl.scores) {
      if (r > 1) scores << ' ';
      scores << r << '=' << format_double(score);
    }
    record.emplace_back("mdl_scores", scores.str());
    return record;
  };

  if (!spec.manifest_path.empty()) {
    const LoadedDataset data = load_dataset(spec.manifest_path, false);
    records.resize(data.epochs.size());
    parallel_for(data.epochs.size(), spec.workers, [&](std::size_t e) {
      const MdlReport mdl = select_order(data.epochs[e]);
      records[e] = report_epoch(data.manifest.entries[e].subject,
                                data.manifest.entries[e].task,
                                data.manifest.entries[e].repetition, mdl);
    });
  } else {
    const EnvelopeCorpus corpus = spec_corpus(spec);
    for (const Cell& cell : grid_cells(spec)) {
      const GenConfig config = cell_config(spec, cell);
      const TrialGenerator generator(config, corpus);
      const std::size_t total = config.datasets * config.trials;
      std::vector<ReportRecord> cell_records(total);
      parallel_for(total, spec.workers, [&](std::size_t index) {
        const std::size_t d = index / config.trials;
        const std::size_t t = index % config.trials;
        const SyntheticTrial trial = generator.trial(d, t);
        const MdlReport mdl = select_order(trial.epoch);
        ReportRecord record = report_epoch(
            "d" + std::to_string(d), cell_tag(cell.sparse, cell.channels, cell.snr_db),
            static_cast<int>(t), mdl);
        cell_records[index] = std::move(record);
      });
      for (ReportRecord& record : cell_records) records.push_back(std::move(record));
    }
  }

  write_records(spec, std::move(records),
                out / ("select_order" + report_extension(spec.format)));
}

namespace {

struct CellEvaluation {
  CellSummary summary;
  std::vector<EvaluatedTrial> trials;
  std::vector<std::size_t> datasets_of_trials;
  std::vector<double> chance_rates_per_dataset;
};

CellEvaluation summarize_with_datasets(const ExperimentSpec& spec,
                                       const std::vector<SyntheticTrial>& trials,
                                       const std::vector<FactorizationResult>& results,
                                       CellSetting setting, std::uint64_t chance_seed,
                                       std::size_t n_datasets) {
  CellEvaluation out;
  SummarizeConfig summarize;
  summarize.n_random = spec.chance_draws;
  summarize.seed = chance_seed;
  out.summary = summarize_cell(trials, results, setting, summarize, &out.trials);
  out.datasets_of_trials.resize(trials.size());
  for (std::size_t index = 0; index < trials.size(); ++index)
    out.datasets_of_trials[index] = trials[index].dataset;

  // Per-dataset chance pairing rates against that dataset's own truths, for
  // the success-rate t-test.
  if (n_datasets >= 2) {
    const std::size_t draws =
        std::max<std::size_t>(100, spec.chance_draws / n_datasets);
    out.chance_rates_per_dataset.resize(n_datasets, 0.0);
    for (std::size_t d = 0; d < n_datasets; ++d) {
      std::vector<const SynergySet*> truths;
      for (const SyntheticTrial& trial : trials)
        if (trial.dataset == d) truths.push_back(&trial.true_synergies);
      if (truths.empty()) continue;
      Rng rng(derive_seed(chance_seed, d, 0x7E57));
      std::size_t matched = 0;
      for (std::size_t k = 0; k < draws; ++k) {
        const SynergySet& truth = *truths[k % truths.size()];
        const SynergySet random_set =
            random_synergies(truth.s.rows(), truth.s.cols(), false, rng);
        if (match(truth, random_set).fully_matched) ++matched;
      }
      out.chance_rates_per_dataset[d] =
          static_cast<double>(matched) / static_cast<double>(draws);
    }
  }
  return out;
}

CellEvaluation evaluate_cell(const ExperimentSpec& spec, const Cell& cell,
                             Method method, const EnvelopeCorpus& corpus) {
  const GenConfig config = cell_config(spec, cell);
  const TrialGenerator generator(config, corpus);
  const std::size_t total = config.datasets * config.trials;

  std::vector<SyntheticTrial> trials(total);
  std::vector<FactorizationResult> results(total);
  parallel_for(total, spec.workers, [&](std::size_t index) {
    const std::size_t d = index / config.trials;
    const std::size_t t = index % config.trials;
    SyntheticTrial trial = generator.trial(d, t);
    const std::uint64_t seed =
        derive_seed(derive_seed(config.seed, d, t),
                    0xF0 + static_cast<std::uint64_t>(method));
    results[index] = factorize(trial.epoch, method, config.synergies, seed);
    trials[index] = std::move(trial);
  });

  CellSetting setting{cell.sparse, cell.channels, cell.snr_db, method};
  const std::uint64_t chance_seed =
      derive_seed(config.seed, 0xBA5E, static_cast<std::uint64_t>(method));
  return summarize_with_datasets(spec, trials, results, setting, chance_seed,
                                 config.datasets);
}

// A generated-on-disk dataset: epochs plus truth sidecars form one cell.
CellEvaluation evaluate_manifest_cell(const ExperimentSpec& spec, Method method,
                                      const LoadedDataset& data,
                                      CellSetting setting) {
  if (data.truths.empty())
    fail(ErrorCode::SpecError,
         "evaluate needs .truth.json sidecars next to every epoch file");
  const std::size_t total = data.epochs.size();
  std::vector<SyntheticTrial> trials(total);
  std::vector<FactorizationResult> results(total);
  parallel_for(total, spec.workers, [&](std::size_t index) {
    SyntheticTrial trial;
    trial.dataset = data.truths[index].dataset;
    trial.trial = data.truths[index].trial;
    trial.epoch = data.epochs[index];
    trial.true_synergies = SynergySet{data.truths[index].true_synergies, Method::NMF};
    trial.noise_power = data.truths[index].noise_power;
    const std::uint64_t seed =
        derive_seed(derive_seed(spec.seed.value_or(data.truths[index].generator_seed),
                                trial.dataset, trial.trial),
                    0xF0 + static_cast<std::uint64_t>(method));
    const std::size_t r =
        std::min<std::size_t>(trial.true_synergies.s.cols(), trial.epoch.channels());
    results[index] = factorize(trial.epoch, method, r, seed);
    trials[index] = std::move(trial);
  });
  std::size_t n_datasets = 0;
  for (const TruthSidecar& truth : data.truths)
    n_datasets = std::max(n_datasets, truth.dataset + 1);
  const std::uint64_t chance_seed = derive_seed(
      spec.seed.value_or(data.truths.front().generator_seed), 0xBA5E,
      static_cast<std::uint64_t>(method));
  return summarize_with_datasets(spec, trials, results, setting, chance_seed,
                                 n_datasets);
}

}  // namespace

void cmd_evaluate(const ExperimentSpec& spec) {
  const fs::path out = ensure_out_dir(spec);

  struct Entry {
    Cell cell;
    Method method;
    CellEvaluation evaluation;
  };
  std::vector<Entry> entries;
  if (!spec.manifest_path.empty()) {
    const LoadedDataset data = load_dataset(spec.manifest_path, true);
    Cell cell{false, 0, 0.0};
    if (data.manifest.metadata.count("sparse"))
      cell.sparse = data.manifest.metadata.at("sparse") == "true";
    if (data.manifest.metadata.count("snr_db"))
      cell.snr_db = std::stod(data.manifest.metadata.at("snr_db"));
    if (!data.epochs.empty()) cell.channels = data.epochs.front().channels();
    for (Method method : spec.methods) {
      CellSetting setting{cell.sparse, cell.channels, cell.snr_db, method};
      entries.push_back(
          {cell, method, evaluate_manifest_cell(spec, method, data, setting)});
    }
  } else {
    const EnvelopeCorpus corpus = spec_corpus(spec);
    for (const Cell& cell : grid_cells(spec))
      for (Method method : spec.methods)
        entries.push_back({cell, method, evaluate_cell(spec, cell, method, corpus)});
  }

  std::vector<ReportRecord> cell_records;
  std::vector<ReportRecord> trial_records;
  std::vector<ReportRecord> test_records;
  std::vector<CellSummary> summaries;

  // per (factor level, method) samples for the ANOVA comparisons
  std::map<std::string, std::map<std::string, std::vector<double>>> by_snr;
  std::map<std::string, std::map<std::string, std::vector<double>>> by_channels;
  std::map<std::string, std::map<std::string, std::vector<double>>> by_sparsity;

  {
    for (const Entry& entry : entries) {
      const Cell& cell = entry.cell;
      const Method method = entry.method;
      const CellEvaluation& evaluation = entry.evaluation;
      const CellSummary& cell_summary = evaluation.summary;
      summaries.push_back(cell_summary);

      ReportRecord record;
      record.emplace_back("sparse", cell.sparse ? "1" : "0");
      record.emplace_back("channels", std::to_string(cell.channels));
      record.emplace_back("snr_db", format_double(cell.snr_db));
      record.emplace_back("method", method_name(method));
      record.emplace_back("trials", std::to_string(cell_summary.trial_count));
      record.emplace_back("success_rate", format_double(cell_summary.success_rate));
      record.emplace_back("grand_average",
                          format_cell_value(cell_summary.grand_average));
      record.emplace_back("chance_grand_average",
                          format_double(cell_summary.chance_grand_average));
      record.emplace_back("chance_matched_rate",
                          format_double(cell_summary.chance_matched_rate));
      record.emplace_back("normalized_grand_average",
                          format_cell_value(cell_summary.normalized));
      record.emplace_back("normalized_std",
                          format_double(cell_summary.normalized_std));
      record.emplace_back("nonconvergence_rate",
                          format_double(cell_summary.nonconvergence_rate));
      record.emplace_back("chance_seed", std::to_string(cell_summary.chance_seed));
      record.emplace_back("chance_draws", std::to_string(cell_summary.chance_draws));
      cell_records.push_back(std::move(record));

      const std::string tag = cell_tag(cell.sparse, cell.channels, cell.snr_db);
      for (std::size_t i = 0; i < evaluation.trials.size(); ++i) {
        const EvaluatedTrial& trial = evaluation.trials[i];
        ReportRecord tr;
        tr.emplace_back("cell", tag);
        tr.emplace_back("method", method_name(method));
        tr.emplace_back("dataset", std::to_string(trial.dataset));
        tr.emplace_back("trial", std::to_string(trial.trial));
        tr.emplace_back("fully_matched", trial.report.fully_matched ? "1" : "0");
        tr.emplace_back("trial_average",
                        trial.report.trial_average
                            ? format_double(*trial.report.trial_average)
                            : "nan");
        tr.emplace_back("converged", trial.converged ? "1" : "0");
        tr.emplace_back("residual", format_double(trial.residual));
        tr.emplace_back("degenerate", trial.degenerate ? "1" : "0");
        trial_records.push_back(std::move(tr));
      }

      // success-rate-vs-chance t-test over per-dataset rates
      const std::size_t n_datasets = evaluation.chance_rates_per_dataset.size();
      if (n_datasets >= 2) {
        std::vector<double> method_rates(n_datasets, 0.0);
        std::vector<double> counts(n_datasets, 0.0);
        for (std::size_t i = 0; i < evaluation.trials.size(); ++i) {
          const std::size_t d = evaluation.datasets_of_trials[i];
          counts[d] += 1.0;
          if (evaluation.trials[i].report.fully_matched) method_rates[d] += 1.0;
        }
        for (std::size_t d = 0; d < n_datasets; ++d)
          if (counts[d] > 0.0) method_rates[d] /= counts[d];
        try {
          const TestResult test =
              two_sample_t(method_rates, evaluation.chance_rates_per_dataset);
          ReportRecord tr;
          tr.emplace_back("test", "success_rate_vs_chance");
          tr.emplace_back("cell", tag);
          tr.emplace_back("method", method_name(method));
          tr.emplace_back("t", format_double(test.statistic));
          tr.emplace_back("dof", format_double(test.dof1));
          tr.emplace_back("p", format_double(test.p_value));
          tr.emplace_back("significant", test.significant ? "1" : "0");
          test_records.push_back(std::move(tr));
        } catch (const Error& error) {
          if (error.code() != ErrorCode::DegenerateInput) throw;
          // all rates identical in both groups; no test to report
        }
      }

      const std::vector<double> normalized = normalized_trial_values(
          evaluation.trials, cell_summary.chance_grand_average);
      by_snr[format_double(cell.snr_db)][method_name(method)]
          .insert(by_snr[format_double(cell.snr_db)][method_name(method)].end(),
                  normalized.begin(), normalized.end());
      by_channels[std::to_string(cell.channels)][method_name(method)]
          .insert(by_channels[std::to_string(cell.channels)][method_name(method)].end(),
                  normalized.begin(), normalized.end());
      by_sparsity[cell.sparse ? "sparse" : "dense"][method_name(method)]
          .insert(by_sparsity[cell.sparse ? "sparse" : "dense"][method_name(method)].end(),
                  normalized.begin(), normalized.end());
    }
  }

  // two-way ANOVA (method x factor) on the normalized per-trial values,
  // truncated to balanced cells
  const auto run_two_way = [&](const std::string& factor_name,
                               const std::map<std::string,
                                              std::map<std::string,
                                                       std::vector<double>>>& table) {
    if (table.size() < 2 || spec.methods.size() < 2) return;
    std::size_t cell_n = SIZE_MAX;
    for (const auto& [level, row] : table)
      for (Method method : spec.methods) {
        const auto it = row.find(method_name(method));
        const std::size_t size = it == row.end() ? 0 : it->second.size();
        cell_n = std::min(cell_n, size);
      }
    if (cell_n < 2) return;
    std::vector<std::vector<std::vector<double>>> cells;
    for (const auto& [level, row] : table) {
      std::vector<std::vector<double>> row_cells;
      for (Method method : spec.methods) {
        std::vector<double> values = row.at(method_name(method));
        values.resize(cell_n);
        row_cells.push_back(std::move(values));
      }
      cells.push_back(std::move(row_cells));
    }
    const TwoWayAnovaResult anova = two_way_anova(cells);
    const auto add = [&](const std::string& effect, const TestResult& test) {
      ReportRecord tr;
      tr.emplace_back("test", "two_way_anova");
      tr.emplace_back("factor", factor_name);
      tr.emplace_back("effect", effect);
      tr.emplace_back("F", format_double(test.statistic));
      tr.emplace_back("dof1", format_double(test.dof1));
      tr.emplace_back("dof2", format_double(test.dof2));
      tr.emplace_back("p", format_double(test.p_value));
      tr.emplace_back("significant", test.significant ? "1" : "0");
      test_records.push_back(std::move(tr));
    };
    add(factor_name, anova.factor_a);
    add("method", anova.factor_b);
    add(factor_name + "*method", anova.interaction);
  };
  run_two_way("snr", by_snr);
  run_two_way("channels", by_channels);
  run_two_way("sparsity", by_sparsity);

  write_records(spec, std::move(cell_records),
                out / ("cells" + report_extension(spec.format)));
  write_records(spec, std::move(trial_records),
                out / ("trials" + report_extension(spec.format)));
  if (!test_records.empty())
    write_records(spec, std::move(test_records),
                  out / ("tests" + report_extension(spec.format)));
  emit_bar_chart(summaries, (out / "similarity.svg").string(),
                 file_provenance(spec));
}

void cmd_classify(const ExperimentSpec& spec) {
  const fs::path out = ensure_out_dir(spec);
  const LoadedDataset data = load_dataset(spec.manifest_path, false);

  std::vector<DofGroup> dofs = spec.dofs;
  if (dofs.empty()) {
    std::set<std::string> tasks;
    for (const ManifestEntry& entry : data.manifest.entries) tasks.insert(entry.task);
    std::vector<std::string> sorted(tasks.begin(), tasks.end());
    for (std::size_t i = 0; i + 1 < sorted.size(); i += 2)
      dofs.push_back(DofGroup{"dof" + std::to_string(i / 2 + 1), sorted[i],
                              sorted[i + 1]});
    if (dofs.empty())
      fail(ErrorCode::SpecError, "dataset has fewer than two tasks");
  }

  ExperimentConfig config;
  config.k = spec.knn_k;
  config.split.train_fraction = spec.train_fraction;
  config.seed = spec.seed.value_or(0);

  std::vector<ReportRecord> report_records;
  std::vector<ReportRecord> feature_records;
  for (Method method : spec.methods) {
    // feature extraction mirrors run_experiment's seeding so the persisted
    // features reproduce the report exactly
    std::vector<LabeledFeature> features(data.epochs.size());
    parallel_for(data.epochs.size(), spec.workers, [&](std::size_t e) {
      features[e] = extract_feature(data.epochs[e], method,
                                    derive_seed(config.seed, 0xFEA7, e));
    });
    for (std::size_t e = 0; e < features.size(); ++e) {
      ReportRecord fr;
      fr.emplace_back("method", method_name(method));
      fr.emplace_back("subject", features[e].subject);
      fr.emplace_back("task", features[e].label);
      fr.emplace_back("repetition", std::to_string(features[e].repetition));
      std::ostringstream values;
      for (std::size_t i = 0; i < features[e].vector.size(); ++i) {
        if (i) values << ' ';
        values << format_double(features[e].vector[i]);
      }
      fr.emplace_back("feature", values.str());
      feature_records.push_back(std::move(fr));
    }

    const ClassificationReport report =
        run_experiment(data.epochs, method, dofs, config);
    for (const DofOutcome& outcome : report.per_dof) {
      ReportRecord rr;
      rr.emplace_back("method", method_name(method));
      rr.emplace_back("dof", outcome.name);
      rr.emplace_back("errors", std::to_string(outcome.errors));
      rr.emplace_back("total", std::to_string(outcome.total));
      rr.emplace_back("error_percent", format_double(outcome.error_percent));
      report_records.push_back(std::move(rr));
    }
    ReportRecord rr;
    rr.emplace_back("method", method_name(method));
    rr.emplace_back("dof", "all");
    rr.emplace_back("errors", std::to_string(report.all_tasks.errors));
    rr.emplace_back("total", std::to_string(report.all_tasks.total));
    rr.emplace_back("error_percent", format_double(report.all_tasks.error_percent));
    report_records.push_back(std::move(rr));
  }

  write_records(spec, std::move(report_records),
                out / ("classification" + report_extension(spec.format)));
  write_records(spec, std::move(feature_records),
                out / ("features" + report_extension(spec.format)));
}

void cmd_bench(const ExperimentSpec& spec) {
  const EnvelopeCorpus corpus = spec_corpus(spec);
  const Cell cell{spec.sparsity.front(), spec.channels.front(),
                  spec.snr_db.front()};
  const GenConfig base = cell_config(spec, cell, /*samples_fallback=*/1000);

  // Median over >= bench_runs timings per method, spread over distinct
  // epochs so that convergence luck on one draw cannot dominate.
  const std::size_t distinct = 20;
  const std::size_t repeats = (spec.bench_runs + distinct - 1) / distinct;

  GenConfig config = base;
  config.trials = distinct;
  config.datasets = 1;
  const TrialGenerator generator(config, corpus);
  std::vector<EmgEpoch> epochs;
  epochs.reserve(distinct);
  for (std::size_t t = 0; t < distinct; ++t) epochs.push_back(generator.trial(0, t).epoch);

  std::vector<ReportRecord> records;
  std::cout << "method,median_seconds,runs\n";
  for (Method method : spec.methods) {
    std::vector<double> times;
    times.reserve(distinct * repeats);
    for (std::size_t t = 0; t < distinct; ++t)
      for (std::size_t rep = 0; rep < repeats; ++rep) {
        const FactorizationResult result =
            factorize(epochs[t], method, config.synergies,
                      derive_seed(config.seed, t, rep));
        times.push_back(result.elapsed_seconds);
      }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];
    std::cout << method_name(method) << ',' << format_double(median) << ','
              << times.size() << '\n';
    ReportRecord record;
    record.emplace_back("method", method_name(method));
    record.emplace_back("median_seconds", format_double(median));
    record.emplace_back("runs", std::to_string(times.size()));
    records.push_back(std::move(record));
  }

  if (!spec.out_dir.empty()) {
    const fs::path out = ensure_out_dir(spec);
    write_records(spec, std::move(records),
                  out / ("bench" + report_extension(spec.format)));
  }
}

int run_command(const ExperimentSpec& spec) {
  validate_spec(spec);
  if (spec.command == "generate") cmd_generate(spec);
  else if (spec.command == "factorize") cmd_factorize(spec);
  else if (spec.command == "select-order") cmd_select_order(spec);
  else if (spec.command == "evaluate") cmd_evaluate(spec);
  else if (spec.command == "classify") cmd_classify(spec);
  else if (spec.command == "bench") cmd_bench(spec);
  return 0;
}

}  // namespace msx
