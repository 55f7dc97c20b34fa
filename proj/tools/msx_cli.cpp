// msx command-line driver. Flags assemble a JSON experiment spec (a --spec
// file provides defaults, flags win) which runs through the C API.
//
// Exit codes: 0 success, 1 module error, 2 spec validation failure.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msx/msx.h"

namespace {

using ordered_json = nlohmann::ordered_json;

int status_to_exit(msx_status status) {
  if (status == MSX_OK) return 0;
  if (status == MSX_ERR_SPEC) return 2;
  return 1;
}

void print_diagnostic(msx_status status) {
  ordered_json diag;
  diag["error"] = msx_status_name(status);
  diag["message"] = msx_last_error();
  std::cerr << diag.dump() << std::endl;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msx - matrix factorisation benchmark for muscle synergy extraction"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir;
  std::string manifest;
  std::string corpus;
  std::string methods;
  std::string channels;
  std::string snr_db;
  std::string format;
  std::string dofs;
  std::uint64_t seed = 0;
  std::size_t trials = 0, datasets = 0, samples = 0, workers = 0, synergies = 0;
  std::size_t bench_runs = 0, knn_k = 0;
  bool sparse = false, dense = false, paper_scale = false;

  const char* env_out = std::getenv("MSX_OUT_DIR");

  std::vector<CLI::App*> commands;
  for (const char* name : {"generate", "factorize", "select-order", "evaluate",
                           "classify", "bench"}) {
    CLI::App* cmd = app.add_subcommand(name);
    cmd->add_option("--spec", spec_path, "experiment spec file (JSON)");
    cmd->add_option("--seed", seed, "root seed (mandatory for stochastic commands)");
    cmd->add_option("--methods", methods, "comma list: pca,ica,nmf,sobi");
    cmd->add_option("--channels", channels, "comma list of channel counts");
    cmd->add_option("--snr-db", snr_db, "comma list of SNR levels (dB)");
    cmd->add_flag("--sparse", sparse, "sparse synergy generation");
    cmd->add_flag("--dense", dense, "non-sparse synergy generation");
    cmd->add_option("--trials", trials, "trials per dataset");
    cmd->add_option("--datasets", datasets, "datasets per setting");
    cmd->add_option("--samples", samples, "samples per trial");
    cmd->add_option("--synergies", synergies, "synergy count r");
    cmd->add_flag("--paper-scale", paper_scale, "1000 trials x 10 datasets");
    cmd->add_option("--workers", workers, "worker threads");
    cmd->add_option("--out", out_dir, "output directory (default $MSX_OUT_DIR)");
    cmd->add_option("--format", format, "report format: records|table");
    cmd->add_option("--manifest", manifest, "dataset manifest path");
    cmd->add_option("--corpus", corpus, "envelope corpus directory");
    cmd->add_option("--bench-runs", bench_runs, "timed runs per method");
    cmd->add_option("--knn-k", knn_k, "k for the k-NN classifier");
    cmd->add_option("--dofs", dofs, "name:taskA:taskB[,name:taskA:taskB...]");
    commands.push_back(cmd);
  }

  CLI11_PARSE(app, argc, argv);
  CLI::App* active = app.get_subcommands().front();

  ordered_json spec = ordered_json::object();
  if (active->count("--spec")) {
    std::ifstream in(spec_path);
    if (!in) {
      std::cerr << "cannot read spec file: " << spec_path << std::endl;
      return 2;
    }
    try {
      spec = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& error) {
      std::cerr << "spec file is not valid JSON: " << error.what() << std::endl;
      return 2;
    }
    if (!spec.is_object()) {
      std::cerr << "spec file must hold a JSON object" << std::endl;
      return 2;
    }
  }

  spec["command"] = active->get_name();
  if (active->count("--seed")) spec["seed"] = seed;
  if (active->count("--methods")) spec["methods"] = split_csv(methods);
  if (active->count("--channels")) {
    std::vector<std::size_t> values;
    for (const std::string& item : split_csv(channels))
      values.push_back(std::stoul(item));
    spec["channels"] = values;
  }
  if (active->count("--snr-db")) {
    std::vector<double> values;
    for (const std::string& item : split_csv(snr_db))
      values.push_back(std::stod(item));
    spec["snr_db"] = values;
  }
  if (active->count("--sparse") || active->count("--dense")) {
    std::vector<bool> modes;
    if (active->count("--dense")) modes.push_back(false);
    if (active->count("--sparse")) modes.push_back(true);
    spec["sparsity"] = modes;
  }
  if (active->count("--trials")) spec["trials"] = trials;
  if (active->count("--datasets")) spec["datasets"] = datasets;
  if (active->count("--samples")) spec["samples"] = samples;
  if (active->count("--synergies")) spec["synergies"] = synergies;
  if (active->count("--paper-scale")) spec["paper_scale"] = true;
  if (active->count("--workers")) spec["workers"] = workers;
  if (active->count("--out"))
    spec["out"] = out_dir;
  else if (!spec.contains("out") && env_out)
    spec["out"] = env_out;
  if (active->count("--format")) spec["format"] = format;
  if (active->count("--manifest")) spec["manifest"] = manifest;
  if (active->count("--corpus")) spec["corpus"] = corpus;
  if (active->count("--bench-runs")) spec["bench_runs"] = bench_runs;
  if (active->count("--knn-k")) spec["knn_k"] = knn_k;
  if (active->count("--dofs")) {
    ordered_json groups = ordered_json::array();
    for (const std::string& item : split_csv(dofs)) {
      const auto first = item.find(':');
      const auto second = item.find(':', first + 1);
      if (first == std::string::npos || second == std::string::npos) {
        std::cerr << "bad --dofs entry '" << item << "'" << std::endl;
        return 2;
      }
      ordered_json group;
      group["name"] = item.substr(0, first);
      group["task_a"] = item.substr(first + 1, second - first - 1);
      group["task_b"] = item.substr(second + 1);
      groups.push_back(std::move(group));
    }
    spec["dofs"] = std::move(groups);
  }

  const msx_status status = msx_run(spec.dump().c_str());
  if (status != MSX_OK) print_diagnostic(status);
  return status_to_exit(status);
}
