#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "msx/errors.hpp"
#include "msx/io.hpp"
#include "msx/rng.hpp"
#include "msx/synthgen.hpp"

using namespace msx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("msx_io_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int counter() {
    static int n = 0;
    return n++;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

EmgEpoch sample_epoch(std::uint64_t seed, std::size_t channels = 3,
                      std::size_t samples = 20) {
  Rng rng(seed);
  EmgEpoch epoch;
  epoch.data = Matrix(channels, samples);
  for (std::size_t i = 0; i < channels; ++i)
    for (std::size_t t = 0; t < samples; ++t)
      epoch.data(i, t) = rng.uniform01() * 1.7e-3;
  epoch.sample_rate = 100.0;
  return epoch;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("epoch round trip is bit identical") {
  TempDir dir;
  EmgEpoch epoch = sample_epoch(1);
  epoch.label = "task3";
  epoch.subject = "s07";
  epoch.repetition = 4;
  const std::string path = dir.file("epoch.csv");
  write_epoch(epoch, path);
  const EmgEpoch loaded = read_epoch(path);
  CHECK(loaded.channels() == epoch.channels());
  CHECK(loaded.samples() == epoch.samples());
  CHECK(loaded.sample_rate == epoch.sample_rate);
  CHECK(loaded.label == epoch.label);
  CHECK(loaded.subject == epoch.subject);
  CHECK(loaded.repetition == epoch.repetition);
  CHECK(max_abs(loaded.data - epoch.data) == 0.0);

  // writing the loaded epoch reproduces the file byte for byte
  const std::string again = dir.file("epoch2.csv");
  write_epoch(loaded, again);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("epoch duration follows the sample rate") {
  TempDir dir;
  EmgEpoch epoch = sample_epoch(2, 10, 500);
  const std::string path = dir.file("fivesec.csv");
  write_epoch(epoch, path);
  const EmgEpoch loaded = read_epoch(path);
  CHECK(loaded.channels() == 10);
  CHECK(loaded.duration_seconds() == doctest::Approx(5.0));
}

TEST_CASE("negative entries are reported with their cell") {
  TempDir dir;
  const std::string path = dir.file("bad.csv");
  std::ofstream out(path);
  out << "# channels=2 rate=100\n0.5,0.25\n0.5,-0.75\n";
  out.close();
  try {
    read_epoch(path);
    FAIL("expected NegativeValue");
  } catch (const Error& error) {
    CHECK(error.code() == ErrorCode::NegativeValue);
    CHECK(std::string(error.what()).find("channel 1") != std::string::npos);
  }
}

TEST_CASE("ragged rows and parse errors carry positions") {
  TempDir dir;
  const std::string ragged = dir.file("ragged.csv");
  {
    std::ofstream out(ragged);
    out << "# channels=3 rate=100\n1,2,3\n1,2\n";
  }
  CHECK_THROWS_AS(read_epoch(ragged), Error);

  const std::string garbled = dir.file("garbled.csv");
  {
    std::ofstream out(garbled);
    out << "# channels=2 rate=100\n1,zap\n";
  }
  try {
    read_epoch(garbled);
    FAIL("expected ParseError");
  } catch (const Error& error) {
    CHECK(error.code() == ErrorCode::ParseError);
    CHECK(std::string(error.what()).find(":2:") != std::string::npos);
  }

  const std::string headerless = dir.file("headerless.csv");
  {
    std::ofstream out(headerless);
    out << "1,2\n3,4\n";
  }
  CHECK_THROWS_AS(read_epoch(headerless), Error);
}

TEST_CASE("extra comment lines are provenance, not data") {
  TempDir dir;
  const EmgEpoch epoch = sample_epoch(3);
  const std::string path = dir.file("prov.csv");
  write_epoch(epoch, path, {"spec_hash=deadbeef", "seed=42"});
  const std::string content = slurp(path);
  CHECK(content.find("# spec_hash=deadbeef") != std::string::npos);
  const EmgEpoch loaded = read_epoch(path);
  CHECK(loaded.samples() == epoch.samples());
  CHECK(max_abs(loaded.data - epoch.data) == 0.0);
}

TEST_CASE("manifest round trip and duplicate detection") {
  TempDir dir;
  Manifest manifest;
  manifest.source = "unit-test";
  manifest.sample_rate = 100.0;
  manifest.entries = {{"s1", "flex", 0, "a.csv"}, {"s1", "flex", 1, "b.csv"}};
  manifest.metadata["note"] = "x";
  const std::string path = dir.file("manifest.json");
  write_manifest(manifest, path);
  const Manifest loaded = read_manifest(path);
  CHECK(loaded.source == manifest.source);
  CHECK(loaded.entries.size() == 2);
  CHECK(loaded.entries[1].repetition == 1);
  CHECK(loaded.metadata.at("note") == "x");

  manifest.entries.push_back({"s1", "flex", 0, "c.csv"});  // duplicate key
  const std::string dup = dir.file("dup.json");
  write_manifest(manifest, dup);
  CHECK_THROWS_AS(read_manifest(dup), Error);
}

TEST_CASE("sidecar round trip") {
  TempDir dir;
  TruthSidecar sidecar;
  sidecar.dataset = 3;
  sidecar.trial = 14;
  sidecar.noise_power = 0.0125;
  sidecar.generator_seed = 99;
  sidecar.true_synergies = Matrix(3, 2, {0.1, 0.9, 0.4, 0.2, 0.7, 0.3});
  const std::string path = dir.file("truth.json");
  write_sidecar(sidecar, path);
  const TruthSidecar loaded = read_sidecar(path);
  CHECK(loaded.dataset == 3);
  CHECK(loaded.trial == 14);
  CHECK(loaded.generator_seed == 99);
  CHECK(loaded.noise_power == sidecar.noise_power);
  CHECK(max_abs(loaded.true_synergies - sidecar.true_synergies) == 0.0);
}

TEST_CASE("reports: records and tables, determinism, empty input") {
  TempDir dir;
  std::vector<ReportRecord> records = {
      {{"method", "pca"}, {"value", "0.5"}},
      {{"method", "nmf"}, {"value", "0.75"}},
  };
  const std::string jsonl = dir.file("report.jsonl");
  write_report(records, jsonl, ReportFormat::StructuredRecords);
  const std::string csv = dir.file("report.csv");
  write_report(records, csv, ReportFormat::DelimitedTable);

  CHECK(slurp(jsonl) ==
        "{\"method\":\"pca\",\"value\":\"0.5\"}\n"
        "{\"method\":\"nmf\",\"value\":\"0.75\"}\n");
  CHECK(slurp(csv) == "method,value\npca,0.5\nnmf,0.75\n");

  const std::string jsonl2 = dir.file("report2.jsonl");
  write_report(records, jsonl2, ReportFormat::StructuredRecords);
  CHECK(slurp(jsonl) == slurp(jsonl2));

  CHECK_THROWS_AS(write_report({}, dir.file("empty.jsonl"),
                               ReportFormat::StructuredRecords),
                  Error);
}

TEST_CASE("load_corpus reads every epoch in a directory") {
  TempDir dir;
  for (int k = 0; k < 3; ++k)
    write_epoch(sample_epoch(10 + k), dir.file("record" + std::to_string(k) + ".csv"));
  const EnvelopeCorpus corpus = load_corpus(dir.path.string());
  CHECK(corpus.size() == 3);
  for (const EmgEpoch& epoch : corpus) CHECK(epoch.channels() == 3);
  CHECK_THROWS_AS(load_corpus((dir.path / "missing").string()), Error);
}

TEST_CASE("bar chart emits deterministic svg with whiskers") {
  TempDir dir;
  std::vector<CellSummary> summaries;
  for (Method method : {Method::PCA, Method::ICA, Method::NMF, Method::SOBI}) {
    CellSummary cell;
    cell.setting = {true, 12, 15.0, method};
    cell.normalized = method == Method::NMF ? 0.8 : 0.4;
    cell.normalized_std = 0.1;
    summaries.push_back(cell);
  }
  const std::string path = dir.file("chart.svg");
  emit_bar_chart(summaries, path, {"seed=5"});
  const std::string svg = slurp(path);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("nmf") != std::string::npos);
  CHECK(svg.find("<!-- seed=5 -->") != std::string::npos);

  const std::string again = dir.file("chart2.svg");
  emit_bar_chart(summaries, again, {"seed=5"});
  CHECK(svg == slurp(again));

  CHECK_THROWS_AS(emit_bar_chart({}, dir.file("none.svg")), Error);
}
