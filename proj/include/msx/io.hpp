#ifndef MSX_IO_HPP
#define MSX_IO_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msx/evaluate.hpp"
#include "msx/factorize.hpp"
#include "msx/synthgen.hpp"

namespace msx {

// Delimited text epoch: a `# channels=<m> rate=<Hz> ...` header line, then
// one sample per row with comma-separated nonnegative values. Round trips at
// 17 significant digits. Extra leading '#' lines carry provenance.
EmgEpoch read_epoch(const std::string& path);
void write_epoch(const EmgEpoch& epoch, const std::string& path,
                 const std::vector<std::string>& provenance = {});

struct ManifestEntry {
  std::string subject;
  std::string task;
  int repetition = 0;
  std::string path;  // relative to the manifest file
};

struct Manifest {
  std::string source;
  double sample_rate = 0.0;
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::string> metadata;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);
std::vector<EmgEpoch> load_manifest_epochs(const Manifest& manifest,
                                           const std::string& manifest_path);

struct TruthSidecar {
  std::size_t dataset = 0;
  std::size_t trial = 0;
  Matrix true_synergies;  // m x r
  double noise_power = 0.0;
  std::uint64_t generator_seed = 0;  // root seed; (seed, dataset, trial)
                                     // regenerates the full trial
};

TruthSidecar read_sidecar(const std::string& path);
void write_sidecar(const TruthSidecar& sidecar, const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>&
                       provenance = {});

enum class ReportFormat { StructuredRecords, DelimitedTable };

// A record is an ordered list of (field, printed value).
using ReportRecord = std::vector<std::pair<std::string, std::string>>;

// StructuredRecords emits one JSON object per line; DelimitedTable a CSV
// with the first record's fields as columns. Byte-deterministic.
void write_report(const std::vector<ReportRecord>& records,
                  const std::string& path, ReportFormat format);

// All epoch files (by extension) in a directory, sorted by filename.
EnvelopeCorpus load_corpus(const std::string& dir);

// Grouped bar chart (SVG) of normalized grand averages, one series per
// method and one group per setting cell, with stddev whiskers.
void emit_bar_chart(const std::vector<CellSummary>& summaries,
                    const std::string& path,
                    const std::vector<std::string>& provenance = {});

std::string format_double(double value);  // shortest 17-significant-digit form

}  // namespace msx

#endif
