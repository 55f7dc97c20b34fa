#include "msx/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "msx/errors.hpp"

namespace msx {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             std::size_t column, const std::string& what) {
  fail(ErrorCode::ParseError, path + ":" + std::to_string(line) + ":" +
                                  std::to_string(column) + ": " + what);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path);
  return in;
}

std::map<std::string, std::string> parse_header_fields(
    const std::string& line, const std::string& path) {
  std::map<std::string, std::string> fields;
  std::istringstream stream(line.substr(1));
  std::string token;
  while (stream >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      parse_fail(path, 1, 1, "malformed header token '" + token + "'");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

ordered_json load_json(const std::string& path) {
  std::ifstream in = open_in(path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& error) {
    fail(ErrorCode::ParseError, path + ": " + error.what());
  }
  return doc;
}

void dump_json(const ordered_json& doc, const std::string& path) {
  std::ofstream out = open_out(path);
  out << doc.dump(2) << '\n';
}

Matrix matrix_from_json(const ordered_json& rows, const std::string& path) {
  if (!rows.is_array() || rows.empty())
    fail(ErrorCode::ParseError, path + ": matrix must be a non-empty array");
  std::vector<std::vector<double>> data;
  for (const auto& row : rows) data.push_back(row.get<std::vector<double>>());
  return Matrix::from_rows(data);
}

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

EmgEpoch read_epoch(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    parse_fail(path, 1, 1, "missing '#' header line");

  const auto fields = parse_header_fields(line, path);
  const auto need = [&](const char* key) {
    const auto it = fields.find(key);
    if (it == fields.end())
      parse_fail(path, 1, 1, std::string("header lacks ") + key + "=");
    return it->second;
  };
  std::size_t channels = 0;
  double rate = 0.0;
  try {
    channels = std::stoul(need("channels"));
    rate = std::stod(need("rate"));
  } catch (const std::exception&) {
    parse_fail(path, 1, 1, "non-numeric channels/rate");
  }
  if (channels == 0) parse_fail(path, 1, 1, "channels must be >= 1");

  EmgEpoch epoch;
  epoch.sample_rate = rate;
  if (fields.count("label")) epoch.label = fields.at("label");
  if (fields.count("subject")) epoch.subject = fields.at("subject");
  if (fields.count("rep")) {
    try {
      epoch.repetition = std::stoi(fields.at("rep"));
    } catch (const std::exception&) {
      parse_fail(path, 1, 1, "non-numeric rep");
    }
  }

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') continue;  // provenance / comments
    std::size_t column = 1;
    std::size_t start = 0;
    std::size_t count = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      const std::string cell = line.substr(start, end - start);
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        parse_fail(path, line_no, column, "bad number '" + cell + "'");
      }
      if (!std::isfinite(value))
        parse_fail(path, line_no, column, "non-finite value");
      if (value < 0.0)
        fail(ErrorCode::NegativeValue,
             path + ":" + std::to_string(line_no) + ": sample " +
                 std::to_string(rows) + ", channel " + std::to_string(count) +
                 " is negative");
      values.push_back(value);
      ++count;
      column = end + 2;
      start = end + 1;
    }
    if (count != channels)
      fail(ErrorCode::RaggedRows,
           path + ":" + std::to_string(line_no) + ": expected " +
               std::to_string(channels) + " values, found " + std::to_string(count));
    ++rows;
  }
  if (rows == 0) parse_fail(path, line_no, 1, "no sample rows");

  // stored sample-major; transpose into channels x samples
  epoch.data = Matrix(channels, rows);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t c = 0; c < channels; ++c)
      epoch.data(c, t) = values[t * channels + c];
  return epoch;
}

void write_epoch(const EmgEpoch& epoch, const std::string& path,
                 const std::vector<std::string>& provenance) {
  std::ofstream out = open_out(path);
  out << "# channels=" << epoch.channels() << " rate=" << format_double(epoch.sample_rate);
  if (epoch.label) out << " label=" << *epoch.label;
  if (epoch.subject) out << " subject=" << *epoch.subject;
  if (epoch.repetition) out << " rep=" << *epoch.repetition;
  out << '\n';
  for (const std::string& line : provenance) out << "# " << line << '\n';
  for (std::size_t t = 0; t < epoch.samples(); ++t) {
    for (std::size_t c = 0; c < epoch.channels(); ++c) {
      if (c) out << ',';
      out << format_double(epoch.data(c, t));
    }
    out << '\n';
  }
}

Manifest read_manifest(const std::string& path) {
  const ordered_json doc = load_json(path);
  Manifest manifest;
  try {
    manifest.source = doc.value("source", "");
    manifest.sample_rate = doc.value("sample_rate", 0.0);
    for (const auto& item : doc.at("entries")) {
      ManifestEntry entry;
      entry.subject = item.at("subject").get<std::string>();
      entry.task = item.at("task").get<std::string>();
      entry.repetition = item.at("repetition").get<int>();
      entry.path = item.at("path").get<std::string>();
      manifest.entries.push_back(std::move(entry));
    }
    if (doc.contains("metadata"))
      for (const auto& [key, value] : doc.at("metadata").items())
        manifest.metadata[key] = value.get<std::string>();
  } catch (const nlohmann::json::exception& error) {
    fail(ErrorCode::ParseError, path + ": " + error.what());
  }
  std::set<std::tuple<std::string, std::string, int>> seen;
  for (const ManifestEntry& entry : manifest.entries)
    if (!seen.insert({entry.subject, entry.task, entry.repetition}).second)
      fail(ErrorCode::ParseError,
           path + ": duplicate entry " + entry.subject + "/" + entry.task +
               "/" + std::to_string(entry.repetition));
  return manifest;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
  ordered_json doc;
  doc["source"] = manifest.source;
  doc["sample_rate"] = manifest.sample_rate;
  doc["entries"] = ordered_json::array();
  for (const ManifestEntry& entry : manifest.entries) {
    ordered_json item;
    item["subject"] = entry.subject;
    item["task"] = entry.task;
    item["repetition"] = entry.repetition;
    item["path"] = entry.path;
    doc["entries"].push_back(std::move(item));
  }
  if (!manifest.metadata.empty()) {
    ordered_json meta;
    for (const auto& [key, value] : manifest.metadata) meta[key] = value;
    doc["metadata"] = std::move(meta);
  }
  dump_json(doc, path);
}

std::vector<EmgEpoch> load_manifest_epochs(const Manifest& manifest,
                                           const std::string& manifest_path) {
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<EmgEpoch> epochs;
  epochs.reserve(manifest.entries.size());
  for (const ManifestEntry& entry : manifest.entries) {
    EmgEpoch epoch = read_epoch((base / entry.path).string());
    epoch.subject = entry.subject;
    epoch.label = entry.task;
    epoch.repetition = entry.repetition;
    epochs.push_back(std::move(epoch));
  }
  return epochs;
}

TruthSidecar read_sidecar(const std::string& path) {
  const ordered_json doc = load_json(path);
  TruthSidecar sidecar;
  try {
    sidecar.dataset = doc.at("dataset").get<std::size_t>();
    sidecar.trial = doc.at("trial").get<std::size_t>();
    sidecar.noise_power = doc.at("noise_power").get<double>();
    sidecar.generator_seed = doc.at("generator_seed").get<std::uint64_t>();
    sidecar.true_synergies = matrix_from_json(doc.at("true_synergies"), path);
  } catch (const nlohmann::json::exception& error) {
    fail(ErrorCode::ParseError, path + ": " + error.what());
  }
  return sidecar;
}

void write_sidecar(const TruthSidecar& sidecar, const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>&
                       provenance) {
  ordered_json doc;
  doc["dataset"] = sidecar.dataset;
  doc["trial"] = sidecar.trial;
  doc["generator_seed"] = sidecar.generator_seed;
  doc["noise_power"] = sidecar.noise_power;
  doc["true_synergies"] = matrix_to_json(sidecar.true_synergies);
  for (const auto& [key, value] : provenance) doc[key] = value;
  dump_json(doc, path);
}

void write_report(const std::vector<ReportRecord>& records,
                  const std::string& path, ReportFormat format) {
  if (records.empty()) fail(ErrorCode::EmptyInput, "no records for " + path);
  std::ofstream out = open_out(path);
  if (format == ReportFormat::StructuredRecords) {
    for (const ReportRecord& record : records) {
      ordered_json doc;
      for (const auto& [key, value] : record) doc[key] = value;
      out << doc.dump() << '\n';
    }
    return;
  }
  for (std::size_t f = 0; f < records.front().size(); ++f) {
    if (f) out << ',';
    out << records.front()[f].first;
  }
  out << '\n';
  for (const ReportRecord& record : records) {
    if (record.size() != records.front().size())
      fail(ErrorCode::RaggedRows, "records disagree on field count");
    for (std::size_t f = 0; f < record.size(); ++f) {
      if (record[f].first != records.front()[f].first)
        fail(ErrorCode::RaggedRows, "records disagree on field names");
      if (f) out << ',';
      out << record[f].second;
    }
    out << '\n';
  }
}

EnvelopeCorpus load_corpus(const std::string& dir) {
  if (!fs::is_directory(dir))
    fail(ErrorCode::IoError, dir + " is not a directory");
  std::vector<std::string> paths;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (!item.is_regular_file()) continue;
    const std::string ext = item.path().extension().string();
    if (ext == ".csv" || ext == ".emg") paths.push_back(item.path().string());
  }
  std::sort(paths.begin(), paths.end());
  EnvelopeCorpus corpus;
  corpus.reserve(paths.size());
  for (const std::string& path : paths) corpus.push_back(read_epoch(path));
  if (corpus.empty()) fail(ErrorCode::CorpusTooSmall, "no epoch files in " + dir);
  return corpus;
}

void emit_bar_chart(const std::vector<CellSummary>& summaries,
                    const std::string& path,
                    const std::vector<std::string>& provenance) {
  if (summaries.empty()) fail(ErrorCode::EmptyInput, "no summaries to plot");

  // group cells by setting, series by method
  std::vector<std::string> group_names;
  std::map<std::string, std::map<std::string, const CellSummary*>> grid;
  for (const CellSummary& cell : summaries) {
    std::string group = std::string(cell.setting.sparse ? "sparse" : "dense") +
                        "/" + std::to_string(cell.setting.channels) + "ch/" +
                        format_double(cell.setting.snr_db) + "dB";
    if (!grid.count(group)) group_names.push_back(group);
    grid[group][method_name(cell.setting.method)] = &cell;
  }
  const std::vector<std::string> series = {"pca", "ica", "nmf", "sobi"};
  const std::vector<std::string> colors = {"#4878a8", "#d1605e", "#6aa56e",
                                           "#e8b049"};

  double lo = 0.0, hi = 1.0;
  for (const CellSummary& cell : summaries) {
    lo = std::min(lo, cell.normalized - cell.normalized_std);
    hi = std::max(hi, cell.normalized + cell.normalized_std);
  }

  const double bar_w = 18.0, gap = 8.0, group_gap = 28.0;
  const double plot_h = 300.0, margin_l = 60.0, margin_t = 30.0, margin_b = 70.0;
  const double group_w = series.size() * bar_w + (series.size() - 1) * gap;
  const double plot_w = group_names.size() * (group_w + group_gap);
  const double width = margin_l + plot_w + 30.0;
  const double height = margin_t + plot_h + margin_b;
  const auto y_of = [&](double value) {
    return margin_t + plot_h * (hi - value) / (hi - lo);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << format_double(width) << "\" height=\"" << format_double(height) << "\">\n";
  for (const std::string& line : provenance) svg << "<!-- " << line << " -->\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes and zero line
  svg << "<line x1=\"" << margin_l << "\" y1=\"" << margin_t << "\" x2=\""
      << margin_l << "\" y2=\"" << margin_t + plot_h
      << "\" stroke=\"black\"/>\n";
  for (double tick = std::ceil(lo * 5.0) / 5.0; tick <= hi + 1e-9; tick += 0.2) {
    const double y = y_of(tick);
    svg << "<line x1=\"" << margin_l - 4 << "\" y1=\"" << format_double(y)
        << "\" x2=\"" << margin_l << "\" y2=\"" << format_double(y)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << margin_l - 8 << "\" y=\"" << format_double(y + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">"
        << format_double(std::round(tick * 100.0) / 100.0) << "</text>\n";
  }
  svg << "<line x1=\"" << margin_l << "\" y1=\"" << format_double(y_of(0.0))
      << "\" x2=\"" << format_double(margin_l + plot_w) << "\" y2=\""
      << format_double(y_of(0.0)) << "\" stroke=\"#888\"/>\n";

  double x = margin_l + group_gap / 2.0;
  for (const std::string& group : group_names) {
    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto it = grid[group].find(series[s]);
      if (it != grid[group].end()) {
        const CellSummary& cell = *it->second;
        const double top = y_of(std::max(cell.normalized, 0.0));
        const double bottom = y_of(std::min(cell.normalized, 0.0));
        svg << "<rect x=\"" << format_double(x) << "\" y=\"" << format_double(top)
            << "\" width=\"" << bar_w << "\" height=\""
            << format_double(std::max(bottom - top, 0.5)) << "\" fill=\""
            << colors[s] << "\"/>\n";
        // stddev whisker
        const double cx = x + bar_w / 2.0;
        const double wy1 = y_of(cell.normalized + cell.normalized_std);
        const double wy2 = y_of(cell.normalized - cell.normalized_std);
        svg << "<line x1=\"" << format_double(cx) << "\" y1=\""
            << format_double(wy1) << "\" x2=\"" << format_double(cx)
            << "\" y2=\"" << format_double(wy2) << "\" stroke=\"black\"/>\n"
            << "<line x1=\"" << format_double(cx - 4) << "\" y1=\""
            << format_double(wy1) << "\" x2=\"" << format_double(cx + 4)
            << "\" y2=\"" << format_double(wy1) << "\" stroke=\"black\"/>\n"
            << "<line x1=\"" << format_double(cx - 4) << "\" y1=\""
            << format_double(wy2) << "\" x2=\"" << format_double(cx + 4)
            << "\" y2=\"" << format_double(wy2) << "\" stroke=\"black\"/>\n";
      }
      x += bar_w + gap;
    }
    svg << "<text x=\"" << format_double(x - gap - group_w / 2.0) << "\" y=\""
        << format_double(margin_t + plot_h + 16) << "\" font-size=\"11\" "
        << "text-anchor=\"middle\">" << group << "</text>\n";
    x += group_gap - gap;
  }
  // legend
  double lx = margin_l;
  const double ly = height - 24.0;
  for (std::size_t s = 0; s < series.size(); ++s) {
    svg << "<rect x=\"" << format_double(lx) << "\" y=\"" << format_double(ly)
        << "\" width=\"12\" height=\"12\" fill=\"" << colors[s] << "\"/>\n"
        << "<text x=\"" << format_double(lx + 16) << "\" y=\""
        << format_double(ly + 10) << "\" font-size=\"12\">" << series[s]
        << "</text>\n";
    lx += 70.0;
  }
  svg << "</svg>\n";

  std::ofstream out = open_out(path);
  out << svg.str();
}

}  // namespace msx
