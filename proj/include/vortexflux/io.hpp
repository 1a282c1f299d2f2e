// SPDX-License-Identifier: Apache-2.0
//
// Configuration files, field and table CSV, run manifests and the four
// commands behind the command-line tool.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vortexflux/coupling.hpp"
#include "vortexflux/diagnostics.hpp"

namespace vflux {

/// Resolved configuration plus the provenance needed to reproduce it.
struct ParsedConfig {
  SimConfig config;
  std::string origin;         ///< file path or a label for in-memory text
  std::string a_source;       ///< constant, inline rows, or absolute path
  std::string b_source;
  std::string omega0_source;
  std::vector<std::string> defaults;  ///< "section.key = value" for every key not given
  std::size_t workers = 1;
};

/// Sections [grid] [time] [model] [data] [extension] [sweep] [output], one
/// "key = value" per line, '#' or ';' comments. Relative data paths resolve
/// against the directory of the file.
ParsedConfig parse_config(const std::string& path);
ParsedConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = ".",
                               const std::string& origin = "<text>");

/// Every key with its resolved value, in fixed order.
std::string canonical_text(const ParsedConfig& pc);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 14695981039346656037ull);
/// Hash of the canonical text and of the sampled data values.
std::uint64_t config_hash(const ParsedConfig& pc);
std::string hex64(std::uint64_t value);

/// 17 significant digits.
std::string format_double(double value);

void write_field_csv(std::ostream& os, const Grid& grid, double t, std::span<const double> values);
struct FieldFile {
  Grid grid = Grid::build(1, {1.0}, {3});
  double t = 0.0;
  Field values;
};
FieldFile read_field_csv(std::istream& is, const std::string& origin = "field");
FieldFile read_field_file(const std::filesystem::path& path);
void write_field_file(const std::filesystem::path& path, const Grid& grid, double t, std::span<const double> values);

void write_steps_csv(std::ostream& os, const std::vector<StepStats>& steps);
std::vector<StepStats> read_steps_csv(std::istream& is, const std::string& origin = "steps");

/// Two-column whitespace-separated data for plotting.
void write_dat(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::pair<double, double>>& rows);

struct RunManifest {
  std::string config_hash;
  std::string run_id;
  std::string started;
  std::string finished;
  std::uint64_t seed = 0;
  std::vector<std::string> files;
  std::vector<std::string> defaults;
  std::map<std::string, std::string> metadata;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// UTC time stamp, ISO 8601.
std::string utc_now();

/// Writes fields/ and steps.csv; returns the files relative to dir.
std::vector<std::string> write_trajectory(const std::filesystem::path& dir, const Trajectory& traj);
/// Reads fields/, steps.csv and the epsilon / R / aleph values of manifest.json.
Trajectory load_trajectory(const std::filesystem::path& dir);

struct CommandResult {
  InvariantReport report;
  std::vector<std::string> files;
  bool passed() const { return report.passed(); }
};

/// Complete run directory: fields, steps, diagnostics, resolved config, manifest.
CommandResult write_run_directory(const std::filesystem::path& dir, const ParsedConfig& pc, const Trajectory& traj,
                                  const InvariantReport& report, const std::string& started,
                                  const std::map<std::string, std::string>& metadata = {});
/// Manifest metadata describing an extension (mollifier, aleph).
std::map<std::string, std::string> extension_metadata(const ExtensionResult& ext, const SimConfig& config);

CommandResult cmd_run(const ParsedConfig& pc, const std::filesystem::path& out);
/// eps_k/ run directories, cauchy_table.csv, layer_table.csv, r_star.csv and .dat series.
CommandResult cmd_sweep(const ParsedConfig& pc, const std::filesystem::path& out, std::size_t workers);
/// Extension pipeline outputs and their bound checks.
CommandResult cmd_extend(const ParsedConfig& pc, const std::filesystem::path& out);
/// Re-checks a stored run directory against its resolved configuration.
CommandResult cmd_validate(const ParsedConfig& pc, const std::filesystem::path& run_dir);
CommandResult cmd_validate(const std::filesystem::path& run_dir);

}  // namespace vflux
