#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "hwlaw/dataset_io.hpp"
#include "hwlaw/simulator.hpp"
#include "hwlaw/stats.hpp"

namespace hwlaw {

/// Settings shared by audit and batch.
struct DatasetRunOptions {
  double scale = 2.0;
  double dt = 0.05;
  int np = 30;
  int nc = 5;
  LawThresholds thresholds;
  std::optional<std::set<int>> lanes;
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

struct FileResult {
  std::filesystem::path path;
  std::vector<int> ego_ids;
  std::vector<SimLog> logs;
  std::vector<std::string> diagnostics;
  std::optional<std::string> error;
};

/// Scenarios of every qualifying ego in one track file.
std::vector<ExtractedRun> load_dataset_runs(const std::filesystem::path& csv, const DatasetRunOptions& options,
                                            std::vector<std::string>* diagnostics = nullptr);

SimConfig make_sim_config(const DatasetRunOptions& options, bool compliance_enabled);

/// Runs scenarios on a worker pool; output order follows input order.
std::vector<SimLog> run_parallel(const std::vector<Scenario>& scenarios, const SimConfig& config, unsigned threads);

/// Processes each file independently; a failing file is reported in its
/// result and does not stop the others.
std::vector<FileResult> process_files(const std::vector<std::filesystem::path>& files,
                                      const DatasetRunOptions& options, bool compliance_enabled);

/// Track CSVs (excluding metadata) in a directory, sorted by name.
std::vector<std::filesystem::path> list_track_files(const std::filesystem::path& dir);

ComplianceStats stats_of(const std::vector<FileResult>& results);

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hwlaw
