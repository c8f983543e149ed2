#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "hwlaw/simulator.hpp"
#include "hwlaw/stats.hpp"

namespace hwlaw {

enum class OutputFormat { Json, Csv };

nlohmann::json frame_to_json(const FrameRecord& f);
nlohmann::json stats_to_json(const ComplianceStats& st);
nlohmann::json summary_to_json(const SimLog& log);

/// One JSON object per line.
void write_frames_jsonl(const SimLog& log, std::ostream& out);
/// Flat table with a header row.
void write_frames_csv(const SimLog& log, std::ostream& out);

/// Writes frames.{jsonl,csv}, summary.json and the plot series
/// (speed.csv, lateral.csv, labels.csv) into `dir`.
void write_sim_outputs(const SimLog& log, const std::filesystem::path& dir, OutputFormat format);

/// Serialised form of the whole log, used for determinism checks.
std::string serialize_log(const SimLog& log);

}  // namespace hwlaw
