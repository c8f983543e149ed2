#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwlaw/simulator.hpp"

namespace hwlaw {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackRecord {
  int frame = 0;
  int id = 0;
  double x = 0.0;  ///< centre, m
  double y = 0.0;  ///< centre, m, positive to the left
  double vx = 0.0;
  double vy = 0.0;
  int lane_id = 0;
  double width = 1.8;
  double length = 4.5;
};

/// Sidecar metadata: lane lines ascending in y, one speed range and one
/// recorded lane id per lane (right to left).
struct TrackMeta {
  double frame_rate = 30.0;
  std::vector<double> lane_lines;
  std::vector<std::pair<double, double>> speed_limits;
  std::vector<int> lane_ids;

  [[nodiscard]] RoadModel road() const;
  void validate() const;
};

struct TrackFile {
  TrackMeta meta;
  std::vector<TrackRecord> rows;  ///< file order
  std::vector<std::string> rejected;  ///< one diagnostic per dropped row

  /// Rows grouped by vehicle id, in frame order.
  [[nodiscard]] std::map<int, std::vector<TrackRecord>> tracks() const;
};

inline constexpr const char* kTrackHeader = "frame,id,x,y,xVelocity,yVelocity,laneId,width,length";

/// Path of the metadata document next to a track CSV.
std::filesystem::path meta_path_for(const std::filesystem::path& csv);

/// Parses a track CSV and its `<stem>.meta.json`. Malformed or implausible
/// rows are dropped into `rejected`; structural problems throw DatasetError.
TrackFile parse_track_file(const std::filesystem::path& csv);
TrackFile parse_track_csv(std::istream& csv, const TrackMeta& meta, const std::string& origin = "<stream>");
TrackMeta parse_track_meta(const std::string& json_text);

void write_track_file(const TrackFile& tf, const std::filesystem::path& csv);
std::string track_csv_string(const TrackFile& tf);
std::string track_meta_string(const TrackMeta& meta);

/// Multiplies longitudinal positions and both velocity components by
/// `factor`; lateral positions and lane geometry are unchanged.
TrackFile preprocess_scale(const TrackFile& tf, double factor);

struct ExtractOptions {
  /// Lane indexes (0 = rightmost); an ego qualifies if any frame is in one.
  std::optional<std::set<int>> lane_filter;
  double min_duration = 2.0;
  double dt = 0.05;
  LawThresholds thresholds;
};

struct ExtractedRun {
  int ego_id = 0;
  Scenario scenario;
};

/// One scenario per qualifying vehicle: its own track is the replayed
/// initial reference, every other vehicle is replayed traffic, and the
/// intent windows come from the lateral-speed rules. Skipped vehicles are
/// reported in `diagnostics`.
std::vector<ExtractedRun> extract_runs(const TrackFile& tf, const ExtractOptions& options,
                                       std::vector<std::string>* diagnostics = nullptr);

}  // namespace hwlaw
