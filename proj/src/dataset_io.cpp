#include "hwlaw/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace hwlaw {

namespace {

constexpr double kMaxPlausibleSpeed = 80.0;  // m/s, raw units
constexpr double kMinLaneMatch = 0.99;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

std::optional<double> number(const std::string& cell) {
  const std::string s = trim(cell);
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<int> integer(const std::string& cell) {
  const auto v = number(cell);
  if (!v || std::floor(*v) != *v) return std::nullopt;
  return static_cast<int>(*v);
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DatasetError(fmt::format("cannot open {}", p.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RoadModel TrackMeta::road() const {
  validate();
  RoadModel road;
  for (std::size_t i = 0; i + 1 < lane_lines.size(); ++i) {
    road.lanes.push_back(Lane{lane_lines[i], lane_lines[i + 1], speed_limits[i].first, speed_limits[i].second});
  }
  return road;
}

void TrackMeta::validate() const {
  if (!(frame_rate > 0.0)) throw DatasetError("frameRate must be positive");
  if (lane_lines.size() < 2) throw DatasetError("laneLines needs at least two entries");
  for (std::size_t i = 1; i < lane_lines.size(); ++i) {
    if (!(lane_lines[i] > lane_lines[i - 1])) throw DatasetError("laneLines must be strictly ascending");
  }
  const std::size_t lanes = lane_lines.size() - 1;
  if (speed_limits.size() != lanes) throw DatasetError("speedLimits must have one entry per lane");
  if (lane_ids.size() != lanes) throw DatasetError("laneIds must have one entry per lane");
  for (const auto& [lo, hi] : speed_limits) {
    if (!(lo >= 0.0 && hi > lo)) throw DatasetError("speedLimits entries need 0 <= vmin < vmax");
  }
}

std::map<int, std::vector<TrackRecord>> TrackFile::tracks() const {
  std::map<int, std::vector<TrackRecord>> out;
  for (const TrackRecord& r : rows) out[r.id].push_back(r);
  for (auto& [id, v] : out) {
    std::stable_sort(v.begin(), v.end(), [](const TrackRecord& a, const TrackRecord& b) { return a.frame < b.frame; });
  }
  return out;
}

std::filesystem::path meta_path_for(const std::filesystem::path& csv) {
  return csv.parent_path() / (csv.stem().string() + ".meta.json");
}

TrackMeta parse_track_meta(const std::string& json_text) {
  TrackMeta m;
  try {
    const auto j = nlohmann::json::parse(json_text);
    m.frame_rate = j.at("frameRate").get<double>();
    m.lane_lines = j.at("laneLines").get<std::vector<double>>();
    for (const auto& e : j.at("speedLimits")) {
      if (!e.is_array() || e.size() != 2) throw DatasetError("speedLimits entries must be [vmin, vmax]");
      m.speed_limits.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    m.lane_ids = j.at("laneIds").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(fmt::format("metadata: {}", e.what()));
  }
  m.validate();
  return m;
}

TrackFile parse_track_csv(std::istream& csv, const TrackMeta& meta, const std::string& origin) {
  meta.validate();
  TrackFile tf;
  tf.meta = meta;

  std::string line;
  if (!std::getline(csv, line)) throw DatasetError(fmt::format("{}: empty file", origin));
  const std::vector<std::string> header = split_csv(trim(line));
  const std::vector<std::string> want = split_csv(kTrackHeader);
  std::vector<std::size_t> col(want.size());
  for (std::size_t k = 0; k < want.size(); ++k) {
    auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) { return trim(h) == want[k]; });
    if (it == header.end()) throw DatasetError(fmt::format("{}: missing column '{}'", origin, want[k]));
    col[k] = static_cast<std::size_t>(it - header.begin());
  }

  int lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    auto reject = [&](const std::string& why) { tf.rejected.push_back(fmt::format("{}:{}: {}", origin, lineno, why)); };
    if (cells.size() < header.size()) {
      reject("too few fields");
      continue;
    }
    std::array<std::optional<double>, 9> v;
    bool ok = true;
    for (std::size_t k = 0; k < want.size(); ++k) {
      v[k] = number(cells[col[k]]);
      if (!v[k]) {
        reject(fmt::format("non-numeric {}", want[k]));
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    const auto frame = integer(cells[col[0]]);
    const auto id = integer(cells[col[1]]);
    const auto lane_id = integer(cells[col[6]]);
    if (!frame || !id || !lane_id) {
      reject("frame, id and laneId must be integers");
      continue;
    }
    if (std::abs(*v[4]) > kMaxPlausibleSpeed) {
      reject(fmt::format("implausible xVelocity {}", *v[4]));
      continue;
    }
    if (!(*v[7] > 0.0 && *v[8] > 0.0)) {
      reject("non-positive vehicle size");
      continue;
    }
    tf.rows.push_back(TrackRecord{*frame, *id, *v[2], *v[3], *v[4], *v[5], *lane_id, *v[7], *v[8]});
  }

  // Per-vehicle frames must increase in file order; gaps are fine.
  std::map<int, int> last_frame;
  for (const TrackRecord& r : tf.rows) {
    auto it = last_frame.find(r.id);
    if (it != last_frame.end() && r.frame <= it->second) {
      throw DatasetError(fmt::format("{}: vehicle {} frame {} does not follow frame {}", origin, r.id, r.frame,
                                     it->second));
    }
    last_frame[r.id] = r.frame;
  }

  // Recorded lane ids must agree with the lane geometry.
  if (!tf.rows.empty()) {
    const RoadModel road = meta.road();
    std::size_t match = 0;
    for (const TrackRecord& r : tf.rows) {
      const auto lane = lane_of(r.y, road);
      if (lane && meta.lane_ids[static_cast<std::size_t>(*lane)] == r.lane_id) ++match;
    }
    const double rate = static_cast<double>(match) / static_cast<double>(tf.rows.size());
    if (rate < kMinLaneMatch) {
      throw DatasetError(fmt::format("{}: laneId agrees with lane geometry for only {:.1f}% of rows", origin,
                                     100.0 * rate));
    }
  }
  return tf;
}

TrackFile parse_track_file(const std::filesystem::path& csv) {
  const auto meta_path = meta_path_for(csv);
  if (!std::filesystem::exists(meta_path)) {
    throw DatasetError(fmt::format("missing metadata {}", meta_path.string()));
  }
  TrackMeta meta;
  try {
    meta = parse_track_meta(read_all(meta_path));
  } catch (const DatasetError& e) {
    throw DatasetError(fmt::format("{}: {}", meta_path.string(), e.what()));
  }
  std::ifstream in(csv);
  if (!in) throw DatasetError(fmt::format("cannot open {}", csv.string()));
  return parse_track_csv(in, meta, csv.string());
}

std::string track_csv_string(const TrackFile& tf) {
  std::string out = std::string(kTrackHeader) + "\n";
  for (const TrackRecord& r : tf.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.frame, r.id, r.x, r.y, r.vx, r.vy, r.lane_id, r.width,
                       r.length);
  }
  return out;
}

std::string track_meta_string(const TrackMeta& meta) {
  nlohmann::json limits = nlohmann::json::array();
  for (const auto& [lo, hi] : meta.speed_limits) limits.push_back({lo, hi});
  const nlohmann::json j{{"frameRate", meta.frame_rate},
                         {"laneLines", meta.lane_lines},
                         {"speedLimits", limits},
                         {"laneIds", meta.lane_ids}};
  return j.dump(2) + "\n";
}

void write_track_file(const TrackFile& tf, const std::filesystem::path& csv) {
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  {
    std::ofstream out(csv);
    if (!out) throw DatasetError(fmt::format("cannot write {}", csv.string()));
    out << track_csv_string(tf);
  }
  std::ofstream out(meta_path_for(csv));
  if (!out) throw DatasetError(fmt::format("cannot write {}", meta_path_for(csv).string()));
  out << track_meta_string(tf.meta);
}

TrackFile preprocess_scale(const TrackFile& tf, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw std::invalid_argument("scale factor must be positive");
  TrackFile out = tf;
  for (TrackRecord& r : out.rows) {
    r.x *= factor;
    r.vx *= factor;
    r.vy *= factor;
  }
  return out;
}

namespace {

VehicleState to_state(const TrackRecord& r) {
  VehicleState s;
  s.id = r.id;
  s.x = r.x;
  s.y = r.y;
  s.vx = r.vx;
  s.vy = r.vy;
  s.length = r.length;
  s.width = r.width;
  return s;
}

std::vector<TrackSample> to_samples(const std::vector<TrackRecord>& rows, int frame0, double frame_rate) {
  std::vector<TrackSample> out;
  out.reserve(rows.size());
  for (const TrackRecord& r : rows) {
    out.push_back(TrackSample{(r.frame - frame0) / frame_rate, r.x, r.y, r.vx, r.vy});
  }
  return out;
}

}  // namespace

std::vector<ExtractedRun> extract_runs(const TrackFile& tf, const ExtractOptions& options,
                                       std::vector<std::string>* diagnostics) {
  const RoadModel road = tf.meta.road();
  const double fr = tf.meta.frame_rate;
  const auto tracks = tf.tracks();
  auto note = [&](std::string msg) {
    if (diagnostics) diagnostics->push_back(std::move(msg));
  };

  // Frame index -> vehicles present, for intent detection.
  std::map<int, std::vector<VehicleState>> by_frame;
  for (const TrackRecord& r : tf.rows) by_frame[r.frame].push_back(to_state(r));

  std::vector<ExtractedRun> runs;
  for (const auto& [id, rows] : tracks) {
    const double length_s = (rows.back().frame - rows.front().frame) / fr;
    if (rows.size() < 2 || length_s < options.min_duration) {
      note(fmt::format("vehicle {}: track of {:.2f} s skipped", id, length_s));
      continue;
    }
    if (options.lane_filter) {
      const bool hit = std::any_of(rows.begin(), rows.end(), [&](const TrackRecord& r) {
        const auto lane = lane_of(r.y, road);
        return lane && options.lane_filter->contains(*lane);
      });
      if (!hit) continue;
    }
    if (!lane_of(rows.front().y, road)) {
      note(fmt::format("vehicle {}: starts off the road", id));
      continue;
    }

    const int frame0 = rows.front().frame;
    Scenario sc;
    sc.name = fmt::format("vehicle_{}", id);
    sc.road = road;
    sc.thresholds = options.thresholds;
    sc.ego_init = to_state(rows.front());
    sc.initial_ref = ReferenceTrajectory::replay(to_samples(rows, frame0, fr));
    sc.duration = length_s;
    sc.dt = options.dt;
    sc.seed = static_cast<std::uint64_t>(id);

    for (const auto& [other, orows] : tracks) {
      if (other == id || orows.size() < 2) continue;
      if (orows.back().frame < frame0 || orows.front().frame > rows.back().frame) continue;
      SurroundingSpec spec;
      spec.init = to_state(orows.front());
      spec.replay = ReferenceTrajectory::replay(to_samples(orows, frame0, fr));
      sc.surroundings.push_back(std::move(spec));
    }

    // Intent windows from the recorded motion.
    std::vector<IntentWindow> windows;
    for (const TrackRecord& r : rows) {
      const double t = (r.frame - frame0) / fr;
      std::vector<VehicleState> others;
      for (const VehicleState& s : by_frame[r.frame]) {
        if (s.id != id) others.push_back(s);
      }
      const IntentKind kind = detect_intent(to_state(r), others, road, options.thresholds).kind;
      if (!windows.empty() && windows.back().kind == kind) {
        windows.back().t_end = t + 1.0 / fr;
      } else {
        if (!windows.empty()) windows.back().t_end = t;
        windows.push_back(IntentWindow{t, t + 1.0 / fr, kind});
      }
    }
    std::erase_if(windows, [](const IntentWindow& w) { return w.kind == IntentKind::None; });
    sc.intent_script = std::move(windows);

    sc.validate();
    runs.push_back(ExtractedRun{id, std::move(sc)});
  }
  return runs;
}

}  // namespace hwlaw
