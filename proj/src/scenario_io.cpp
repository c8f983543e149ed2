#include "hwlaw/scenario_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace hwlaw {

std::string SchemaError::format(const std::string& what, int line) {
  return line > 0 ? fmt::format("line {}: {}", line, what) : what;
}

double parse_speed(std::string_view text) {
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  double factor = 1.0;
  auto strip = [&](std::string_view suffix, double f) {
    if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
      s.resize(s.size() - suffix.size());
      factor = f;
      return true;
    }
    return false;
  };
  strip("km/h", kKmhToMs) || strip("kmh", kKmhToMs) || strip("kph", kKmhToMs) || strip("m/s", 1.0) ||
      strip("mps", 1.0);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument(fmt::format("cannot parse speed '{}'", text));
  return v * factor;
}

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

[[noreturn]] void fail(const YAML::Node& n, const std::string& what) { throw SchemaError(what, line_of(n)); }

double as_double(const YAML::Node& n, const char* key) {
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    fail(n, fmt::format("'{}' must be a number", key));
  }
}

int as_int(const YAML::Node& n, const char* key) {
  try {
    return n.as<int>();
  } catch (const YAML::Exception&) {
    fail(n, fmt::format("'{}' must be an integer", key));
  }
}

double as_speed(const YAML::Node& n, const char* key) {
  if (!n.IsScalar()) fail(n, fmt::format("'{}' must be a speed", key));
  try {
    return parse_speed(n.Scalar());
  } catch (const std::invalid_argument& e) {
    fail(n, fmt::format("'{}': {}", key, e.what()));
  }
}

const YAML::Node require(const YAML::Node& parent, const char* key) {
  const YAML::Node n = parent[key];
  if (!n) fail(parent, fmt::format("missing key '{}'", key));
  return n;
}

double get_double(const YAML::Node& parent, const char* key, double fallback) {
  const YAML::Node n = parent[key];
  return n ? as_double(n, key) : fallback;
}

double get_speed(const YAML::Node& parent, const char* key, double fallback) {
  const YAML::Node n = parent[key];
  return n ? as_speed(n, key) : fallback;
}

void check_keys(const YAML::Node& n, std::initializer_list<std::string_view> allowed) {
  if (!n.IsMap()) fail(n, "expected a mapping");
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(kv.first, fmt::format("unknown key '{}'", key));
  }
}

RoadModel parse_road(const YAML::Node& n) {
  check_keys(n, {"lanes", "uniform"});
  RoadModel road;
  if (const YAML::Node u = n["uniform"]) {
    check_keys(u, {"count", "width", "v_min", "v_max"});
    road = RoadModel::uniform(as_int(require(u, "count"), "count"), get_double(u, "width", 3.75),
                              get_speed(u, "v_min", 60.0 * kKmhToMs), get_speed(u, "v_max", 120.0 * kKmhToMs));
  } else {
    const YAML::Node lanes = require(n, "lanes");
    if (!lanes.IsSequence()) fail(lanes, "'lanes' must be a list");
    for (const YAML::Node& l : lanes) {
      check_keys(l, {"y_right", "y_left", "v_min", "v_max"});
      Lane lane;
      lane.y_right = as_double(require(l, "y_right"), "y_right");
      lane.y_left = as_double(require(l, "y_left"), "y_left");
      lane.v_min = get_speed(l, "v_min", lane.v_min);
      lane.v_max = get_speed(l, "v_max", lane.v_max);
      road.lanes.push_back(lane);
    }
  }
  try {
    road.validate();
  } catch (const std::invalid_argument& e) {
    fail(n, e.what());
  }
  return road;
}

void apply_thresholds(const YAML::Node& n, LawThresholds& th) {
  check_keys(n, {"ttcx_min", "d_clmin", "t_max_cl", "dv_ot", "follow_dist_fast", "follow_dist_slow",
                 "follow_speed_break", "lat_intent_speed", "ttc_overtake", "hysteresis_D"});
  th.ttcx_min = get_double(n, "ttcx_min", th.ttcx_min);
  th.d_clmin = get_double(n, "d_clmin", th.d_clmin);
  th.t_max_cl = get_double(n, "t_max_cl", th.t_max_cl);
  th.dv_ot = get_speed(n, "dv_ot", th.dv_ot);
  th.follow_dist_fast = get_double(n, "follow_dist_fast", th.follow_dist_fast);
  th.follow_dist_slow = get_double(n, "follow_dist_slow", th.follow_dist_slow);
  th.follow_speed_break = get_speed(n, "follow_speed_break", th.follow_speed_break);
  th.lat_intent_speed = get_speed(n, "lat_intent_speed", th.lat_intent_speed);
  th.ttc_overtake = get_double(n, "ttc_overtake", th.ttc_overtake);
  th.hysteresis_D = get_double(n, "hysteresis_D", th.hysteresis_D);
  try {
    th.validate();
  } catch (const std::invalid_argument& e) {
    fail(n, e.what());
  }
}

double lateral_of(const YAML::Node& n, const RoadModel& road) {
  if (const YAML::Node lane = n["lane"]) {
    const int idx = as_int(lane, "lane");
    if (!road.has_lane(idx)) fail(lane, fmt::format("lane {} does not exist", idx));
    return road.lane(idx).center();
  }
  return as_double(require(n, "y"), "y");
}

VehicleState parse_vehicle(const YAML::Node& n, const RoadModel& road, int default_id) {
  VehicleState v;
  const YAML::Node id = n["id"];
  v.id = id ? as_int(id, "id") : default_id;
  v.x = get_double(n, "x", 0.0);
  v.y = lateral_of(n, road);
  v.vx = get_speed(n, "vx", 0.0);
  v.vy = get_speed(n, "vy", 0.0);
  v.length = get_double(n, "length", v.length);
  v.width = get_double(n, "width", v.width);
  if (!(v.length > 0.0 && v.width > 0.0)) fail(n, "vehicle size must be positive");
  v.yaw = v.vx > 0.0 ? std::atan2(v.vy, v.vx) : 0.0;
  return v;
}

ReferenceTrajectory parse_reference(const YAML::Node& n, const RoadModel& road, const VehicleState& ego) {
  check_keys(n, {"type", "x0", "y0", "lane", "speed", "speeds", "lane_changes", "samples"});
  const std::string type = require(n, "type").as<std::string>();
  const double x0 = get_double(n, "x0", ego.x);
  const double y0 = n["lane"] || n["y0"] ? (n["lane"] ? lateral_of(n, road) : as_double(n["y0"], "y0")) : ego.y;

  if (type == "constant_speed") {
    return ReferenceTrajectory::constant_speed(x0, y0, as_speed(require(n, "speed"), "speed"));
  }
  if (type == "scripted") {
    std::vector<SpeedKey> speeds;
    if (const YAML::Node s = n["speeds"]) {
      if (!s.IsSequence()) fail(s, "'speeds' must be a list of [t, v] pairs");
      for (const YAML::Node& p : s) {
        if (!p.IsSequence() || p.size() != 2) fail(p, "speed key must be [t, v]");
        speeds.push_back(SpeedKey{as_double(p[0], "t"), as_speed(p[1], "v")});
      }
    } else {
      speeds.push_back(SpeedKey{0.0, as_speed(require(n, "speed"), "speed")});
    }
    std::vector<LateralManoeuvre> moves;
    if (const YAML::Node lc = n["lane_changes"]) {
      if (!lc.IsSequence()) fail(lc, "'lane_changes' must be a list");
      for (const YAML::Node& m : lc) {
        check_keys(m, {"t", "duration", "lane", "y"});
        LateralManoeuvre mv;
        mv.t_start = as_double(require(m, "t"), "t");
        mv.duration = get_double(m, "duration", mv.duration);
        mv.target_y = lateral_of(m, road);
        if (!(mv.duration > 0.0)) fail(m, "lane-change duration must be positive");
        moves.push_back(mv);
      }
    }
    try {
      return ReferenceTrajectory::scripted(x0, y0, std::move(speeds), std::move(moves));
    } catch (const std::invalid_argument& e) {
      fail(n, e.what());
    }
  }
  if (type == "replay") {
    const YAML::Node s = require(n, "samples");
    if (!s.IsSequence()) fail(s, "'samples' must be a list of [t, x, y, vx, vy]");
    std::vector<TrackSample> samples;
    for (const YAML::Node& p : s) {
      if (!p.IsSequence() || p.size() != 5) fail(p, "replay sample must be [t, x, y, vx, vy]");
      samples.push_back(TrackSample{as_double(p[0], "t"), as_double(p[1], "x"), as_double(p[2], "y"),
                                    as_double(p[3], "vx"), as_double(p[4], "vy")});
    }
    try {
      return ReferenceTrajectory::replay(std::move(samples));
    } catch (const std::invalid_argument& e) {
      fail(s, e.what());
    }
  }
  fail(n["type"], fmt::format("unknown reference type '{}'", type));
}

SurroundingSpec parse_surrounding(const YAML::Node& n, const RoadModel& road, int default_id) {
  check_keys(n, {"id", "x", "y", "lane", "vx", "vy", "length", "width", "script", "min_speed", "max_speed"});
  SurroundingSpec s;
  s.init = parse_vehicle(n, road, default_id);
  s.min_speed = get_speed(n, "min_speed", 0.0);
  s.max_speed = get_speed(n, "max_speed", 1e9);
  if (const YAML::Node script = n["script"]) {
    if (!script.IsSequence()) fail(script, "'script' must be a list");
    for (const YAML::Node& e : script) {
      check_keys(e, {"t", "accel", "lane", "duration"});
      MotionEvent ev;
      ev.t = as_double(require(e, "t"), "t");
      if (const YAML::Node a = e["accel"]) ev.accel = as_double(a, "accel");
      if (const YAML::Node l = e["lane"]) {
        ev.lane = as_int(l, "lane");
        if (!road.has_lane(*ev.lane)) fail(l, fmt::format("lane {} does not exist", *ev.lane));
      }
      ev.duration = get_double(e, "duration", ev.duration);
      if (!(ev.duration > 0.0)) fail(e, "lane-change duration must be positive");
      s.script.push_back(ev);
    }
  }
  return s;
}

Scenario parse_document(const YAML::Node& doc) {
  check_keys(doc, {"name", "duration", "dt", "seed", "road", "thresholds", "ego", "reference", "surroundings",
                   "intents"});
  Scenario sc;
  sc.name = doc["name"] ? doc["name"].as<std::string>() : "scenario";
  sc.duration = as_double(require(doc, "duration"), "duration");
  sc.dt = get_double(doc, "dt", sc.dt);
  if (const YAML::Node seed = doc["seed"]) sc.seed = seed.as<std::uint64_t>();
  if (!(sc.duration >= 0.0)) fail(doc["duration"], "duration must be non-negative");
  if (!(sc.dt > 0.0)) fail(doc["dt"], "dt must be positive");

  sc.road = parse_road(require(doc, "road"));
  if (const YAML::Node th = doc["thresholds"]) apply_thresholds(th, sc.thresholds);

  const YAML::Node ego = require(doc, "ego");
  check_keys(ego, {"id", "x", "y", "lane", "vx", "vy", "length", "width"});
  sc.ego_init = parse_vehicle(ego, sc.road, 0);
  if (!lane_of(sc.ego_init.y, sc.road)) fail(ego, "ego starts off the road");

  if (const YAML::Node ref = doc["reference"]) {
    sc.initial_ref = parse_reference(ref, sc.road, sc.ego_init);
  } else {
    sc.initial_ref = ReferenceTrajectory::constant_speed(sc.ego_init.x, sc.ego_init.y, sc.ego_init.vx);
  }

  if (const YAML::Node list = doc["surroundings"]) {
    if (!list.IsSequence()) fail(list, "'surroundings' must be a list");
    int next_id = sc.ego_init.id + 1;
    for (const YAML::Node& s : list) {
      SurroundingSpec spec = parse_surrounding(s, sc.road, next_id);
      if (spec.init.id == sc.ego_init.id) fail(s, fmt::format("vehicle id {} duplicates the ego", spec.init.id));
      if (!lane_of(spec.init.y, sc.road)) fail(s, "vehicle starts off the road");
      next_id = std::max(next_id, spec.init.id) + 1;
      sc.surroundings.push_back(std::move(spec));
    }
  }

  if (const YAML::Node intents = doc["intents"]) {
    if (!intents.IsSequence()) fail(intents, "'intents' must be a list");
    std::vector<IntentWindow> windows;
    for (const YAML::Node& w : intents) {
      check_keys(w, {"from", "to", "kind"});
      IntentWindow iw;
      iw.t_start = as_double(require(w, "from"), "from");
      iw.t_end = as_double(require(w, "to"), "to");
      const auto kind = intent_kind_from_string(require(w, "kind").as<std::string>());
      if (!kind) fail(w["kind"], "kind must be none, change_left, change_right or overtake");
      iw.kind = *kind;
      if (iw.t_end < iw.t_start) fail(w, "intent window ends before it starts");
      windows.push_back(iw);
    }
    sc.intent_script = std::move(windows);
  }
  return sc;
}

YAML::Node load_yaml(const std::string& text, const std::string& origin) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw SchemaError(fmt::format("{}: {}", origin, e.msg), e.mark.line >= 0 ? e.mark.line + 1 : 0);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Scenario parse_scenario(const std::string& yaml_text, const std::string& origin) {
  const YAML::Node doc = load_yaml(yaml_text, origin);
  if (!doc.IsMap()) throw SchemaError(origin + ": scenario must be a mapping", 1);
  try {
    return parse_document(doc);
  } catch (const SchemaError& e) {
    throw SchemaError(fmt::format("{}: {}", origin, e.what()), 0);
  } catch (const YAML::Exception& e) {
    throw SchemaError(fmt::format("{}: {}", origin, e.msg), e.mark.line >= 0 ? e.mark.line + 1 : 0);
  }
}

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path), path.string()); }

LawThresholds parse_thresholds(const std::string& yaml_text, const LawThresholds& base) {
  const YAML::Node doc = load_yaml(yaml_text, "thresholds");
  LawThresholds th = base;
  if (doc.IsNull()) return th;
  apply_thresholds(doc, th);
  return th;
}

LawThresholds load_thresholds(const std::filesystem::path& path, const LawThresholds& base) {
  try {
    return parse_thresholds(read_file(path), base);
  } catch (const SchemaError& e) {
    throw SchemaError(fmt::format("{}: {}", path.string(), e.what()), 0);
  }
}

}  // namespace hwlaw
