#include "hwlaw/core_model.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace hwlaw {

char law_letter(Law law) { return static_cast<char>('a' + static_cast<int>(law)); }

std::optional<Law> law_from_letter(char c) {
  if (c < 'a' || c > 'g') return std::nullopt;
  return static_cast<Law>(c - 'a');
}

LawSet::LawSet(std::initializer_list<Law> laws) {
  for (Law l : laws) insert(l);
}

int LawSet::size() const { return std::popcount(bits_); }

std::vector<Law> LawSet::to_vector() const {
  std::vector<Law> out;
  for (Law l : kAllLaws) {
    if (contains(l)) out.push_back(l);
  }
  return out;
}

std::string LawSet::to_string() const {
  std::string s;
  for (Law l : kAllLaws) {
    if (contains(l)) s.push_back(law_letter(l));
  }
  return s;
}

LawSet LawSet::from_string(std::string_view letters) {
  LawSet set;
  for (char c : letters) {
    auto law = law_from_letter(c);
    if (!law) throw std::invalid_argument(std::string("unknown law letter '") + c + "'");
    set.insert(*law);
  }
  return set;
}

void RoadModel::validate() const {
  if (lanes.empty()) throw std::invalid_argument("road has no lanes");
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const Lane& l = lanes[i];
    if (!(l.y_left > l.y_right)) throw std::invalid_argument("lane " + std::to_string(i) + ": y_left must exceed y_right");
    if (!(l.v_min >= 0.0 && l.v_min < l.v_max))
      throw std::invalid_argument("lane " + std::to_string(i) + ": need 0 <= v_min < v_max");
    if (i > 0 && std::abs(lanes[i - 1].y_left - l.y_right) > 1e-9)
      throw std::invalid_argument("lanes " + std::to_string(i - 1) + "/" + std::to_string(i) + " are not contiguous");
  }
}

std::vector<double> RoadModel::line_positions() const {
  std::vector<double> lines;
  if (lanes.empty()) return lines;
  lines.reserve(lanes.size() + 1);
  lines.push_back(lanes.front().y_right);
  for (const Lane& l : lanes) lines.push_back(l.y_left);
  return lines;
}

RoadModel RoadModel::uniform(int count, double lane_width, double v_min, double v_max) {
  RoadModel road;
  for (int i = 0; i < count; ++i) {
    road.lanes.push_back(Lane{i * lane_width, (i + 1) * lane_width, v_min, v_max});
  }
  return road;
}

void LawThresholds::validate() const {
  const double values[] = {ttcx_min,          d_clmin,          t_max_cl,           dv_ot,         follow_dist_fast,
                           follow_dist_slow,  follow_speed_break, lat_intent_speed, ttc_overtake, hysteresis_D};
  for (double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("law thresholds must be strictly positive");
  }
  if (!(follow_dist_fast > follow_dist_slow))
    throw std::invalid_argument("follow_dist_fast must exceed follow_dist_slow");
}

double longitudinal_gap(const VehicleState& ego, const VehicleState& tgt) {
  return (tgt.x - ego.x) - 0.5 * (tgt.length + ego.length);
}

std::optional<double> ttcx(const VehicleState& ego, const VehicleState& tgt) {
  const bool ego_is_rear = ego.x <= tgt.x;
  const VehicleState& rear = ego_is_rear ? ego : tgt;
  const VehicleState& front = ego_is_rear ? tgt : ego;
  const double closing = rear.vx - front.vx;
  if (closing <= 0.0) return std::nullopt;
  return longitudinal_gap(rear, front) / closing;
}

std::optional<int> lane_of(double y, const RoadModel& road) {
  for (int i = 0; i < road.lane_count(); ++i) {
    const Lane& l = road.lanes[static_cast<std::size_t>(i)];
    if (y >= l.y_right && y < l.y_left) return i;
  }
  return std::nullopt;
}

bool overlaps_lane_line(const VehicleState& ego, double line_y) {
  return std::abs(ego.y - line_y) < 0.5 * ego.width;
}

bool overlaps_any_line(const VehicleState& ego, const RoadModel& road) {
  for (double line : road.line_positions()) {
    if (overlaps_lane_line(ego, line)) return true;
  }
  return false;
}

VehicleState propagate_constant_velocity(const VehicleState& s, double dt) {
  VehicleState out = s;
  out.x += s.vx * dt;
  out.y += s.vy * dt;
  out.yaw += s.yaw_rate * dt;
  return out;
}

}  // namespace hwlaw
