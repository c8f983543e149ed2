#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hwlaw {

inline constexpr double kKmhToMs = 1.0 / 3.6;

/// The seven basic highway violation types.
enum class Law : std::uint8_t { A = 0, B, C, D, E, F, G };

inline constexpr std::array<Law, 7> kAllLaws = {Law::A, Law::B, Law::C, Law::D,
                                                Law::E, Law::F, Law::G};

char law_letter(Law law);
std::optional<Law> law_from_letter(char c);

/// Small fixed-size set of laws, ordered a..g when iterated.
class LawSet {
 public:
  LawSet() = default;
  LawSet(std::initializer_list<Law> laws);

  void insert(Law law) { bits_ |= bit(law); }
  void erase(Law law) { bits_ &= static_cast<std::uint8_t>(~bit(law)); }
  [[nodiscard]] bool contains(Law law) const { return (bits_ & bit(law)) != 0; }
  [[nodiscard]] bool empty() const { return bits_ == 0; }
  [[nodiscard]] int size() const;
  [[nodiscard]] std::vector<Law> to_vector() const;
  /// Letters in law order, e.g. "acd"; empty string for the empty set.
  [[nodiscard]] std::string to_string() const;
  static LawSet from_string(std::string_view letters);

  LawSet& operator|=(LawSet other) {
    bits_ |= other.bits_;
    return *this;
  }
  friend LawSet operator|(LawSet a, LawSet b) { return a |= b; }
  LawSet& operator&=(LawSet other) {
    bits_ &= other.bits_;
    return *this;
  }
  friend LawSet operator&(LawSet a, LawSet b) { return a &= b; }
  friend bool operator==(LawSet, LawSet) = default;

 private:
  static std::uint8_t bit(Law law) { return static_cast<std::uint8_t>(1U << static_cast<unsigned>(law)); }
  std::uint8_t bits_ = 0;
};

/// Pose and kinematics of one vehicle at one instant. Road-aligned frame:
/// x along the road, y positive to the left.
struct VehicleState {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;  ///< lateral speed in the road frame, positive leftward
  double yaw = 0.0;
  double yaw_rate = 0.0;
  double length = 4.5;
  double width = 1.8;
};

struct Lane {
  double y_right = 0.0;
  double y_left = 3.75;
  double v_min = 60.0 * kKmhToMs;
  double v_max = 120.0 * kKmhToMs;

  [[nodiscard]] double center() const { return 0.5 * (y_right + y_left); }
  [[nodiscard]] double width() const { return y_left - y_right; }
};

/// Straight multi-lane road. Lanes are ordered right to left (ascending y)
/// and must tile a contiguous lateral interval.
struct RoadModel {
  std::vector<Lane> lanes;

  /// Throws std::invalid_argument when the lane layout is inconsistent.
  void validate() const;
  [[nodiscard]] int lane_count() const { return static_cast<int>(lanes.size()); }
  [[nodiscard]] bool has_lane(int index) const { return index >= 0 && index < lane_count(); }
  [[nodiscard]] const Lane& lane(int index) const { return lanes.at(static_cast<std::size_t>(index)); }
  /// Every lane line including both road edges, ascending.
  [[nodiscard]] std::vector<double> line_positions() const;

  /// `count` lanes of equal width starting at y = 0.
  static RoadModel uniform(int count, double lane_width, double v_min, double v_max);
};

struct LawThresholds {
  double ttcx_min = 2.3;
  double d_clmin = 14.0;
  double t_max_cl = 6.0;
  double dv_ot = 15.0;
  double follow_dist_fast = 100.0;
  double follow_dist_slow = 50.0;
  double follow_speed_break = 100.0 * kKmhToMs;
  double lat_intent_speed = 0.25;
  double ttc_overtake = 20.0;
  double hysteresis_D = 105.0;

  void validate() const;
  /// Entry distance of the following rule at longitudinal speed `vx`.
  [[nodiscard]] double follow_distance(double vx) const {
    return vx > follow_speed_break ? follow_dist_fast : follow_dist_slow;
  }
  /// Extra distance required before a following violation is released.
  [[nodiscard]] double hysteresis_margin() const { return hysteresis_D - follow_dist_fast; }
};

/// Bumper-to-bumper longitudinal gap from `ego` to `tgt` (negative when the
/// bodies overlap or `tgt` is behind).
double longitudinal_gap(const VehicleState& ego, const VehicleState& tgt);

/// Time to longitudinal collision between two vehicles under constant
/// speeds. nullopt when the rear vehicle is not faster than the front one.
std::optional<double> ttcx(const VehicleState& ego, const VehicleState& tgt);

/// Index of the lane whose [y_right, y_left) interval contains y.
std::optional<int> lane_of(double y, const RoadModel& road);

/// True iff the footprint straddles the line (small-yaw approximation).
bool overlaps_lane_line(const VehicleState& ego, double line_y);

/// True iff the footprint overlaps any lane line of the road.
bool overlaps_any_line(const VehicleState& ego, const RoadModel& road);

/// Constant-velocity propagation by `dt` seconds.
VehicleState propagate_constant_velocity(const VehicleState& s, double dt);

}  // namespace hwlaw
