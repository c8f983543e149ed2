#pragma once

#include <optional>
#include <vector>

#include "hwlaw/core_model.hpp"

namespace hwlaw {

struct TrackSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
};

struct SpeedKey {
  double t = 0.0;
  double v = 0.0;
};

/// Lateral move to `target_y` over [t_start, t_start + duration] with a
/// quintic smoothstep profile.
struct LateralManoeuvre {
  double t_start = 0.0;
  double duration = 4.0;
  double target_y = 0.0;
};

enum class ReferenceKind { ReplayTrack, ConstantSpeedLaneCenter, ScriptedLaneChange };

std::string_view to_string(ReferenceKind k);

/// Planner trajectory before any compliance override.
class ReferenceTrajectory {
 public:
  ReferenceTrajectory() = default;

  static ReferenceTrajectory constant_speed(double x0, double y, double v);
  /// Piecewise-linear speed through `speeds` (held outside the keys) and a
  /// sequence of lateral manoeuvres starting from y0.
  static ReferenceTrajectory scripted(double x0, double y0, std::vector<SpeedKey> speeds,
                                      std::vector<LateralManoeuvre> moves);
  /// Linear interpolation of recorded samples; constant-velocity
  /// extrapolation outside the record. Samples must have increasing t.
  static ReferenceTrajectory replay(std::vector<TrackSample> samples);

  [[nodiscard]] ReferenceKind kind() const { return kind_; }
  /// Pose and velocity at time t (identity and size fields are left default).
  [[nodiscard]] VehicleState sample(double t) const;
  [[nodiscard]] double speed_at(double t) const;

  [[nodiscard]] const std::vector<TrackSample>& track() const { return track_; }
  [[nodiscard]] const std::vector<SpeedKey>& speeds() const { return speeds_; }
  [[nodiscard]] const std::vector<LateralManoeuvre>& moves() const { return moves_; }
  [[nodiscard]] double x0() const { return x0_; }
  [[nodiscard]] double y0() const { return y0_; }

 private:
  [[nodiscard]] double position_at(double t) const;

  ReferenceKind kind_ = ReferenceKind::ConstantSpeedLaneCenter;
  double x0_ = 0.0;
  double y0_ = 0.0;
  std::vector<SpeedKey> speeds_;
  std::vector<double> key_x_;  ///< distance travelled at each key
  std::vector<LateralManoeuvre> moves_;
  std::vector<TrackSample> track_;
};

/// Quintic smoothstep and its derivative on [0, 1].
double smoothstep5(double s);
double smoothstep5_rate(double s);

/// Timed change to a non-reactive vehicle's motion.
struct MotionEvent {
  double t = 0.0;
  std::optional<double> accel;  ///< new constant acceleration
  std::optional<int> lane;      ///< start a lane change to this lane
  double duration = 4.0;        ///< lane-change duration
};

struct SurroundingSpec {
  VehicleState init;
  std::vector<MotionEvent> script;
  std::optional<ReferenceTrajectory> replay;  ///< replaces init and script
  double min_speed = 0.0;                     ///< braking stops at this speed
  double max_speed = 1e9;
};

/// Scripted or replayed traffic participant.
class TrafficVehicle {
 public:
  explicit TrafficVehicle(const SurroundingSpec& spec, const RoadModel& road);

  /// State at the current time, or nullopt while a replay track is absent.
  [[nodiscard]] std::optional<VehicleState> state() const;
  void advance(double dt);
  [[nodiscard]] int id() const { return state_.id; }

 private:
  void apply_events();

  SurroundingSpec spec_;
  std::vector<double> event_target_y_;
  VehicleState state_;
  double t_ = 0.0;
  double accel_ = 0.0;
  std::size_t next_event_ = 0;
  std::optional<LateralManoeuvre> move_;
  double move_from_ = 0.0;
};

}  // namespace hwlaw
