#pragma once

#include <optional>
#include <vector>

#include "hwlaw/core_model.hpp"
#include "hwlaw/monitor.hpp"

namespace hwlaw {

enum class DirectiveVariable { Speed, LateralPosition };

std::string_view to_string(DirectiveVariable v);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
  [[nodiscard]] bool empty() const { return lo > hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Transition paths: 1 speed reference, 2 speed constraint, 3 lateral
/// reference, 4 lateral constraint.
enum TransitionPath : unsigned { kPathSpeedRef = 1U, kPathSpeedCons = 2U, kPathLatRef = 4U, kPathLatCons = 8U };

struct ComplianceDirective {
  DirectiveVariable variable = DirectiveVariable::Speed;
  std::optional<double> reference;
  std::optional<Interval> constraint;
  Law source = Law::A;

  /// Bitmask of TransitionPath values implied by the populated fields.
  [[nodiscard]] unsigned paths() const;
  friend bool operator==(const ComplianceDirective&, const ComplianceDirective&) = default;
};

struct FollowingGapContext {
  double v0_ego = 0.0;
  double v0_tgt = 0.0;
  double x0_ego = 0.0;  ///< front bumper of the ego
  double x0_tgt = 0.0;  ///< rear bumper of the lead
  double D = 100.0;
  double t1 = 0.0;
  double t2 = 1.0;
};

/// Reference speed that closes the following gap at constant deceleration,
/// floored at zero. Throws std::invalid_argument when t2 <= 0.
double following_reference_speed(const FollowingGapContext& ctx);

struct GapTiming {
  double a_comf = 2.0;          ///< comfortable deceleration, m/s^2
  std::optional<double> t1;     ///< fixed t1 instead of the derived one
  std::optional<double> t2;     ///< fixed t2 instead of the derived one
};

/// Builds the gap-recovery context for an ego and its lead at distance D,
/// deriving t1 and t2 unless fixed by `timing`.
FollowingGapContext make_following_context(const VehicleState& ego, const VehicleState& lead, double D,
                                           const GapTiming& timing = {});

struct DirectiveContext {
  RoadModel road;
  std::optional<int> initial_lane;
  std::optional<int> current_lane;
  std::optional<int> overtake_lane;
  double ego_width = 1.8;
  std::optional<double> v_tgt_overtaken;

  std::optional<VehicleState> ego;
  std::optional<VehicleState> lead;  ///< vehicle ahead in the current lane
  GapTiming timing;

  /// Initial reference at this tick.
  double initial_ref_speed = 0.0;
  double initial_ref_y = 0.0;
};

/// Per-law directives for the laws flagged in `report`. Laws without an
/// active expression still contribute their standing constraints (speed
/// range). Throws std::invalid_argument when a required lane is missing.
std::vector<ComplianceDirective> generate_directives(const ViolationReport& report, const DirectiveContext& ctx,
                                                     const LawThresholds& thresholds);

}  // namespace hwlaw
