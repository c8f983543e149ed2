#pragma once

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "hwlaw/core_model.hpp"

namespace hwlaw {

enum class IntentKind { None, ChangeLeft, ChangeRight, Overtake };

struct Intent {
  IntentKind kind = IntentKind::None;
  double since = 0.0;  ///< time the intent was first held; ignored for None
};

std::string_view to_string(IntentKind kind);
std::optional<IntentKind> intent_kind_from_string(std::string_view s);

/// Per-law state of the three-state (a, b) or two-state (c..g) machines.
enum class Phase { Compliance, Violation, DecisionViolation };
std::string_view to_string(Phase phase);

/// Progress through the overtaking manoeuvre: change left, pass, change back.
enum class OvertakeStage { None, ChangingLeft, Passing, Returning };
std::string_view to_string(OvertakeStage stage);

struct ViolationReport {
  /// Laws whose expression holds at any predicted step (drives intervention).
  LawSet active;
  /// Laws whose expression holds at the present state, without hysteresis.
  LawSet current;
  std::array<Phase, 7> phase{};

  std::optional<double> line_enter_time;  ///< t_in
  std::optional<int> initial_lane;
  std::optional<int> overtake_lane;

  Intent intent;  ///< latched manoeuvre intent
  OvertakeStage overtake_stage = OvertakeStage::None;
  std::optional<int> overtaken_id;
  std::optional<double> overtaken_speed;
  /// Set once the ego is fast enough to return during an overtake; the
  /// speed floor then stands until the manoeuvre ends.
  bool return_cleared = false;

  /// Release distance of an active following violation.
  std::optional<double> follow_exit_gap;
  /// Vehicle directly ahead in the ego lane at this tick.
  std::optional<int> lead_id;
  /// Lane of the first predicted speed-range violation (a or b).
  std::optional<int> speed_violation_lane;

  [[nodiscard]] Phase phase_of(Law law) const { return phase[static_cast<std::size_t>(law)]; }
  void set_phase(Law law, Phase p) { phase[static_cast<std::size_t>(law)] = p; }
};

struct MonitorConfig {
  int horizon = 30;   ///< predicted steps beyond the present state
  double dt = 0.05;
};

/// Predicted ego states at t+dt, ..., t+horizon*dt. A non-empty plan is
/// sampled directly (extended at constant velocity past its end); otherwise
/// the state is rolled out at constant velocity.
std::vector<VehicleState> predict_states(const VehicleState& ego, std::span<const VehicleState> plan, int horizon,
                                         double dt);

struct PlanShaping {
  double max_accel = std::numeric_limits<double>::infinity();  ///< |dv/dt| bound
  double v_min = 0.0;  ///< reference speeds are clamped into [v_min, v_max]
  double v_max = std::numeric_limits<double>::infinity();
  double lateral_tau = 0.5;  ///< s, decay of the present lateral offset to the reference
  /// Lateral band [lo, hi] the plan is kept in, e.g. while a lane is held.
  std::optional<std::pair<double, double>> y_band;
};

/// Ego plan at t+dt, t+2dt, ... that tracks the reference `ref_states`
/// (samples at t, t+dt, ...): speed rate-limited towards the (clamped)
/// reference speed, lateral position converging on the reference.
std::vector<VehicleState> plan_from_reference(const VehicleState& ego, std::span<const VehicleState> ref_states,
                                              double dt, const PlanShaping& shaping = {});

/// Behavioural intent. An externally supplied intent wins; otherwise the
/// lateral-speed and slower-lead rules are applied to `ego`.
Intent detect_intent(const VehicleState& ego, std::span<const VehicleState> surroundings, const RoadModel& road,
                     const LawThresholds& thresholds, std::optional<Intent> external = std::nullopt);

/// Closest vehicle ahead of `ego` in `lane`.
std::optional<VehicleState> find_lead(const VehicleState& ego, std::span<const VehicleState> surroundings,
                                      const RoadModel& road, int lane);

/// Where along the horizon the speed-range laws first failed.
struct PredicateDetail {
  std::optional<int> speed_lane;
};

struct PredicateOptions {
  double dt = 0.05;
  bool hysteresis = true;
};

/// Evaluates the seven violation expressions over `states` (index 0 is the
/// present state at time t, index k is t + k*dt). `context` supplies the
/// latched manoeuvre state: intent, stage, lanes, t_in and overtaken speed.
LawSet evaluate_predicates(std::span<const VehicleState> states,
                           std::span<const std::vector<VehicleState>> surroundings_per_step, const RoadModel& road,
                           const ViolationReport& context, double t, const LawThresholds& thresholds,
                           const PredicateOptions& options = {}, PredicateDetail* detail = nullptr);

/// One monitoring tick.
///
/// `raw_intent` is this tick's behavioural intent (scripted or detected);
/// the report latches it until the manoeuvre completes or is abandoned.
/// `ego_plan` optionally replaces the constant-velocity ego rollout.
/// `follow_plan`, when given, is a second ego plan also checked by the
/// following-distance rule (the motion the speed constraints will enforce).
/// `ref_states` are samples of the initial reference at t, t+dt, ...; the
/// first one gives the planner's target lane. For a/b, a violation of the
/// present state is Violation and one found only along the plan is
/// DecisionViolation.
ViolationReport monitor_step(const VehicleState& ego, std::span<const VehicleState> surroundings,
                             const RoadModel& road, const Intent& raw_intent,
                             std::span<const VehicleState> ego_plan, std::span<const VehicleState> ref_states,
                             double t, const ViolationReport& report_prev, const LawThresholds& thresholds,
                             const MonitorConfig& config = {}, std::span<const VehicleState> follow_plan = {});

}  // namespace hwlaw
