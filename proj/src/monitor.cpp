#include "hwlaw/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hwlaw {

std::string_view to_string(IntentKind kind) {
  switch (kind) {
    case IntentKind::None: return "none";
    case IntentKind::ChangeLeft: return "change_left";
    case IntentKind::ChangeRight: return "change_right";
    case IntentKind::Overtake: return "overtake";
  }
  return "none";
}

std::optional<IntentKind> intent_kind_from_string(std::string_view s) {
  for (IntentKind k : {IntentKind::None, IntentKind::ChangeLeft, IntentKind::ChangeRight, IntentKind::Overtake}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Compliance: return "compliance";
    case Phase::Violation: return "violation";
    case Phase::DecisionViolation: return "decision_violation";
  }
  return "compliance";
}

std::string_view to_string(OvertakeStage stage) {
  switch (stage) {
    case OvertakeStage::None: return "none";
    case OvertakeStage::ChangingLeft: return "changing_left";
    case OvertakeStage::Passing: return "passing";
    case OvertakeStage::Returning: return "returning";
  }
  return "none";
}

std::vector<VehicleState> predict_states(const VehicleState& ego, std::span<const VehicleState> plan, int horizon,
                                         double dt) {
  std::vector<VehicleState> out;
  out.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  VehicleState last = ego;
  for (int k = 0; k < horizon; ++k) {
    if (static_cast<std::size_t>(k) < plan.size()) {
      last = plan[static_cast<std::size_t>(k)];
    } else {
      last = propagate_constant_velocity(last, dt);
    }
    out.push_back(last);
  }
  return out;
}

std::vector<VehicleState> plan_from_reference(const VehicleState& ego, std::span<const VehicleState> ref_states,
                                              double dt, const PlanShaping& shaping) {
  std::vector<VehicleState> out;
  if (ref_states.empty()) return out;
  out.reserve(ref_states.size() - 1);
  VehicleState s = ego;
  const double dv_max = shaping.max_accel * dt;
  const double offset = ego.y - ref_states.front().y;
  const double decay = shaping.lateral_tau > 0.0 ? std::exp(-dt / shaping.lateral_tau) : 0.0;
  double remaining = offset;
  double y_prev = ego.y;
  for (const VehicleState& r : ref_states.subspan(1)) {
    const double target = std::clamp(r.vx, shaping.v_min, shaping.v_max);
    const double v = s.vx + std::clamp(target - s.vx, -dv_max, dv_max);
    s.x += 0.5 * (s.vx + v) * dt;
    s.vx = v;
    remaining *= decay;
    s.y = r.y + remaining;
    if (shaping.y_band) s.y = std::clamp(s.y, shaping.y_band->first, shaping.y_band->second);
    s.vy = (s.y - y_prev) / dt;
    y_prev = s.y;
    out.push_back(s);
  }
  return out;
}

std::optional<VehicleState> find_lead(const VehicleState& ego, std::span<const VehicleState> surroundings,
                                      const RoadModel& road, int lane) {
  std::optional<VehicleState> lead;
  double best = std::numeric_limits<double>::infinity();
  for (const VehicleState& s : surroundings) {
    if (s.id == ego.id || s.x <= ego.x) continue;
    if (lane_of(s.y, road) != lane) continue;
    const double gap = longitudinal_gap(ego, s);
    if (gap < best) {
      best = gap;
      lead = s;
    }
  }
  return lead;
}

Intent detect_intent(const VehicleState& ego, std::span<const VehicleState> surroundings, const RoadModel& road,
                     const LawThresholds& thresholds, std::optional<Intent> external) {
  if (external) return *external;

  Intent intent;
  if (ego.vy > thresholds.lat_intent_speed) {
    intent.kind = IntentKind::ChangeLeft;
  } else if (ego.vy < -thresholds.lat_intent_speed) {
    intent.kind = IntentKind::ChangeRight;
  } else {
    return intent;
  }

  // Overtaking: a slower vehicle ahead in the same lane, close in time.
  // Only leftward manoeuvres count as overtaking.
  const auto lane = lane_of(ego.y, road);
  if (!lane || intent.kind != IntentKind::ChangeLeft) return intent;
  for (const VehicleState& s : surroundings) {
    if (s.id == ego.id || s.x <= ego.x || lane_of(s.y, road) != lane) continue;
    if (!(s.vx < ego.vx)) continue;
    const auto ttc = ttcx(ego, s);
    if (ttc && std::abs(*ttc) < thresholds.ttc_overtake) {
      intent.kind = IntentKind::Overtake;
      break;
    }
  }
  return intent;
}

namespace {

bool rear_vehicle_unsafe(const VehicleState& ego, std::span<const VehicleState> surroundings, const RoadModel& road,
                         int lane, const LawThresholds& th) {
  if (!road.has_lane(lane)) return false;
  for (const VehicleState& s : surroundings) {
    if (s.id == ego.id || s.x > ego.x || lane_of(s.y, road) != lane) continue;
    const double distance = longitudinal_gap(s, ego);
    const auto ttc = ttcx(ego, s);
    if ((ttc && *ttc <= th.ttcx_min) || distance <= th.d_clmin) return true;
  }
  return false;
}

std::optional<int> left_check_lane(const ViolationReport& ctx) {
  if (!ctx.initial_lane) return std::nullopt;
  return *ctx.initial_lane + 1;
}

std::optional<int> right_check_lane(const ViolationReport& ctx) {
  if (!ctx.initial_lane) return std::nullopt;
  if (ctx.intent.kind == IntentKind::Overtake) return *ctx.initial_lane;
  return *ctx.initial_lane - 1;
}

}  // namespace

LawSet evaluate_predicates(std::span<const VehicleState> states,
                           std::span<const std::vector<VehicleState>> surroundings_per_step, const RoadModel& road,
                           const ViolationReport& context, double t, const LawThresholds& th,
                           const PredicateOptions& options, PredicateDetail* detail) {
  LawSet laws;
  const IntentKind kind = context.intent.kind;
  const bool check_left = kind == IntentKind::ChangeLeft ||
                          (kind == IntentKind::Overtake && context.overtake_stage == OvertakeStage::ChangingLeft);
  const bool check_right = kind == IntentKind::ChangeRight ||
                           (kind == IntentKind::Overtake && context.overtake_stage == OvertakeStage::Returning);
  const bool check_line = kind != IntentKind::None;
  const bool check_speed_diff = kind == IntentKind::Overtake &&
                                context.overtake_stage == OvertakeStage::Returning &&
                                context.overtaken_speed.has_value();

  double t_in = std::numeric_limits<double>::quiet_NaN();  // NaN: off the line
  bool prev_on_line = false;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const VehicleState& e = states[k];
    const std::span<const VehicleState> others =
        k < surroundings_per_step.size() ? std::span<const VehicleState>(surroundings_per_step[k])
                                         : std::span<const VehicleState>();
    const double tk = t + static_cast<double>(k) * options.dt;
    const auto lane = lane_of(e.y, road);

    if (lane) {
      const Lane& l = road.lane(*lane);
      if (e.vx < l.v_min) laws.insert(Law::A);
      if (e.vx > l.v_max) laws.insert(Law::B);
      if (detail && !detail->speed_lane && (e.vx < l.v_min || e.vx > l.v_max)) detail->speed_lane = *lane;

      if (auto lead = find_lead(e, others, road, *lane)) {
        double threshold = th.follow_distance(e.vx);
        if (options.hysteresis && context.follow_exit_gap) threshold = std::max(threshold, *context.follow_exit_gap);
        if (longitudinal_gap(e, *lead) < threshold) laws.insert(Law::C);
      }
    }

    if (check_left) {
      if (auto target = left_check_lane(context); target && rear_vehicle_unsafe(e, others, road, *target, th))
        laws.insert(Law::D);
    }
    if (check_right) {
      if (auto target = right_check_lane(context); target && rear_vehicle_unsafe(e, others, road, *target, th))
        laws.insert(Law::E);
    }

    const bool on_line = overlaps_any_line(e, road);
    if (on_line) {
      if (k == 0) {
        t_in = context.line_enter_time ? *context.line_enter_time : tk;
      } else if (!prev_on_line) {
        t_in = tk;
      }
    } else {
      t_in = std::numeric_limits<double>::quiet_NaN();
    }
    prev_on_line = on_line;
    if (check_line && (tk - t_in) > th.t_max_cl) laws.insert(Law::F);

    if (check_speed_diff && e.vx < *context.overtaken_speed + th.dv_ot) laws.insert(Law::G);
  }
  return laws;
}

namespace {

bool is_settled(const VehicleState& ego, const RoadModel& road) {
  return lane_of(ego.y, road).has_value() && !overlaps_any_line(ego, road);
}

void end_manoeuvre(ViolationReport& r) {
  r.intent = Intent{};
  r.overtake_stage = OvertakeStage::None;
  r.overtake_lane.reset();
  r.overtaken_id.reset();
  r.overtaken_speed.reset();
  r.return_cleared = false;
  r.initial_lane.reset();
}

void start_manoeuvre(ViolationReport& r, IntentKind kind, double t, int lane, const VehicleState& ego,
                     std::span<const VehicleState> surroundings, const RoadModel& road) {
  r.intent = Intent{kind, t};
  r.initial_lane = lane;
  r.overtake_lane.reset();
  r.overtaken_id.reset();
  r.overtaken_speed.reset();
  r.return_cleared = false;
  r.overtake_stage = OvertakeStage::None;
  if (kind == IntentKind::Overtake) {
    r.overtake_stage = OvertakeStage::ChangingLeft;
    if (auto lead = find_lead(ego, surroundings, road, lane)) {
      r.overtaken_id = lead->id;
      r.overtaken_speed = lead->vx;
    }
  }
}

void update_manoeuvre(ViolationReport& r, const VehicleState& ego, std::span<const VehicleState> surroundings,
                      const RoadModel& road, const Intent& raw, std::optional<int> ref_lane, bool ref_moving_right,
                      double t) {
  const auto lane = lane_of(ego.y, road);
  const bool settled = is_settled(ego, road);

  switch (r.intent.kind) {
    case IntentKind::None:
      if (raw.kind != IntentKind::None && lane) start_manoeuvre(r, raw.kind, t, *lane, ego, surroundings, road);
      return;

    case IntentKind::ChangeLeft:
    case IntentKind::ChangeRight: {
      const int initial = *r.initial_lane;
      if (r.intent.kind == IntentKind::ChangeLeft && raw.kind == IntentKind::Overtake && lane == initial) {
        const double since = r.intent.since;
        start_manoeuvre(r, IntentKind::Overtake, since, initial, ego, surroundings, road);
        return;
      }
      if (!settled) return;
      const int target = r.intent.kind == IntentKind::ChangeLeft ? initial + 1 : initial - 1;
      if (*lane == target) {
        end_manoeuvre(r);
      } else if (*lane == initial) {
        if (raw.kind == IntentKind::None && ref_lane == initial) end_manoeuvre(r);
      } else {
        end_manoeuvre(r);
      }
      return;
    }

    case IntentKind::Overtake: {
      const int initial = *r.initial_lane;
      switch (r.overtake_stage) {
        case OvertakeStage::ChangingLeft:
          if (settled && *lane == initial + 1) {
            r.overtake_lane = *lane;
            r.overtake_stage = OvertakeStage::Passing;
          } else if (settled && *lane == initial && raw.kind == IntentKind::None && ref_lane == initial) {
            end_manoeuvre(r);
          } else if (settled && *lane != initial && *lane != initial + 1) {
            end_manoeuvre(r);
          }
          break;
        case OvertakeStage::Passing:
          if (ref_lane == initial || ref_moving_right || raw.kind == IntentKind::ChangeRight)
            r.overtake_stage = OvertakeStage::Returning;
          break;
        case OvertakeStage::Returning:
          if (settled && *lane == initial) {
            end_manoeuvre(r);
          } else if (ref_lane == r.overtake_lane && raw.kind != IntentKind::ChangeRight) {
            r.overtake_stage = OvertakeStage::Passing;
          }
          break;
        case OvertakeStage::None:
          end_manoeuvre(r);
          break;
      }
      return;
    }
  }
}

constexpr double kReturnSpeedTol = 0.05;  // m/s

}  // namespace

ViolationReport monitor_step(const VehicleState& ego, std::span<const VehicleState> surroundings,
                             const RoadModel& road, const Intent& raw_intent,
                             std::span<const VehicleState> ego_plan, std::span<const VehicleState> ref_states,
                             double t, const ViolationReport& report_prev, const LawThresholds& thresholds,
                             const MonitorConfig& config, std::span<const VehicleState> follow_plan) {
  ViolationReport r = report_prev;
  r.active = {};
  r.current = {};

  // Lane-line timer.
  if (overlaps_any_line(ego, road)) {
    if (!r.line_enter_time) r.line_enter_time = t;
  } else {
    r.line_enter_time.reset();
  }

  const auto lane = lane_of(ego.y, road);
  // Lane the planner's reference is settled in; none while it straddles a
  // line, so a paused manoeuvre is not mistaken for an abandoned one.
  std::optional<int> ref_lane;
  if (!ref_states.empty() && is_settled(ref_states.front(), road)) ref_lane = lane_of(ref_states.front().y, road);

  const bool following_latched = report_prev.follow_exit_gap.has_value();
  const bool ref_moving_right = !ref_states.empty() && ref_states.front().vy < -thresholds.lat_intent_speed;
  update_manoeuvre(r, ego, surroundings, road, raw_intent, ref_lane, ref_moving_right, t);
  if (r.intent.kind == IntentKind::None && following_latched && !r.initial_lane && lane) r.initial_lane = *lane;

  if (r.overtaken_id) {
    for (const VehicleState& s : surroundings) {
      if (s.id == *r.overtaken_id) r.overtaken_speed = s.vx;
    }
  }
  std::optional<double> return_floor;
  if (r.overtake_stage != OvertakeStage::Returning || !r.overtaken_speed) {
    r.return_cleared = false;
  } else {
    return_floor = *r.overtaken_speed + thresholds.dv_ot;
    if (ego.vx >= *return_floor - kReturnSpeedTol) r.return_cleared = true;
  }

  // Ego and surroundings over the horizon.
  std::vector<VehicleState> states;
  states.reserve(static_cast<std::size_t>(config.horizon) + 1);
  states.push_back(ego);
  for (const VehicleState& s : predict_states(ego, ego_plan, config.horizon, config.dt)) states.push_back(s);
  // the standing floor keeps the plan from slowing down before re-entry
  if (r.return_cleared) {
    for (std::size_t k = 1; k < states.size(); ++k) {
      VehicleState& s = states[k];
      s.vx = std::max(s.vx, *return_floor);
      s.x = states[k - 1].x + 0.5 * (states[k - 1].vx + s.vx) * config.dt;
    }
  }

  std::vector<std::vector<VehicleState>> others(states.size());
  others[0].assign(surroundings.begin(), surroundings.end());
  for (std::size_t k = 1; k < states.size(); ++k) {
    others[k].reserve(surroundings.size());
    for (const VehicleState& s : others[k - 1]) others[k].push_back(propagate_constant_velocity(s, config.dt));
  }

  const PredicateOptions predictive{config.dt, true};
  const PredicateOptions instantaneous{config.dt, false};
  PredicateDetail detail;
  r.active = evaluate_predicates(states, others, road, r, t, thresholds, predictive, &detail);
  r.speed_violation_lane = detail.speed_lane;
  r.current = evaluate_predicates(std::span(states).first(1), std::span(others).first(1), road, r, t, thresholds,
                                  instantaneous);
  // A lead drifting sideways may stop short of leaving the lane; for the
  // following rule others keep their present lateral position.
  if (!r.active.contains(Law::C)) {
    std::vector<std::vector<VehicleState>> held(others.size());
    for (std::size_t k = 0; k < others.size(); ++k) {
      held[k] = others[k];
      for (std::size_t i = 0; i < held[k].size(); ++i) held[k][i].y = surroundings[i].y;
    }
    if (evaluate_predicates(states, held, road, r, t, thresholds, predictive).contains(Law::C)) r.active.insert(Law::C);
  }
  if (!follow_plan.empty() && !r.active.contains(Law::C)) {
    std::vector<VehicleState> alt;
    alt.reserve(states.size());
    alt.push_back(ego);
    for (const VehicleState& s : predict_states(ego, follow_plan, config.horizon, config.dt)) alt.push_back(s);
    if (evaluate_predicates(alt, others, road, r, t, thresholds, predictive).contains(Law::C)) r.active.insert(Law::C);
  }

  // Following-distance latch and its lane memory.
  if (r.active.contains(Law::C)) {
    if (!r.follow_exit_gap) r.follow_exit_gap = thresholds.follow_distance(ego.vx) + thresholds.hysteresis_margin();
    if (!r.initial_lane && lane) r.initial_lane = *lane;
  } else {
    r.follow_exit_gap.reset();
    if (r.intent.kind == IntentKind::None) r.initial_lane.reset();
  }

  r.lead_id.reset();
  if (lane) {
    if (auto lead = find_lead(ego, surroundings, road, *lane)) r.lead_id = lead->id;
  }

  // Phases. a/b: the present state decides Violation; a violation that only
  // appears along the predicted plan is a decision violation.
  for (Law law : {Law::A, Law::B}) {
    r.set_phase(law, r.current.contains(law)  ? Phase::Violation
                     : r.active.contains(law) ? Phase::DecisionViolation
                                              : Phase::Compliance);
  }
  for (Law law : {Law::C, Law::D, Law::E, Law::F, Law::G}) {
    r.set_phase(law, r.active.contains(law) ? Phase::Violation : Phase::Compliance);
  }
  return r;
}

}  // namespace hwlaw
