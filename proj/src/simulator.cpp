#include "hwlaw/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace hwlaw {

std::string_view to_string(FrameState s) {
  switch (s) {
    case FrameState::Compliant: return "compliant";
    case FrameState::ActiveViolation: return "active_violation";
    case FrameState::PassiveViolation: return "passive_violation";
    case FrameState::ComplianceUnderIntervention: return "compliance_under_intervention";
  }
  return "compliant";
}

std::optional<FrameState> frame_state_from_string(std::string_view s) {
  for (FrameState f : {FrameState::Compliant, FrameState::ActiveViolation, FrameState::PassiveViolation,
                       FrameState::ComplianceUnderIntervention}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

void Scenario::validate() const {
  road.validate();
  thresholds.validate();
  if (!(duration >= 0.0)) throw std::invalid_argument("scenario duration must be non-negative");
  if (!(dt > 0.0)) throw std::invalid_argument("scenario dt must be positive");
  if (!(ego_init.length > 0.0 && ego_init.width > 0.0)) throw std::invalid_argument("ego size must be positive");
  if (!lane_of(ego_init.y, road)) throw std::invalid_argument("ego starts off the road");
  for (const SurroundingSpec& s : surroundings) {
    if (s.init.id == ego_init.id) throw std::invalid_argument(fmt::format("vehicle id {} duplicates the ego", s.init.id));
    if (!s.replay && !lane_of(s.init.y, road))
      throw std::invalid_argument(fmt::format("vehicle {} starts off the road", s.init.id));
  }
  if (intent_script) {
    for (const IntentWindow& w : *intent_script) {
      if (!(w.t_end >= w.t_start)) throw std::invalid_argument("intent window ends before it starts");
    }
  }
}

int Scenario::frame_count() const { return static_cast<int>(std::floor(duration / dt + 1e-9)); }

namespace {

constexpr std::array<Law, 4> kManoeuvreLaws = {Law::D, Law::E, Law::F, Law::G};

std::optional<int> right_target(const ViolationReport& r) {
  if (!r.initial_lane) return std::nullopt;
  return r.intent.kind == IntentKind::Overtake ? *r.initial_lane : *r.initial_lane - 1;
}

// True once the ego reaches the line bounding `target` on the side facing
// the ego, or is already inside `target`.
bool reaching_lane(const VehicleState& ego, const RoadModel& road, int target, bool from_right) {
  if (!road.has_lane(target)) return false;
  const double line = from_right ? road.lane(target).y_right : road.lane(target).y_left;
  return overlaps_lane_line(ego, line) || lane_of(ego.y, road) == target;
}

std::optional<int> lane_change_target(Law law, const ViolationReport& r) {
  switch (law) {
    case Law::D: return r.initial_lane ? std::optional<int>(*r.initial_lane + 1) : std::nullopt;
    case Law::E: return right_target(r);
    case Law::G: return r.initial_lane;
    default: return std::nullopt;
  }
}

const VehicleState* find_id(const std::vector<VehicleState>& v, int id) {
  for (const auto& s : v) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

}  // namespace

LawSet committed_violations(const VehicleState& ego, const ViolationReport& r, const RoadModel& road) {
  LawSet out;
  for (Law law : {Law::A, Law::B, Law::C, Law::F}) {
    if (r.current.contains(law)) out.insert(law);
  }
  for (Law law : {Law::D, Law::E, Law::G}) {
    if (!r.current.contains(law)) continue;
    const auto target = lane_change_target(law, r);
    if (target && reaching_lane(ego, road, *target, law == Law::D)) out.insert(law);
  }
  return out;
}

double FrameClassifier::max_recent_decel(int id, double dt) const {
  const auto it = speed_history_.find(id);
  if (it == speed_history_.end()) return 0.0;
  double worst = 0.0;
  const auto& h = it->second;
  for (std::size_t i = 1; i < h.size(); ++i) worst = std::max(worst, (h[i - 1] - h[i]) / dt);
  return worst;
}

bool FrameClassifier::passive_onset(Law law, const Inputs& in) const {
  if (in.first_frame || in.ego_prev == nullptr || in.foreseen_from_start.contains(law)) return true;
  const RoadModel& road = *in.road;
  const ViolationReport& r = *in.report;

  switch (law) {
    case Law::A:
    case Law::B:
      // Speed left its range while a higher-priority law held the channel.
      return in.speed_owner && priority_of(*in.speed_owner) > priority_of(law);
    case Law::C: {
      if (!r.lead_id) return false;
      const bool same_lane = lane_of(in.ego->y, road) == lane_of(in.ego_prev->y, road);
      const bool new_lead = !in.report_prev->lead_id || *in.report_prev->lead_id != *r.lead_id;
      if (same_lane && new_lead) return true;
      const VehicleState* lead = find_id(*in.surroundings, *r.lead_id);
      double decel = max_recent_decel(*r.lead_id, in.dt);
      if (lead) {
        const VehicleState* before = find_id(*in.surroundings_prev, lead->id);
        if (before) decel = std::max(decel, (before->vx - lead->vx) / in.dt);
      }
      return decel > in.a_comf + 1e-9;
    }
    case Law::D:
    case Law::E:
    case Law::G: {
      const auto target = lane_change_target(law, r);
      if (!target || !road.has_lane(*target)) return false;
      const bool from_right = law == Law::D;
      const double line = from_right ? road.lane(*target).y_right : road.lane(*target).y_left;
      if (overlaps_lane_line(*in.ego_prev, line) || lane_of(in.ego_prev->y, road) == *target) return true;
      if (law == Law::G) return false;
      for (const VehicleState& s : *in.surroundings) {
        if (s.x > in.ego->x || lane_of(s.y, road) != *target) continue;
        const VehicleState* before = find_id(*in.surroundings_prev, s.id);
        if (!before || lane_of(before->y, road) != *target) return true;
      }
      return false;
    }
    case Law::F: return false;
  }
  return false;
}

FrameLabel FrameClassifier::classify(const Inputs& in) {
  FrameLabel label;
  label.t = in.t;
  label.laws = in.committed;

  bool any_active = false;
  for (Law law : kAllLaws) {
    auto& episode = episode_passive_[static_cast<std::size_t>(law)];
    if (!in.committed.contains(law)) {
      episode.reset();
      continue;
    }
    if (!episode) episode = passive_onset(law, in);
    any_active = any_active || !*episode;
  }

  if (in.committed.empty()) {
    // Only manoeuvre decisions can be overridden into compliance; speed and
    // following deviations of the reference are not decisions.
    const bool overridden = std::any_of(kManoeuvreLaws.begin(), kManoeuvreLaws.end(),
                                        [&](Law l) { return in.counterfactual.contains(l); });
    label.state = overridden ? FrameState::ComplianceUnderIntervention : FrameState::Compliant;
  } else {
    label.state = any_active ? FrameState::ActiveViolation : FrameState::PassiveViolation;
  }

  // Speed histories for the deceleration test.
  std::map<int, std::vector<double>> next;
  for (const VehicleState& s : *in.surroundings) {
    auto& h = next[s.id];
    const auto it = speed_history_.find(s.id);
    if (it != speed_history_.end()) h = std::move(it->second);
    h.push_back(s.vx);
    if (static_cast<int>(h.size()) > window_ + 1) h.erase(h.begin());
  }
  speed_history_ = std::move(next);
  return label;
}

namespace {

std::optional<IntentKind> scripted_intent(const Scenario& sc, double t) {
  if (!sc.intent_script) return std::nullopt;
  for (const IntentWindow& w : *sc.intent_script) {
    if (t >= w.t_start - 1e-9 && t < w.t_end - 1e-9) return w.kind;
  }
  return IntentKind::None;
}

VehicleState reference_as_ego(const ReferenceTrajectory& ref, double t, const VehicleState& ego_template) {
  VehicleState s = ref.sample(t);
  s.id = ego_template.id;
  s.length = ego_template.length;
  s.width = ego_template.width;
  return s;
}

}  // namespace

SimLog run(const Scenario& sc, const SimConfig& cfg) {
  sc.validate();
  cfg.vehicle.validate();
  MpcConfig mpc_cfg = cfg.mpc;
  mpc_cfg.dt = sc.dt;
  mpc_cfg.validate();
  if (cfg.plant_substeps < 1) throw std::invalid_argument("plant_substeps must be at least 1");

  const RoadModel& road = sc.road;
  const LawThresholds& th = sc.thresholds;
  const int horizon = cfg.monitor_horizon > 0 ? cfg.monitor_horizon : mpc_cfg.Np;
  const int ref_len = std::max(horizon, mpc_cfg.Np) + 1;
  const MonitorConfig mon_cfg{horizon, sc.dt};

  SimLog log;
  log.scenario = sc.name;
  log.seed = sc.seed;
  log.dt = sc.dt;
  log.compliance_enabled = cfg.compliance_enabled;

  std::vector<TrafficVehicle> traffic;
  traffic.reserve(sc.surroundings.size());
  for (const SurroundingSpec& s : sc.surroundings) traffic.emplace_back(s, road);

  VehicleState ego = cfg.compliance_enabled ? sc.ego_init : reference_as_ego(sc.initial_ref, 0.0, sc.ego_init);
  State x = to_model_state(ego);
  Input u_prev = Input::Zero();

  ViolationReport report_prev;
  ViolationReport cf_prev;
  std::optional<Law> speed_owner_prev;
  FrameClassifier classifier(horizon);
  std::vector<VehicleState> surroundings_prev;
  VehicleState ego_prev = ego;
  std::optional<Interval> lat_prev;
  LawSet foreseen;

  const int frames = sc.frame_count();
  log.frames.reserve(static_cast<std::size_t>(frames));
  std::vector<VehicleState> ref_states(static_cast<std::size_t>(ref_len));
  std::vector<ReferenceSample> mpc_ref(static_cast<std::size_t>(mpc_cfg.Np));

  for (int i = 0; i < frames; ++i) {
    const double t = i * sc.dt;
    std::vector<VehicleState> surroundings;
    surroundings.reserve(traffic.size());
    for (const auto& v : traffic) {
      if (auto s = v.state()) surroundings.push_back(*s);
    }
    for (int k = 0; k < ref_len; ++k) {
      ref_states[static_cast<std::size_t>(k)] = reference_as_ego(sc.initial_ref, t + k * sc.dt, sc.ego_init);
    }
    const std::span<const VehicleState> ref_span(ref_states.data(), static_cast<std::size_t>(horizon + 1));

    Intent raw;
    if (auto k = scripted_intent(sc, t)) {
      raw = Intent{*k, t};
    } else {
      raw = detect_intent(ref_states.front(), surroundings, road, th);
      raw.since = t;
    }

    PlanShaping shaping;
    shaping.max_accel = mpc_cfg.max_accel;
    const std::vector<VehicleState> ego_plan = plan_from_reference(ego, ref_span, sc.dt, shaping);
    // With the stack on, the standing speed-range constraint also shapes
    // where the ego will be; the following rule checks that motion too.
    std::vector<VehicleState> held_plan;
    if (cfg.compliance_enabled) {
      if (const auto lane = lane_of(ego.y, road)) {
        shaping.v_min = road.lane(*lane).v_min;
        shaping.v_max = road.lane(*lane).v_max;
        // a lane hold from the last tick still applies
        if (lat_prev) shaping.y_band = std::pair{lat_prev->lo, lat_prev->hi};
        held_plan = plan_from_reference(ego, ref_span, sc.dt, shaping);
      }
    }
    const ViolationReport report =
        monitor_step(ego, surroundings, road, raw, ego_plan, ref_span, t, report_prev, th, mon_cfg, held_plan);
    const ViolationReport cf =
        monitor_step(ref_states.front(), surroundings, road, raw, ref_span.subspan(1), ref_span, t, cf_prev, th, mon_cfg);

    FrameRecord rec;
    rec.t = t;
    rec.ego = ego;
    rec.reference = ref_states.front();
    rec.active = report.active;
    rec.phase = report.phase;
    rec.intent = report.intent.kind;
    rec.stage = report.overtake_stage;
    rec.lead_id = report.lead_id;
    if (report.lead_id) {
      if (const VehicleState* lead = find_id(surroundings, *report.lead_id)) rec.lead_gap = longitudinal_gap(ego, *lead);
    }
    rec.committed = committed_violations(ego, report, road);
    rec.counterfactual = committed_violations(ref_states.front(), cf, road);

    Input u = u_prev;
    if (cfg.compliance_enabled) {
      DirectiveContext ctx;
      ctx.road = road;
      ctx.initial_lane = report.initial_lane;
      ctx.current_lane = lane_of(ego.y, road);
      ctx.overtake_lane = report.overtake_lane;
      ctx.ego_width = ego.width;
      ctx.v_tgt_overtaken = report.overtaken_speed;
      ctx.ego = ego;
      if (report.lead_id) {
        if (const VehicleState* lead = find_id(surroundings, *report.lead_id)) ctx.lead = *lead;
      }
      ctx.timing = cfg.timing;
      ctx.initial_ref_speed = ref_states.front().vx;
      ctx.initial_ref_y = ref_states.front().y;
      const std::vector<ComplianceDirective> directives = generate_directives(report, ctx, th);
      rec.plan = resolve(directives, cfg.priorities);
      lat_prev = rec.plan.lat_ref ? std::optional<Interval>(Interval{*rec.plan.lat_ref, *rec.plan.lat_ref})
                                  : rec.plan.lat_cons;

      for (int k = 0; k < mpc_cfg.Np; ++k) {
        const VehicleState& r = ref_states[static_cast<std::size_t>(k + 1)];
        mpc_ref[static_cast<std::size_t>(k)] = ReferenceSample{r.vx, r.y};
      }
      const MpcResult res = mpc_step(rec.plan, mpc_ref, x, u_prev, mpc_cfg, cfg.vehicle);
      u = res.u;
      rec.mpc = res.diag;
      if (res.diag.fallback) log.diagnostics.push_back(fmt::format("t={:.2f}: solver fallback: {}", t, res.diag.error));
    }
    rec.u = u;

    FrameClassifier::Inputs in;
    in.t = t;
    in.first_frame = i == 0;
    in.ego = &ego;
    in.ego_prev = i == 0 ? nullptr : &ego_prev;
    in.surroundings = &surroundings;
    in.surroundings_prev = &surroundings_prev;
    in.report = &report;
    in.report_prev = &report_prev;
    in.committed = rec.committed;
    in.counterfactual = rec.counterfactual;
    foreseen = i == 0 ? report.active : (foreseen & report.active);
    in.foreseen_from_start = foreseen;
    in.speed_owner = speed_owner_prev;
    if (rec.plan.speed_winner) {
      if (!in.speed_owner || priority_of(*rec.plan.speed_winner) > priority_of(*in.speed_owner))
        in.speed_owner = rec.plan.speed_winner;
    }
    in.road = &road;
    in.a_comf = cfg.timing.a_comf;
    in.dt = sc.dt;
    rec.label = classifier.classify(in);
    log.frames.push_back(rec);

    // Advance the world.
    ego_prev = ego;
    if (cfg.compliance_enabled) {
      const double h = sc.dt / cfg.plant_substeps;
      for (int s = 0; s < cfg.plant_substeps; ++s) x = step_model(x, u, cfg.vehicle, h);
      from_model_state(x, ego);
    } else {
      ego = reference_as_ego(sc.initial_ref, t + sc.dt, sc.ego_init);
      x = to_model_state(ego);
    }
    u_prev = u;
    for (auto& v : traffic) v.advance(sc.dt);
    surroundings_prev = std::move(surroundings);
    report_prev = report;
    cf_prev = cf;
    speed_owner_prev = rec.plan.speed_winner;

    if (i + 1 < frames && !lane_of(ego.y, road)) {
      log.diagnostics.push_back(fmt::format("t={:.2f}: ego left the road at y={:.3f}", t + sc.dt, ego.y));
      log.ended_early = true;
      break;
    }
  }
  return log;
}

}  // namespace hwlaw
