#include "hwlaw/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hwlaw {

std::string_view to_string(DirectiveVariable v) {
  return v == DirectiveVariable::Speed ? "speed" : "lateral";
}

unsigned ComplianceDirective::paths() const {
  unsigned p = 0;
  if (variable == DirectiveVariable::Speed) {
    if (reference) p |= kPathSpeedRef;
    if (constraint) p |= kPathSpeedCons;
  } else {
    if (reference) p |= kPathLatRef;
    if (constraint) p |= kPathLatCons;
  }
  return p;
}

double following_reference_speed(const FollowingGapContext& ctx) {
  if (!(ctx.t2 > 0.0)) throw std::invalid_argument("t2 must be positive");
  const double v = -ctx.t1 * (ctx.v0_ego - ctx.v0_tgt) / ctx.t2 - 2.0 * (ctx.D - ctx.x0_tgt + ctx.x0_ego) / ctx.t2 +
                   ctx.v0_tgt;
  return std::max(v, 0.0);
}

FollowingGapContext make_following_context(const VehicleState& ego, const VehicleState& lead, double D,
                                           const GapTiming& timing) {
  FollowingGapContext ctx;
  ctx.v0_ego = ego.vx;
  ctx.v0_tgt = lead.vx;
  ctx.x0_ego = ego.x + 0.5 * ego.length;
  ctx.x0_tgt = lead.x - 0.5 * lead.length;
  ctx.D = D;

  // t1: time to shed the speed difference. t2: time for the decelerating
  // ego to open the gap to D (distance covered by the closing phase plus the
  // shortfall, at the comfort rate). Floor of one second.
  const double closing = std::max(ctx.v0_ego - ctx.v0_tgt, 0.0);
  const double shortfall = std::max(D - (ctx.x0_tgt - ctx.x0_ego), 0.0);
  const double t1 = timing.t1.value_or(closing / timing.a_comf);
  const double derived_t2 = std::sqrt(2.0 * (0.5 * t1 * closing + shortfall) / timing.a_comf);
  ctx.t1 = t1;
  ctx.t2 = timing.t2.value_or(std::max({t1 + 1e-3, derived_t2, 1.0}));
  return ctx;
}

namespace {

constexpr double kBreakLookahead = 2.0;  // s
constexpr double kBreakSpeedMargin = 0.5;  // m/s below the distance-rule speed break

double centerline(const RoadModel& road, int lane) { return road.lane(lane).center(); }

Interval lane_interval(const RoadModel& road, int lo_lane, int hi_lane, double width) {
  return Interval{road.lane(lo_lane).y_right + 0.5 * width, road.lane(hi_lane).y_left - 0.5 * width};
}

int require(const std::optional<int>& lane, const RoadModel& road, const char* what) {
  if (!lane || !road.has_lane(*lane)) throw std::invalid_argument(std::string("missing ") + what);
  return *lane;
}

ComplianceDirective speed(Law law, std::optional<double> ref, std::optional<Interval> cons) {
  return ComplianceDirective{DirectiveVariable::Speed, ref, cons, law};
}

ComplianceDirective lateral(Law law, std::optional<double> ref, std::optional<Interval> cons) {
  return ComplianceDirective{DirectiveVariable::LateralPosition, ref, cons, law};
}

// Lane-keeping directive towards `ref_lane`. The constraint spans every lane
// between it and the current lane so the reference always lies inside.
ComplianceDirective hold_lane(Law law, const DirectiveContext& ctx, int ref_lane) {
  const int current = require(ctx.current_lane, ctx.road, "current lane");
  const int lo = std::min(ref_lane, current);
  const int hi = std::max(ref_lane, current);
  return lateral(law, centerline(ctx.road, ref_lane), lane_interval(ctx.road, lo, hi, ctx.ego_width));
}

}  // namespace

std::vector<ComplianceDirective> generate_directives(const ViolationReport& report, const DirectiveContext& ctx,
                                                     const LawThresholds& th) {
  std::vector<ComplianceDirective> out;
  if (!ctx.current_lane || !ctx.road.has_lane(*ctx.current_lane)) return out;
  const Lane& lane = ctx.road.lane(*ctx.current_lane);
  const Interval legal{lane.v_min, lane.v_max};

  // A decision violation found in another lane means the planned lane
  // change would break that lane's range: aim for the stricter bound and
  // stay in lane until the speed fits.
  const int other_lane = report.speed_violation_lane.value_or(-1);
  const bool other_lane_set = other_lane != *ctx.current_lane && ctx.road.has_lane(other_lane);
  auto speed_limit = [&](Law law, double bound) {
    switch (report.phase_of(law)) {
      case Phase::Violation: out.push_back(speed(law, bound, std::nullopt)); break;
      case Phase::DecisionViolation:
        if (other_lane_set) {
          const Lane& next = ctx.road.lane(other_lane);
          const double stricter = law == Law::A ? std::max(bound, next.v_min) : std::min(bound, next.v_max);
          out.push_back(speed(law, std::clamp(stricter, legal.lo, legal.hi), legal));
          out.push_back(hold_lane(law, ctx, *ctx.current_lane));
        } else {
          out.push_back(speed(law, bound, legal));
        }
        break;
      case Phase::Compliance: out.push_back(speed(law, std::nullopt, legal)); break;
    }
  };
  speed_limit(Law::A, lane.v_min);
  speed_limit(Law::B, lane.v_max);

  const LawSet& active = report.active;
  if (active.contains(Law::C)) {
    const int initial = require(ctx.initial_lane, ctx.road, "initial lane for following distance");
    if (ctx.ego && ctx.lead) {
      const double D = report.follow_exit_gap.value_or(th.follow_distance(ctx.ego->vx));
      const double v = following_reference_speed(make_following_context(*ctx.ego, *ctx.lead, D, ctx.timing));
      // Never faster than the planner asked for, and never fast enough for
      // the present gap to fall short of the speed-dependent distance.
      double capped = std::min(v, ctx.initial_ref_speed);
      const double gap_ahead =
          longitudinal_gap(*ctx.ego, *ctx.lead) + kBreakLookahead * std::min(0.0, ctx.lead->vx - ctx.ego->vx);
      if (gap_ahead < th.follow_dist_fast) {
        capped = std::min(capped, th.follow_speed_break - kBreakSpeedMargin);
      }
      out.push_back(speed(Law::C, std::clamp(capped, 0.0, lane.v_max), std::nullopt));
    }
    out.push_back(hold_lane(Law::C, ctx, initial));
  }
  if (active.contains(Law::D)) {
    const int initial = require(ctx.initial_lane, ctx.road, "initial lane for left change");
    out.push_back(hold_lane(Law::D, ctx, initial));
  }
  if (active.contains(Law::E)) {
    out.push_back(hold_lane(Law::E, ctx, *ctx.current_lane));
  }
  if (active.contains(Law::F)) {
    out.push_back(lateral(Law::F, centerline(ctx.road, *ctx.current_lane), std::nullopt));
  }
  if (active.contains(Law::G)) {
    const int lane_ot = require(ctx.overtake_lane, ctx.road, "overtake lane");
    if (ctx.v_tgt_overtaken) {
      const double v = std::clamp(*ctx.v_tgt_overtaken + th.dv_ot, 0.0, lane.v_max);
      out.push_back(speed(Law::G, v, std::nullopt));
    }
    out.push_back(hold_lane(Law::G, ctx, lane_ot));
  } else if (report.return_cleared && ctx.v_tgt_overtaken) {
    const double floor = std::min(*ctx.v_tgt_overtaken + th.dv_ot, lane.v_max);
    out.push_back(speed(Law::G, std::nullopt, Interval{floor, lane.v_max}));
  }
  return out;
}

}  // namespace hwlaw
