#include <gtest/gtest.h>

#include <random>

#include "hwlaw/monitor.hpp"
#include "predicate_oracle.hpp"

using namespace hwlaw;

namespace {

RoadModel two_lanes() { return RoadModel::uniform(2, 3.75, 60 * kKmhToMs, 120 * kKmhToMs); }

VehicleState at(int id, double x, double y, double vx, double vy = 0.0) {
  VehicleState s;
  s.id = id;
  s.x = x;
  s.y = y;
  s.vx = vx;
  s.vy = vy;
  s.length = 4.0;
  return s;
}

LawSet one_step(const VehicleState& ego, std::vector<VehicleState> others, const RoadModel& road,
                const ViolationReport& ctx, double t = 0.0) {
  const std::vector<VehicleState> states{ego};
  const std::vector<std::vector<VehicleState>> per_step{std::move(others)};
  return evaluate_predicates(states, per_step, road, ctx, t, LawThresholds{});
}

std::vector<VehicleState> constant_ref(const VehicleState& ego, double v, int n, double dt) {
  std::vector<VehicleState> out;
  for (int k = 0; k <= n; ++k) {
    VehicleState s = ego;
    s.x += v * k * dt;
    s.vx = v;
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(PredictStates, ConstantVelocity) {
  const auto out = predict_states(at(1, 0, 1.875, 30), {}, 3, 0.1);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_NEAR(out[0].x, 3.0, 1e-12);
  EXPECT_NEAR(out[1].x, 6.0, 1e-12);
  EXPECT_NEAR(out[2].x, 9.0, 1e-12);
  EXPECT_EQ(predict_states(at(1, 0, 1.875, 30), {}, 1, 0.1).size(), 1u);
}

TEST(PredictStates, PlanPassthrough) {
  const std::vector<VehicleState> plan{at(1, 1, 2, 20), at(1, 2, 2.1, 21)};
  const auto out = predict_states(at(1, 0, 1.875, 30), plan, 2, 0.1);
  EXPECT_DOUBLE_EQ(out[0].x, 1.0);
  EXPECT_DOUBLE_EQ(out[1].vx, 21.0);
}

TEST(DetectIntent, Examples) {
  const RoadModel road = two_lanes();
  const LawThresholds th;
  EXPECT_EQ(detect_intent(at(1, 0, 1.875, 25, 0.3), {}, road, th).kind, IntentKind::ChangeLeft);
  EXPECT_EQ(detect_intent(at(1, 0, 1.875, 25, 0.1), {}, road, th).kind, IntentKind::None);
  EXPECT_EQ(detect_intent(at(1, 0, 1.875, 25, -0.3), {}, road, th).kind, IntentKind::ChangeRight);
  // 5 m/s slower lead, TTCX 10 s
  const std::vector<VehicleState> lead{at(2, 54, 1.875, 20)};
  EXPECT_EQ(detect_intent(at(1, 0, 1.875, 25, 0.3), lead, road, th).kind, IntentKind::Overtake);
  const Intent ext{IntentKind::ChangeRight, 3.0};
  const Intent got = detect_intent(at(1, 0, 1.875, 25, 0.3), lead, road, th, ext);
  EXPECT_EQ(got.kind, IntentKind::ChangeRight);
  EXPECT_EQ(got.since, 3.0);
}

TEST(Predicates, Examples) {
  const RoadModel road = two_lanes();
  ViolationReport ctx;
  // 29 m/s is above 100 km/h: 100 m rule
  EXPECT_EQ(one_step(at(1, 0, 1.875, 29), {at(2, 94, 1.875, 29)}, road, ctx), LawSet{Law::C});
  EXPECT_TRUE(one_step(at(1, 0, 1.875, 25), {at(2, 64, 1.875, 25)}, road, ctx).empty());
  // exactly 100 m does not violate
  EXPECT_TRUE(one_step(at(1, 0, 1.875, 29), {at(2, 104, 1.875, 29)}, road, ctx).empty());

  ctx.intent = {IntentKind::ChangeLeft, 0.0};
  ctx.initial_lane = 0;
  EXPECT_EQ(one_step(at(1, 0, 1.875, 25), {at(2, -16, 5.625, 25)}, road, ctx), LawSet{Law::D});

  ViolationReport line;
  line.intent = {IntentKind::ChangeLeft, 0.0};
  line.initial_lane = 0;
  line.line_enter_time = 0.0;
  EXPECT_EQ(one_step(at(1, 0, 3.75, 25), {}, road, line, 6.5), LawSet{Law::F});
  EXPECT_TRUE(one_step(at(1, 0, 3.75, 25), {}, road, line, 5.5).empty());
}

TEST(Predicates, GappedOvertakeReturn) {
  const RoadModel road = two_lanes();
  ViolationReport ctx;
  ctx.intent = {IntentKind::Overtake, 0.0};
  ctx.initial_lane = 0;
  ctx.overtake_lane = 1;
  ctx.overtaken_speed = 15.0;
  ctx.overtake_stage = OvertakeStage::Passing;
  EXPECT_TRUE(one_step(at(1, 0, 5.625, 25), {}, road, ctx).empty());
  ctx.overtake_stage = OvertakeStage::Returning;
  EXPECT_EQ(one_step(at(1, 0, 5.625, 25), {}, road, ctx), LawSet{Law::G});
  EXPECT_TRUE(one_step(at(1, 0, 5.625, 30), {}, road, ctx).empty());
  // e checks the original lane on the way back
  EXPECT_EQ(one_step(at(1, 0, 5.625, 30), {at(2, -10, 1.875, 30)}, road, ctx), LawSet{Law::E});
}

TEST(Predicates, OracleAgreement) {
  std::mt19937_64 rng(2024);
  std::array<int, 7> positives{};
  for (int i = 0; i < 20000; ++i) {
    const hwlaw::testing::PredicateCase c = hwlaw::testing::random_predicate_case(rng);
    const LawSet want = hwlaw::testing::oracle_predicates(c);
    ASSERT_EQ(hwlaw::testing::evaluate(c), want) << "case " << i;
    for (Law l : want.to_vector()) ++positives[static_cast<std::size_t>(l)];
  }
  // every expression is exercised both ways
  for (int p : positives) {
    EXPECT_GT(p, 500);
    EXPECT_LT(p, 19500);
  }
}

TEST(Predicates, NoTriggerWithoutIntent) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    hwlaw::testing::PredicateCase c = hwlaw::testing::random_predicate_case(rng);
    c.context.intent = {};
    c.context.overtake_stage = OvertakeStage::None;
    const LawSet got = hwlaw::testing::evaluate(c);
    for (Law l : {Law::D, Law::E, Law::F, Law::G}) ASSERT_FALSE(got.contains(l));
  }
}

TEST(MonitorStep, SpeedPhases) {
  RoadModel road = two_lanes();
  for (Lane& l : road.lanes) l.v_min = 22.0;
  const LawThresholds th;
  const MonitorConfig cfg{30, 0.05};
  auto phase = [&](double v, double ref) {
    const VehicleState ego = at(1, 0, 1.875, v);
    const auto refs = constant_ref(ego, ref, cfg.horizon, cfg.dt);
    PlanShaping shaping;
    shaping.max_accel = 4.0;
    const auto plan = plan_from_reference(ego, refs, cfg.dt, shaping);
    return monitor_step(ego, {}, road, {}, plan, refs, 0.0, {}, th, cfg).phase_of(Law::A);
  };
  EXPECT_EQ(phase(20.0, 21.0), Phase::Violation);
  EXPECT_EQ(phase(22.5, 21.0), Phase::DecisionViolation);
  EXPECT_EQ(phase(23.0, 23.0), Phase::Compliance);
}

TEST(MonitorStep, LineTimerIsMonotone) {
  const RoadModel road = two_lanes();
  const LawThresholds th;
  const MonitorConfig cfg{1, 0.05};
  ViolationReport r;
  const Intent intent{IntentKind::ChangeLeft, 0.0};
  std::optional<double> first_f;
  for (int i = 0; i < 200; ++i) {
    const double t = i * 0.05;
    VehicleState ego = at(1, 25.0 * t, i < 10 ? 1.875 : 3.75, 25);
    r = monitor_step(ego, {}, road, intent, {}, {}, t, r, th, cfg);
    if (i >= 10) {
      ASSERT_TRUE(r.line_enter_time);
      EXPECT_DOUBLE_EQ(*r.line_enter_time, 0.5);
    } else {
      EXPECT_FALSE(r.line_enter_time);
    }
    if (r.current.contains(Law::F)) {
      EXPECT_GT(t - *r.line_enter_time, th.t_max_cl);
      if (!first_f) first_f = t;
    } else {
      EXPECT_LE(t - r.line_enter_time.value_or(t), th.t_max_cl + 1e-12);
    }
  }
  ASSERT_TRUE(first_f);
  int expect = 10;
  while (!(expect * 0.05 - 10 * 0.05 > th.t_max_cl)) ++expect;
  EXPECT_DOUBLE_EQ(*first_f, expect * 0.05);
}

TEST(MonitorStep, SpeedLawsExclusiveAndDecisionReachability) {
  const LawThresholds th;
  const MonitorConfig cfg{30, 0.05};
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RoadModel road = RoadModel::uniform(1, 3.75, 20.0, 30.0);
  for (int walk = 0; walk < 200; ++walk) {
    ViolationReport r;
    double v = 15.0 + 20.0 * u(rng);
    for (int i = 0; i < 50; ++i) {
      v = std::max(0.0, v + 4.0 * (u(rng) - 0.5));
      const double ref = u(rng) < 0.5 ? 20.0 + 10.0 * u(rng) : 10.0 + 30.0 * u(rng);
      const VehicleState ego = at(1, 0, 1.875, v);
      const auto refs = constant_ref(ego, ref, cfg.horizon, cfg.dt);
      PlanShaping shaping;
      shaping.max_accel = 4.0;
      const auto plan = plan_from_reference(ego, refs, cfg.dt, shaping);
      const Phase before = r.phase_of(Law::A);
      r = monitor_step(ego, {}, road, {}, plan, refs, i * cfg.dt, r, th, cfg);
      ASSERT_FALSE(r.active.contains(Law::A) && r.active.contains(Law::B));
      ASSERT_FALSE(r.current.contains(Law::A) && r.current.contains(Law::B));
      const bool ref_ok = ref >= 20.0 && ref <= 30.0;
      if (before == Phase::Compliance && ref_ok) {
        ASSERT_NE(r.phase_of(Law::A), Phase::DecisionViolation);
      }
      if (r.phase_of(Law::A) == Phase::DecisionViolation) {
        ASSERT_FALSE(r.current.contains(Law::A));
      }
    }
  }
}

TEST(MonitorStep, NoLaneLawsWithoutIntent) {
  const LawThresholds th;
  const MonitorConfig cfg{10, 0.05};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const RoadModel road = RoadModel::uniform(3, 3.75, 15, 35);
  for (int i = 0; i < 2000; ++i) {
    const VehicleState ego = at(1, 0, 11.25 * u(rng), 15 + 20 * u(rng), 0.2 * (u(rng) - 0.5));
    std::vector<VehicleState> others;
    for (int k = 0; k < 4; ++k) others.push_back(at(2 + k, -30 + 90 * u(rng), 11.25 * u(rng), 15 + 20 * u(rng)));
    ViolationReport prev;
    prev.line_enter_time = -20.0;
    const auto r = monitor_step(ego, others, road, {}, {}, {}, 0.0, prev, th, cfg);
    for (Law l : {Law::D, Law::E, Law::F, Law::G}) ASSERT_FALSE(r.active.contains(l));
  }
}

TEST(MonitorStep, OvertakeStages) {
  const RoadModel road = two_lanes();
  const LawThresholds th;
  const MonitorConfig cfg{1, 0.05};
  const std::vector<VehicleState> truck{at(2, 60, 1.875, 15)};
  ViolationReport r;
  auto ref_at = [](double y, double vy) { return std::vector<VehicleState>{at(1, 0, y, 25, vy)}; };
  r = monitor_step(at(1, 0, 1.875, 25, 0.5), truck, road, {IntentKind::Overtake, 0}, {}, ref_at(2.0, 0.5), 0, r, th,
                   cfg);
  EXPECT_EQ(r.overtake_stage, OvertakeStage::ChangingLeft);
  ASSERT_TRUE(r.overtaken_speed);
  EXPECT_DOUBLE_EQ(*r.overtaken_speed, 15.0);
  r = monitor_step(at(1, 0, 5.625, 25), truck, road, {IntentKind::Overtake, 0}, {}, ref_at(5.625, 0), 1, r, th, cfg);
  EXPECT_EQ(r.overtake_stage, OvertakeStage::Passing);
  EXPECT_EQ(r.overtake_lane, 1);
  r = monitor_step(at(1, 0, 5.625, 25), truck, road, {IntentKind::Overtake, 0}, {}, ref_at(5.0, -0.5), 2, r, th, cfg);
  EXPECT_EQ(r.overtake_stage, OvertakeStage::Returning);
  EXPECT_TRUE(r.active.contains(Law::G));
  EXPECT_FALSE(r.return_cleared);
  r = monitor_step(at(1, 0, 5.625, 30.0), truck, road, {IntentKind::Overtake, 0}, {}, ref_at(4.0, -0.5), 3, r, th,
                   cfg);
  EXPECT_TRUE(r.return_cleared);
  EXPECT_FALSE(r.active.contains(Law::G));
  r = monitor_step(at(1, 0, 1.875, 30.0), truck, road, {}, {}, ref_at(1.875, 0), 4, r, th, cfg);
  EXPECT_EQ(r.intent.kind, IntentKind::None);
  EXPECT_FALSE(r.return_cleared);
}

TEST(MonitorStep, LeadDriftingOutStillCounts) {
  // lead 52 m ahead, 1.5 m/s slower, sliding towards the right lane
  const RoadModel road = two_lanes();
  const LawThresholds th;
  const MonitorConfig cfg{30, 0.05};
  const VehicleState ego = at(1, 0, 5.625, 17.7);
  const auto refs = constant_ref(ego, 17.7, cfg.horizon, cfg.dt);
  const auto plan = std::vector<VehicleState>(refs.begin() + 1, refs.end());
  auto active = [&](double lead_vy) {
    const std::vector<VehicleState> others{at(2, 56.0, 5.2, 16.2, lead_vy)};
    return monitor_step(ego, others, road, {}, plan, refs, 0.0, {}, th, cfg).active.contains(Law::C);
  };
  EXPECT_TRUE(active(0.0));
  // constant-velocity extrapolation alone would see it leave within 1 s
  EXPECT_TRUE(active(-1.8));
  // a lead already past the line is not followed
  const std::vector<VehicleState> gone{at(2, 56.0, 3.5, 16.2, -1.8)};
  EXPECT_FALSE(monitor_step(ego, gone, road, {}, plan, refs, 0.0, {}, th, cfg).active.contains(Law::C));
}
