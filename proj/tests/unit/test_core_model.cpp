#include <gtest/gtest.h>

#include <random>

#include "hwlaw/core_model.hpp"

using namespace hwlaw;

namespace {

VehicleState car(double x, double vx = 0.0, double length = 4.0) {
  VehicleState s;
  s.x = x;
  s.vx = vx;
  s.length = length;
  return s;
}

}  // namespace

TEST(Gap, Examples) {
  EXPECT_DOUBLE_EQ(longitudinal_gap(car(0), car(50)), 46.0);
  EXPECT_DOUBLE_EQ(longitudinal_gap(car(0), car(0)), -4.0);
  EXPECT_DOUBLE_EQ(longitudinal_gap(car(0), car(104)), 100.0);
}

TEST(Gap, BothDirections) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const VehicleState a = car(u(rng), 0.0, 3.0 + std::abs(u(rng)) / 20.0);
    const VehicleState b = car(u(rng), 0.0, 3.0 + std::abs(u(rng)) / 20.0);
    const double L = 0.5 * (a.length + b.length);
    EXPECT_NEAR(longitudinal_gap(a, b), (b.x - a.x) - L, 1e-12);
    EXPECT_NEAR(longitudinal_gap(b, a), (a.x - b.x) - L, 1e-12);
  }
}

TEST(Ttcx, Examples) {
  const auto t = ttcx(car(0, 30), car(50, 10));
  ASSERT_TRUE(t);
  EXPECT_NEAR(*t, 2.3, 1e-12);
  EXPECT_FALSE(ttcx(car(0, 20), car(50, 20)));
  EXPECT_FALSE(ttcx(car(0, 10), car(50, 20)));
}

TEST(Ttcx, GapClosesAtTtc) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    VehicleState rear = car(0.0, 20.0 + 20.0 * u(rng));
    VehicleState front = car(10.0 + 100.0 * u(rng), 5.0 + 15.0 * u(rng));
    const auto t = ttcx(rear, front);
    ASSERT_TRUE(t);
    rear = propagate_constant_velocity(rear, *t);
    front = propagate_constant_velocity(front, *t);
    EXPECT_NEAR(longitudinal_gap(rear, front), 0.0, 1e-9);
  }
}

TEST(LaneOf, Examples) {
  const RoadModel road = RoadModel::uniform(3, 3.75, 20, 30);
  EXPECT_EQ(lane_of(1.875, road), 0);
  EXPECT_EQ(lane_of(5.625, road), 1);
  EXPECT_EQ(lane_of(3.75, road), 1);  // shared line goes left
  EXPECT_EQ(lane_of(-0.1, road), std::nullopt);
  EXPECT_EQ(lane_of(11.25, road), std::nullopt);
}

TEST(LaneOf, Partition) {
  const RoadModel road = RoadModel::uniform(4, 3.5, 20, 30);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 14.0);
  for (int i = 0; i < 10000; ++i) {
    const double y = u(rng);
    int hits = 0;
    for (const Lane& l : road.lanes) hits += (y >= l.y_right && y < l.y_left) ? 1 : 0;
    ASSERT_EQ(hits, 1);
    ASSERT_TRUE(lane_of(y, road));
    const Lane& l = road.lane(*lane_of(y, road));
    EXPECT_TRUE(y >= l.y_right && y < l.y_left);
  }
}

TEST(LineOverlap, Examples) {
  VehicleState e;
  e.width = 1.8;
  e.y = 3.75;
  EXPECT_TRUE(overlaps_lane_line(e, 3.75));
  e.y = 3.75 + 0.9;
  EXPECT_FALSE(overlaps_lane_line(e, 3.75));
  e.y = 3.75 + 3.75;
  EXPECT_FALSE(overlaps_lane_line(e, 3.75));
}

TEST(RoadModel, Validation) {
  RoadModel road = RoadModel::uniform(2, 3.75, 20, 30);
  EXPECT_NO_THROW(road.validate());
  road.lanes[1].y_right = 4.0;
  EXPECT_THROW(road.validate(), std::invalid_argument);
  road = RoadModel::uniform(2, 3.75, 30, 20);
  EXPECT_THROW(road.validate(), std::invalid_argument);
}

TEST(Thresholds, DefaultsAndValidation) {
  LawThresholds th;
  EXPECT_NO_THROW(th.validate());
  EXPECT_NEAR(th.follow_speed_break, 27.7778, 1e-4);
  EXPECT_DOUBLE_EQ(th.follow_distance(29.0), 100.0);
  EXPECT_DOUBLE_EQ(th.follow_distance(25.0), 50.0);
  th.follow_dist_slow = 120.0;
  EXPECT_THROW(th.validate(), std::invalid_argument);
  th = {};
  th.d_clmin = 0.0;
  EXPECT_THROW(th.validate(), std::invalid_argument);
}

TEST(LawSet, Basics) {
  LawSet s = LawSet::from_string("acg");
  EXPECT_EQ(s.size(), 3);
  EXPECT_EQ(s.to_string(), "acg");
  EXPECT_TRUE(s.contains(Law::C));
  s.erase(Law::C);
  EXPECT_EQ(s.to_string(), "ag");
  EXPECT_EQ((s & LawSet{Law::G, Law::B}).to_string(), "g");
  EXPECT_THROW(LawSet::from_string("x"), std::invalid_argument);
}
