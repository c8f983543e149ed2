#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hwlaw/strategy.hpp"

namespace hwlaw {

enum class LawCategory { Distance, RoadRight, Speed, Behavior };

struct PriorityModel {
  double distance = 4.0;
  double road_right = 3.0;
  double speed = 2.0;
  double behavior = 1.0;

  [[nodiscard]] double base(LawCategory c) const;
  static LawCategory category_of(Law law);
  /// 1 for intent-triggered laws (d..g), 0 for continuously monitored ones.
  static int trigger_flag(Law law);
};

double priority_of(Law law, const PriorityModel& model = {});

struct ResolvedPlan {
  std::optional<double> speed_ref;
  std::optional<Interval> speed_cons;
  std::optional<double> lat_ref;
  std::optional<Interval> lat_cons;
  /// Highest-priority law that shaped each channel.
  std::optional<Law> speed_winner;
  std::optional<Law> lat_winner;
  /// Every law whose directive survived the merge.
  LawSet merged;
  /// Laws whose directive was dropped due to a conflict.
  LawSet dropped;

  [[nodiscard]] bool empty() const { return !speed_ref && !speed_cons && !lat_ref && !lat_cons; }
  friend bool operator==(const ResolvedPlan&, const ResolvedPlan&) = default;
};

/// Merges compatible directives per variable; on conflict the one with the
/// higher priority (ties: law order) is kept. Independent of input order.
ResolvedPlan resolve(std::span<const ComplianceDirective> directives, const PriorityModel& model = {});

}  // namespace hwlaw
