#include "hwlaw/arbiter.hpp"

#include <algorithm>
#include <cmath>

namespace hwlaw {

double PriorityModel::base(LawCategory c) const {
  switch (c) {
    case LawCategory::Distance: return distance;
    case LawCategory::RoadRight: return road_right;
    case LawCategory::Speed: return speed;
    case LawCategory::Behavior: return behavior;
  }
  return 0.0;
}

LawCategory PriorityModel::category_of(Law law) {
  switch (law) {
    case Law::A:
    case Law::B:
    case Law::G: return LawCategory::Speed;
    case Law::C: return LawCategory::Distance;
    case Law::D:
    case Law::E: return LawCategory::RoadRight;
    case Law::F: return LawCategory::Behavior;
  }
  return LawCategory::Behavior;
}

int PriorityModel::trigger_flag(Law law) {
  return (law == Law::A || law == Law::B || law == Law::C) ? 0 : 1;
}

double priority_of(Law law, const PriorityModel& model) {
  return model.base(PriorityModel::category_of(law)) * std::exp(-0.5 * PriorityModel::trigger_flag(law));
}

namespace {

constexpr double kRefTol = 1e-9;

struct Channel {
  std::optional<double> ref;
  std::optional<Interval> cons;
  std::optional<Law> winner;
};

bool conflicts(const Channel& acc, const ComplianceDirective& d) {
  if (acc.ref && d.reference && std::abs(*acc.ref - *d.reference) > kRefTol) return true;
  if (acc.cons && d.constraint) {
    const Interval both{std::max(acc.cons->lo, d.constraint->lo), std::min(acc.cons->hi, d.constraint->hi)};
    if (both.empty()) return true;
  }
  if (d.reference && acc.cons && !acc.cons->contains(*d.reference)) return true;
  if (acc.ref && d.constraint && !d.constraint->contains(*acc.ref)) return true;
  return false;
}

void merge(Channel& acc, const ComplianceDirective& d) {
  if (!acc.ref && d.reference) acc.ref = d.reference;
  if (d.constraint) {
    if (acc.cons) {
      acc.cons = Interval{std::max(acc.cons->lo, d.constraint->lo), std::min(acc.cons->hi, d.constraint->hi)};
    } else {
      acc.cons = d.constraint;
    }
  }
  if (!acc.winner) acc.winner = d.source;
}

}  // namespace

ResolvedPlan resolve(std::span<const ComplianceDirective> directives, const PriorityModel& model) {
  std::vector<const ComplianceDirective*> order;
  order.reserve(directives.size());
  for (const auto& d : directives) order.push_back(&d);

  // Full key so the outcome does not depend on input order.
  auto key = [&](const ComplianceDirective* d) {
    return std::make_tuple(-priority_of(d->source, model), static_cast<int>(d->source),
                           static_cast<int>(d->variable), d->reference.value_or(0.0), d->reference.has_value(),
                           d->constraint ? d->constraint->lo : 0.0, d->constraint ? d->constraint->hi : 0.0);
  };
  std::stable_sort(order.begin(), order.end(), [&](auto* a, auto* b) { return key(a) < key(b); });

  Channel speed;
  Channel lat;
  ResolvedPlan plan;
  for (const ComplianceDirective* d : order) {
    Channel& ch = d->variable == DirectiveVariable::Speed ? speed : lat;
    if (conflicts(ch, *d)) {
      plan.dropped.insert(d->source);
      continue;
    }
    merge(ch, *d);
    plan.merged.insert(d->source);
  }
  plan.speed_ref = speed.ref;
  plan.speed_cons = speed.cons;
  plan.speed_winner = speed.winner;
  plan.lat_ref = lat.ref;
  plan.lat_cons = lat.cons;
  plan.lat_winner = lat.winner;
  return plan;
}

}  // namespace hwlaw
