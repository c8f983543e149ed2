#include "hwlaw/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hwlaw {

std::string_view to_string(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::ReplayTrack: return "replay";
    case ReferenceKind::ConstantSpeedLaneCenter: return "constant_speed";
    case ReferenceKind::ScriptedLaneChange: return "scripted";
  }
  return "constant_speed";
}

double smoothstep5(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double smoothstep5_rate(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return 30.0 * s * s * (1.0 - s) * (1.0 - s);
}

ReferenceTrajectory ReferenceTrajectory::constant_speed(double x0, double y, double v) {
  ReferenceTrajectory r = scripted(x0, y, {SpeedKey{0.0, v}}, {});
  r.kind_ = ReferenceKind::ConstantSpeedLaneCenter;
  return r;
}

ReferenceTrajectory ReferenceTrajectory::scripted(double x0, double y0, std::vector<SpeedKey> speeds,
                                                  std::vector<LateralManoeuvre> moves) {
  if (speeds.empty()) throw std::invalid_argument("scripted reference needs at least one speed key");
  for (std::size_t i = 1; i < speeds.size(); ++i) {
    if (!(speeds[i].t > speeds[i - 1].t)) throw std::invalid_argument("speed keys must have increasing times");
  }
  for (const auto& m : moves) {
    if (!(m.duration > 0.0)) throw std::invalid_argument("lane-change duration must be positive");
  }
  std::sort(moves.begin(), moves.end(), [](const auto& a, const auto& b) { return a.t_start < b.t_start; });

  ReferenceTrajectory r;
  r.kind_ = ReferenceKind::ScriptedLaneChange;
  r.x0_ = x0;
  r.y0_ = y0;
  r.speeds_ = std::move(speeds);
  r.moves_ = std::move(moves);
  // Distance travelled from t = 0 to each key.
  const auto& k = r.speeds_;
  r.key_x_.resize(k.size());
  r.key_x_[0] = k[0].v * k[0].t;
  for (std::size_t i = 1; i < k.size(); ++i) {
    r.key_x_[i] = r.key_x_[i - 1] + 0.5 * (k[i - 1].v + k[i].v) * (k[i].t - k[i - 1].t);
  }
  return r;
}

ReferenceTrajectory ReferenceTrajectory::replay(std::vector<TrackSample> samples) {
  if (samples.empty()) throw std::invalid_argument("replay reference needs samples");
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t > samples[i - 1].t)) throw std::invalid_argument("replay samples must have increasing times");
  }
  ReferenceTrajectory r;
  r.kind_ = ReferenceKind::ReplayTrack;
  r.track_ = std::move(samples);
  r.x0_ = r.track_.front().x;
  r.y0_ = r.track_.front().y;
  return r;
}

double ReferenceTrajectory::speed_at(double t) const {
  if (kind_ == ReferenceKind::ReplayTrack) return sample(t).vx;
  const auto& k = speeds_;
  if (t <= k.front().t) return k.front().v;
  if (t >= k.back().t) return k.back().v;
  const auto it = std::upper_bound(k.begin(), k.end(), t, [](double v, const SpeedKey& s) { return v < s.t; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double a = (t - lo.t) / (hi.t - lo.t);
  return lo.v + a * (hi.v - lo.v);
}

double ReferenceTrajectory::position_at(double t) const {
  const auto& k = speeds_;
  if (t <= k.front().t) return x0_ + k.front().v * t;
  if (t >= k.back().t) return x0_ + key_x_.back() + k.back().v * (t - k.back().t);
  const auto it = std::upper_bound(k.begin(), k.end(), t, [](double v, const SpeedKey& s) { return v < s.t; });
  const std::size_t i = static_cast<std::size_t>(it - k.begin()) - 1;
  const double dt = t - k[i].t;
  return x0_ + key_x_[i] + k[i].v * dt + 0.5 * (speed_at(t) - k[i].v) * dt;
}

VehicleState ReferenceTrajectory::sample(double t) const {
  VehicleState s;
  if (kind_ == ReferenceKind::ReplayTrack) {
    const auto& tr = track_;
    const TrackSample* a = nullptr;
    const TrackSample* b = nullptr;
    double w = 0.0;
    if (t <= tr.front().t || tr.size() == 1) {
      const TrackSample& e = t <= tr.front().t ? tr.front() : tr.back();
      s.x = e.x + e.vx * (t - e.t);
      s.y = e.y + e.vy * (t - e.t);
      s.vx = e.vx;
      s.vy = e.vy;
    } else if (t >= tr.back().t) {
      const TrackSample& e = tr.back();
      s.x = e.x + e.vx * (t - e.t);
      s.y = e.y + e.vy * (t - e.t);
      s.vx = e.vx;
      s.vy = e.vy;
    } else {
      const auto it =
          std::upper_bound(tr.begin(), tr.end(), t, [](double v, const TrackSample& p) { return v < p.t; });
      b = &*it;
      a = &*(it - 1);
      w = (t - a->t) / (b->t - a->t);
      s.x = a->x + w * (b->x - a->x);
      s.y = a->y + w * (b->y - a->y);
      s.vx = a->vx + w * (b->vx - a->vx);
      s.vy = a->vy + w * (b->vy - a->vy);
    }
  } else {
    s.x = position_at(t);
    s.vx = speed_at(t);
    double y = y0_;
    double vy = 0.0;
    for (const LateralManoeuvre& m : moves_) {
      const double tau = (t - m.t_start) / m.duration;
      const double dy = m.target_y - y;
      if (tau <= 0.0) break;
      if (tau >= 1.0) {
        y = m.target_y;
        continue;
      }
      vy = dy * smoothstep5_rate(tau) / m.duration;
      y += dy * smoothstep5(tau);
      break;
    }
    s.y = y;
    s.vy = vy;
  }
  s.yaw = s.vx > 0.0 ? std::atan2(s.vy, s.vx) : 0.0;
  return s;
}

TrafficVehicle::TrafficVehicle(const SurroundingSpec& spec, const RoadModel& road) : spec_(spec), state_(spec.init) {
  std::stable_sort(spec_.script.begin(), spec_.script.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  for (const MotionEvent& e : spec_.script) {
    if (e.lane && !road.has_lane(*e.lane)) throw std::invalid_argument("motion script refers to a missing lane");
    event_target_y_.push_back(e.lane ? road.lane(*e.lane).center() : 0.0);
  }
  if (spec_.replay) {
    const VehicleState r = spec_.replay->sample(0.0);
    state_.x = r.x;
    state_.y = r.y;
    state_.vx = r.vx;
    state_.vy = r.vy;
    state_.yaw = r.yaw;
  }
  apply_events();
}

std::optional<VehicleState> TrafficVehicle::state() const {
  if (spec_.replay) {
    const auto& tr = spec_.replay->track();
    constexpr double kEps = 1e-9;
    if (t_ < tr.front().t - kEps || t_ > tr.back().t + kEps) return std::nullopt;
  }
  return state_;
}

void TrafficVehicle::apply_events() {
  while (next_event_ < spec_.script.size() && spec_.script[next_event_].t <= t_ + 1e-9) {
    const MotionEvent& e = spec_.script[next_event_];
    if (e.accel) accel_ = *e.accel;
    if (e.lane) {
      move_ = LateralManoeuvre{e.t, e.duration, event_target_y_[next_event_]};
      move_from_ = state_.y;
    }
    ++next_event_;
  }
}

void TrafficVehicle::advance(double dt) {
  t_ += dt;
  if (spec_.replay) {
    const VehicleState r = spec_.replay->sample(t_);
    state_.x = r.x;
    state_.y = r.y;
    state_.vx = r.vx;
    state_.vy = r.vy;
    state_.yaw = r.yaw;
    return;
  }
  // Exact integration under constant acceleration, stopping at the limits.
  double v0 = state_.vx;
  double a = accel_;
  if ((a < 0.0 && v0 <= spec_.min_speed) || (a > 0.0 && v0 >= spec_.max_speed)) a = 0.0;
  double v1 = v0 + a * dt;
  double dx = 0.0;
  const double limit = a < 0.0 ? spec_.min_speed : spec_.max_speed;
  if ((a < 0.0 && v1 < limit) || (a > 0.0 && v1 > limit)) {
    const double tl = (limit - v0) / a;
    dx = v0 * tl + 0.5 * a * tl * tl + limit * (dt - tl);
    v1 = limit;
  } else {
    dx = v0 * dt + 0.5 * a * dt * dt;
  }
  state_.x += dx;
  state_.vx = v1;

  if (move_) {
    const double tau = (t_ - move_->t_start) / move_->duration;
    const double dy = move_->target_y - move_from_;
    state_.y = move_from_ + dy * smoothstep5(tau);
    state_.vy = dy * smoothstep5_rate(tau) / move_->duration;
    if (tau >= 1.0) {
      state_.y = move_->target_y;
      state_.vy = 0.0;
      move_.reset();
    }
  } else {
    state_.y += state_.vy * dt;
  }
  state_.yaw = state_.vx > 0.0 ? std::atan2(state_.vy, state_.vx) : 0.0;
  apply_events();
}

}  // namespace hwlaw
