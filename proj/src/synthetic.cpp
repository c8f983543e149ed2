#include "hwlaw/synthetic.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "hwlaw/reference.hpp"

namespace hwlaw {

namespace {

constexpr int kLanes = 3;
constexpr double kLaneWidth = 3.75;
constexpr double kMaxRawAccel = 0.6;  // 1.2 m/s^2 after scaling
constexpr double kClearance = 4.0;

// Piecewise-linear lane speed with bounded slope.
struct SpeedProfile {
  std::vector<double> t;
  std::vector<double> v;

  [[nodiscard]] double at(double time) const {
    if (time <= t.front()) return v.front();
    if (time >= t.back()) return v.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double s = (time - t[i - 1]) / (t[i] - t[i - 1]);
    return v[i - 1] + s * (v[i] - v[i - 1]);
  }
};

SpeedProfile make_profile(std::mt19937_64& rng, double mean, double spread, double duration) {
  std::uniform_real_distribution<double> dv(-spread, spread);
  std::uniform_real_distribution<double> hold(4.0, 8.0);
  SpeedProfile p;
  double t = 0.0;
  double v = mean + dv(rng);
  p.t.push_back(t);
  p.v.push_back(v);
  while (t < duration) {
    const double next = mean + dv(rng);
    const double ramp = std::abs(next - v) / kMaxRawAccel;
    t += ramp;
    p.t.push_back(t);
    p.v.push_back(next);
    t += hold(rng);
    p.t.push_back(t);
    p.v.push_back(next);
    v = next;
  }
  return p;
}

struct Plan {
  int id = 0;
  int lane = 0;
  double x0 = 0.0;
  double length = 4.5;
  double width = 1.8;
  double osc_amp = 0.0;
  double osc_omega = 0.0;
  double osc_phase = 0.0;
  std::optional<int> target_lane;
  double change_start = 0.0;
  double change_duration = 4.0;
  bool hesitant = false;  ///< pauses astride the line halfway through
};

// Lateral progress in [0, 1]. A hesitant change stops astride the line,
// centre still in the source lane, for the middle half of the manoeuvre.
constexpr double kPause = 0.4;

double lateral_progress(double s, bool hesitant) {
  if (!hesitant) return smoothstep5(s);
  if (s < 0.25) return kPause * smoothstep5(s / 0.25);
  if (s < 0.75) return kPause;
  return kPause + (1.0 - kPause) * smoothstep5((s - 0.75) / 0.25);
}

double lateral_progress_rate(double s, bool hesitant) {
  if (!hesitant) return smoothstep5_rate(s);
  if (s < 0.25) return kPause * smoothstep5_rate(s / 0.25) / 0.25;
  if (s < 0.75) return 0.0;
  return (1.0 - kPause) * smoothstep5_rate((s - 0.75) / 0.25) / 0.25;
}

}  // namespace

TrackFile generate_synthetic(const SyntheticOptions& opt) {
  if (!(opt.duration > 0.0 && opt.frame_rate > 0.0) || opt.vehicles_per_lane < 1) {
    throw std::invalid_argument("synthetic generator needs positive duration, frame rate and vehicle count");
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  TrackFile tf;
  tf.meta.frame_rate = opt.frame_rate;
  for (int i = 0; i <= kLanes; ++i) tf.meta.lane_lines.push_back(i * kLaneWidth);
  tf.meta.speed_limits = {{60.0 * kKmhToMs, 100.0 * kKmhToMs},
                          {60.0 * kKmhToMs, 120.0 * kKmhToMs},
                          {90.0 * kKmhToMs, 120.0 * kKmhToMs}};
  tf.meta.lane_ids = {4, 3, 2};
  const RoadModel road = tf.meta.road();

  // Raw lane means; doubled they span roughly 50 to 110 km/h.
  const std::array<double, kLanes> mean = {uni(7.5, 10.0), uni(9.5, 12.5), uni(12.0, 14.5)};
  std::array<SpeedProfile, kLanes> profile;
  for (int l = 0; l < kLanes; ++l) {
    profile[static_cast<std::size_t>(l)] =
        opt.compliant ? SpeedProfile{{0.0}, {12.0}} : make_profile(rng, mean[static_cast<std::size_t>(l)], 1.5,
                                                                    opt.duration + 1.0);
  }

  std::vector<Plan> plans;
  int next_id = 1;
  for (int l = 0; l < kLanes; ++l) {
    if (opt.compliant && l != 1) continue;
    double x = uni(0.0, 20.0);
    for (int k = 0; k < opt.vehicles_per_lane; ++k) {
      Plan p;
      p.id = next_id++;
      p.lane = l;
      p.x0 = x;
      p.length = uni(4.2, 5.0);
      p.width = uni(1.7, 1.95);
      if (!opt.compliant) {
        const double period = uni(8.0, 16.0);
        p.osc_omega = 2.0 * std::numbers::pi / period;
        p.osc_amp = std::min(uni(0.0, 4.0), 0.3 / (p.osc_omega * p.osc_omega));
        p.osc_phase = uni(0.0, 2.0 * std::numbers::pi);
        if (unit(rng) < opt.lane_change_prob) {
          const int dir = l == 0 ? 1 : l == kLanes - 1 ? -1 : (unit(rng) < 0.5 ? -1 : 1);
          p.target_lane = l + dir;
          p.hesitant = unit(rng) < opt.slow_change_prob;
          p.change_duration = p.hesitant ? uni(11.0, 14.0) : uni(3.0, 5.0);
          p.change_start = uni(3.0, std::max(3.5, opt.duration - p.change_duration - 3.0));
        }
      }
      plans.push_back(p);
      x += opt.compliant ? uni(45.0, 60.0) : uni(14.0, 40.0);
    }
  }

  const int frames = static_cast<int>(std::floor(opt.duration * opt.frame_rate + 1e-9));
  const double dt = 1.0 / opt.frame_rate;
  auto trajectory = [&](const Plan& p) {
    std::vector<TrackRecord> rows;
    rows.reserve(static_cast<std::size_t>(frames));
    const double y_src = road.lane(p.lane).center();
    const double y_dst = p.target_lane ? road.lane(*p.target_lane).center() : y_src;
    auto blend = [&](double t) {
      if (!p.target_lane) return 0.0;
      return std::clamp((t - p.change_start) / p.change_duration, 0.0, 1.0);
    };
    auto base_speed = [&](double t) {
      const double s = lateral_progress(blend(t), p.hesitant);
      const double v_src = profile[static_cast<std::size_t>(p.lane)].at(t);
      const double v_dst = p.target_lane ? profile[static_cast<std::size_t>(*p.target_lane)].at(t) : v_src;
      return (1.0 - s) * v_src + s * v_dst;
    };

    double x_base = p.x0;
    for (int f = 0; f < frames; ++f) {
      const double t = f * dt;
      if (f > 0) x_base += 0.5 * (base_speed(t - dt) + base_speed(t)) * dt;
      const double osc = p.osc_amp * std::sin(p.osc_omega * t + p.osc_phase);
      const double osc_rate = p.osc_amp * p.osc_omega * std::cos(p.osc_omega * t + p.osc_phase);
      const double s = blend(t);
      const double y = y_src + (y_dst - y_src) * lateral_progress(s, p.hesitant);
      const double vy = p.target_lane && s > 0.0 && s < 1.0
                            ? (y_dst - y_src) * lateral_progress_rate(s, p.hesitant) / p.change_duration
                            : 0.0;
      const int lane = lane_of(y, road).value_or(p.lane);
      rows.push_back(TrackRecord{f, p.id, x_base + osc, y, base_speed(t) + osc_rate, vy,
                                 tf.meta.lane_ids[static_cast<std::size_t>(lane)], p.width, p.length});
    }
    return rows;
  };
  // Recorded traffic has no collisions: a change that would bring two bodies
  // within kClearance (raw metres, bumper to bumper) is dropped.
  auto collide = [](const std::vector<TrackRecord>& a, const std::vector<TrackRecord>& b) {
    for (std::size_t f = 0; f < a.size(); ++f) {
      const double lat = std::abs(a[f].y - b[f].y) - 0.5 * (a[f].width + b[f].width);
      const double lon = std::abs(a[f].x - b[f].x) - 0.5 * (a[f].length + b[f].length);
      if (lat < 0.3 && lon < kClearance) return true;
    }
    return false;
  };

  std::vector<std::vector<TrackRecord>> accepted;
  for (const Plan& p : plans) accepted.push_back(trajectory(p));
  // Keepers never conflict with each other, so reverting changers terminates.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < plans.size() && !changed; ++i) {
      if (!plans[i].target_lane) continue;
      for (std::size_t j = 0; j < plans.size(); ++j) {
        if (j != i && collide(accepted[i], accepted[j])) {
          plans[i].target_lane.reset();
          accepted[i] = trajectory(plans[i]);
          changed = true;
          break;
        }
      }
    }
  }
  for (auto& rows : accepted) tf.rows.insert(tf.rows.end(), rows.begin(), rows.end());
  // File order: by frame, then id, as drone datasets are usually exported.
  std::stable_sort(tf.rows.begin(), tf.rows.end(), [](const TrackRecord& a, const TrackRecord& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  return tf;
}

std::vector<std::filesystem::path> write_synthetic_suite(const std::filesystem::path& dir, int count,
                                                         const SyntheticOptions& options) {
  std::vector<std::filesystem::path> out;
  for (int i = 0; i < count; ++i) {
    SyntheticOptions o = options;
    o.seed = options.seed + static_cast<std::uint64_t>(i);
    const auto path = dir / fmt::format("suite_{:02d}.csv", i);
    write_track_file(generate_synthetic(o), path);
    out.push_back(path);
  }
  return out;
}

}  // namespace hwlaw
