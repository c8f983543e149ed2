#include "hwlaw/sim_log_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace hwlaw {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json interval(const std::optional<Interval>& v) { return v ? json::array({v->lo, v->hi}) : json(nullptr); }

json optional_law(const std::optional<Law>& l) { return l ? json(std::string(1, law_letter(*l))) : json(nullptr); }

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", p.string()));
  return out;
}

}  // namespace

json frame_to_json(const FrameRecord& f) {
  json phases = json::object();
  for (Law law : kAllLaws) phases[std::string(1, law_letter(law))] = to_string(f.phase[static_cast<std::size_t>(law)]);
  return json{
      {"t", f.t},
      {"ego", {{"x", f.ego.x}, {"y", f.ego.y}, {"vx", f.ego.vx}, {"vy", f.ego.vy}, {"yaw", f.ego.yaw}}},
      {"reference", {{"x", f.reference.x}, {"y", f.reference.y}, {"vx", f.reference.vx}}},
      {"label", to_string(f.label.state)},
      {"laws", f.label.laws.to_string()},
      {"active", f.active.to_string()},
      {"committed", f.committed.to_string()},
      {"counterfactual", f.counterfactual.to_string()},
      {"phase", phases},
      {"intent", to_string(f.intent)},
      {"overtake_stage", to_string(f.stage)},
      {"plan",
       {{"speed_ref", optional_number(f.plan.speed_ref)},
        {"speed_cons", interval(f.plan.speed_cons)},
        {"lat_ref", optional_number(f.plan.lat_ref)},
        {"lat_cons", interval(f.plan.lat_cons)},
        {"speed_source", optional_law(f.plan.speed_winner)},
        {"lat_source", optional_law(f.plan.lat_winner)},
        {"dropped", f.plan.dropped.to_string()}}},
      {"u", json::array({f.u[0], f.u[1]})},
      {"mpc",
       {{"objective", f.mpc.objective},
        {"iterations", f.mpc.iterations},
        {"slack_speed", f.mpc.slack_speed},
        {"slack_lateral", f.mpc.slack_lateral},
        {"fallback", f.mpc.fallback}}},
      {"lead_gap", optional_number(f.lead_gap)},
  };
}

json stats_to_json(const ComplianceStats& st) {
  json laws = json::object();
  for (Law law : kAllLaws) {
    const auto i = static_cast<std::size_t>(law);
    laws[std::string(1, law_letter(law))] = {{"active", st.law_active[i]}, {"passive", st.law_passive[i]}};
  }
  return json{
      {"runs", st.runs},
      {"total_frames", st.total_frames},
      {"compliance_rate", st.compliance_rate},
      {"active_rate", st.active_rate},
      {"passive_rate", st.passive_rate},
      {"intervention_rate", st.intervention_rate},
      {"counts",
       {{"compliant", st.count(FrameState::Compliant)},
        {"active_violation", st.count(FrameState::ActiveViolation)},
        {"passive_violation", st.count(FrameState::PassiveViolation)},
        {"compliance_under_intervention", st.count(FrameState::ComplianceUnderIntervention)}}},
      {"laws", laws},
      {"empty_input", st.empty_input},
  };
}

json summary_to_json(const SimLog& log) {
  const ComplianceStats st = aggregate_stats(std::span<const SimLog>(&log, 1));
  long long slack_frames = 0;
  long long fallbacks = 0;
  for (const FrameRecord& f : log.frames) {
    if (f.mpc.slack_speed > 1e-6 || f.mpc.slack_lateral > 1e-6) ++slack_frames;
    if (f.mpc.fallback) ++fallbacks;
  }
  return json{
      {"scenario", log.scenario},
      {"seed", log.seed},
      {"dt", log.dt},
      {"compliance_enabled", log.compliance_enabled},
      {"frames", log.frames.size()},
      {"ended_early", log.ended_early},
      {"slack_frames", slack_frames},
      {"solver_fallbacks", fallbacks},
      {"diagnostics", log.diagnostics},
      {"stats", stats_to_json(st)},
  };
}

void write_frames_jsonl(const SimLog& log, std::ostream& out) {
  for (const FrameRecord& f : log.frames) out << frame_to_json(f).dump() << '\n';
}

void write_frames_csv(const SimLog& log, std::ostream& out) {
  out << "t,x,y,vx,vy,yaw,ref_x,ref_y,ref_vx,label,laws,active,counterfactual,intent,stage,"
         "speed_ref,lat_ref,Fx,steer,slack_speed,slack_lateral,lead_gap\n";
  for (const FrameRecord& f : log.frames) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", f.t, f.ego.x, f.ego.y,
                       f.ego.vx, f.ego.vy, f.ego.yaw, f.reference.x, f.reference.y, f.reference.vx,
                       to_string(f.label.state), f.label.laws.to_string(), f.active.to_string(),
                       f.counterfactual.to_string(), to_string(f.intent), to_string(f.stage),
                       fmt_opt(f.plan.speed_ref), fmt_opt(f.plan.lat_ref), f.u[0], f.u[1], f.mpc.slack_speed,
                       f.mpc.slack_lateral, fmt_opt(f.lead_gap));
  }
}

void write_sim_outputs(const SimLog& log, const std::filesystem::path& dir, OutputFormat format) {
  std::filesystem::create_directories(dir);
  if (format == OutputFormat::Json) {
    auto out = open_out(dir / "frames.jsonl");
    write_frames_jsonl(log, out);
  } else {
    auto out = open_out(dir / "frames.csv");
    write_frames_csv(log, out);
  }
  {
    auto out = open_out(dir / "summary.json");
    out << summary_to_json(log).dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "speed.csv");
    out << "t,ego_vx,reference_vx,speed_ref\n";
    for (const FrameRecord& f : log.frames)
      out << fmt::format("{},{},{},{}\n", f.t, f.ego.vx, f.reference.vx, fmt_opt(f.plan.speed_ref));
  }
  {
    auto out = open_out(dir / "lateral.csv");
    out << "t,ego_x,ego_y,reference_x,reference_y\n";
    for (const FrameRecord& f : log.frames)
      out << fmt::format("{},{},{},{},{}\n", f.t, f.ego.x, f.ego.y, f.reference.x, f.reference.y);
  }
  {
    auto out = open_out(dir / "labels.csv");
    out << "t,label,laws\n";
    for (const FrameRecord& f : log.frames)
      out << fmt::format("{},{},{}\n", f.t, to_string(f.label.state), f.label.laws.to_string());
  }
}

std::string serialize_log(const SimLog& log) {
  std::ostringstream ss;
  write_frames_jsonl(log, ss);
  ss << summary_to_json(log).dump() << '\n';
  return ss.str();
}

}  // namespace hwlaw
