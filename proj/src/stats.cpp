#include "hwlaw/stats.hpp"

namespace hwlaw {

ComplianceStats aggregate_stats(std::span<const SimLog> logs) {
  ComplianceStats st;
  st.runs = static_cast<int>(logs.size());
  for (const SimLog& log : logs) {
    for (const FrameRecord& f : log.frames) {
      ++st.total_frames;
      ++st.counts[static_cast<std::size_t>(f.label.state)];
      for (Law law : f.label.laws.to_vector()) {
        auto& bucket = f.label.state == FrameState::ActiveViolation ? st.law_active : st.law_passive;
        ++bucket[static_cast<std::size_t>(law)];
      }
    }
  }
  if (st.total_frames == 0) {
    st.empty_input = true;
    return st;
  }
  const double n = static_cast<double>(st.total_frames);
  st.active_rate = static_cast<double>(st.count(FrameState::ActiveViolation)) / n;
  st.passive_rate = static_cast<double>(st.count(FrameState::PassiveViolation)) / n;
  st.intervention_rate = static_cast<double>(st.count(FrameState::ComplianceUnderIntervention)) / n;
  // Remainder keeps the four rates summing to one.
  st.compliance_rate = 1.0 - st.active_rate - st.passive_rate - st.intervention_rate;
  return st;
}

}  // namespace hwlaw
