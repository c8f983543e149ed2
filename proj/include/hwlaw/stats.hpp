#pragma once

#include <array>
#include <span>

#include "hwlaw/simulator.hpp"

namespace hwlaw {

struct ComplianceStats {
  double compliance_rate = 0.0;
  double active_rate = 0.0;
  double passive_rate = 0.0;
  double intervention_rate = 0.0;
  long long total_frames = 0;
  std::array<long long, 4> counts{};  ///< indexed by FrameState
  /// Frames in which each law was committed, split by label.
  std::array<long long, 7> law_active{};
  std::array<long long, 7> law_passive{};
  int runs = 0;
  bool empty_input = false;

  [[nodiscard]] long long count(FrameState s) const { return counts[static_cast<std::size_t>(s)]; }
};

/// Frame-weighted label proportions over all logs.
ComplianceStats aggregate_stats(std::span<const SimLog> logs);

}  // namespace hwlaw
