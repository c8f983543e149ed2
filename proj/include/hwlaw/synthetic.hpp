#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hwlaw/dataset_io.hpp"

namespace hwlaw {

/// Generator settings for track files in the dataset schema. Positions and
/// speeds are raw (half of highway scale); apply preprocess_scale(2) before
/// simulating.
struct SyntheticOptions {
  std::uint64_t seed = 1;
  int vehicles_per_lane = 3;
  double duration = 30.0;     ///< s per file
  double frame_rate = 30.0;   ///< Hz
  double lane_change_prob = 0.35;
  double slow_change_prob = 0.3;  ///< share of lane changes that pause astride the line
  /// Single lane, legal speeds, wide gaps, no manoeuvres.
  bool compliant = false;
};

/// One three-lane file of platoon traffic. Deterministic in the options.
TrackFile generate_synthetic(const SyntheticOptions& options);

/// Writes `count` files (seeds seed, seed+1, ...) as suite_NN.csv plus
/// metadata into `dir`; returns the CSV paths.
std::vector<std::filesystem::path> write_synthetic_suite(const std::filesystem::path& dir, int count,
                                                         const SyntheticOptions& options);

}  // namespace hwlaw
