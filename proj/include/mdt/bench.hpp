// Timing comparison of the two ways to get per-candidate features: one shared
// feature map with per-box extraction, versus an independent crop-resize and
// full forward pass per candidate.
#pragma once

#include <cstdint>
#include <vector>

#include "mdt/net.hpp"

namespace mdt {

struct BenchReport {
  double shared_ms = 0;         // median per repetition
  double per_candidate_ms = 0;  // median per repetition (all candidates)
  double speedup = 0;           // per_candidate_ms / shared_ms
  int n_rois = 0;
  int reps = 0;
  std::vector<int> feature_shape;  // per-RoI output, identical on both paths
};

/// Runs both paths in single precision, `reps` timed repetitions each after
/// one warm-up, and reports medians. Both paths must produce per-RoI features
/// of the same shape or the run aborts.
BenchReport benchmark_extraction(const NetworkConfig& cfg, int n_rois, int reps = 10,
                                 std::uint64_t seed = 1);

}  // namespace mdt
