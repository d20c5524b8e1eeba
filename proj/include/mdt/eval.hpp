// Success/precision curves over fixed threshold grids, with the scalar
// summaries used across the test suite and CLI.
#pragma once

#include <vector>

#include "mdt/box.hpp"

namespace mdt {

struct EvalResult {
  std::vector<double> success;    // IoU thresholds 0, 0.01, ..., 1 (101 points)
  std::vector<double> precision;  // center-error thresholds 0, 1, ..., 50 px
  double auc = 0;                 // mean of the success curve
  double precision_at_20 = 0;
};

/// success(t) = fraction of frames with IoU >= t; precision(e) = fraction
/// with center distance <= e. Lengths must match and be nonzero.
EvalResult evaluate(const std::vector<Box>& tracked, const std::vector<Box>& truth);

}  // namespace mdt
