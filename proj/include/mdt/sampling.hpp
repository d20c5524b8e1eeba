// Rejection sampling of training/candidate boxes around a reference box.
//
// Proposals perturb (cx, cy, log w, log h) with Gaussian noise whose scale is
// relative to the reference size; negatives can mix in uniform whole-region
// proposals to cover background far from the target. Draws that fail the
// acceptance predicate are rejected; 10,000 consecutive rejections raise
// SamplingError.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mdt/box.hpp"
#include "mdt/common.hpp"

namespace mdt {

struct SampleScales {
  double trans = 0.1;      // stddev of center shift, x size
  double log_size = 0.2;   // stddev of log w / log h
  double uniform_mix = 0;  // probability of a uniform whole-region proposal

  static SampleScales positive() { return {0.1, 0.2, 0.0}; }
  static SampleScales negative(double uniform_fraction = 0.5) { return {0.5, 0.5, uniform_fraction}; }
};

using BoxPredicate = std::function<bool(const Box&)>;

inline BoxPredicate iou_at_least(const Box& ref, double thr) {
  return [ref, thr](const Box& b) { return iou(b, ref) >= thr; };
}
inline BoxPredicate iou_above(const Box& ref, double thr) {
  return [ref, thr](const Box& b) { return iou(b, ref) > thr; };
}
inline BoxPredicate iou_below(const Box& ref, double thr) {
  return [ref, thr](const Box& b) { return iou(b, ref) < thr; };
}

/// Translate a box so it lies inside `region`, shrinking it first if it is
/// larger than the region.
inline Box clamp_into(const Box& b, const Box& region) {
  double w = std::min(b.width(), region.width());
  double h = std::min(b.height(), region.height());
  double x1 = std::min(std::max(b.cx() - w / 2, region.x1), region.x2 - w);
  double y1 = std::min(std::max(b.cy() - h / 2, region.y1), region.y2 - h);
  return Box(x1, y1, x1 + w, y1 + h);
}

/// Draw `count` boxes around `ref` that satisfy `accept`, all clamped into
/// `region`. The rejection counter resets on every acceptance.
inline std::vector<Box> sample_boxes(const Box& ref, int count, const BoxPredicate& accept,
                                     const SampleScales& scales, const Box& region, Rng& rng,
                                     int max_rejections = 10000) {
  if (count < 1) throw ArgumentError("sample_boxes count must be >= 1");
  if (!ref.valid()) throw ArgumentError("sample_boxes reference box is degenerate");
  if (!region.valid()) throw ArgumentError("sample_boxes region is degenerate");
  const double s = (ref.width() + ref.height()) / 2;

  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(count));
  int rejections = 0;
  while (static_cast<int>(out.size()) < count) {
    Box proposal;
    if (scales.uniform_mix > 0 && rng.uniform() < scales.uniform_mix) {
      const double cx = rng.uniform(region.x1, region.x2);
      const double cy = rng.uniform(region.y1, region.y2);
      const double w = ref.width() * std::exp(rng.normal(0, scales.log_size));
      const double h = ref.height() * std::exp(rng.normal(0, scales.log_size));
      proposal = Box::from_center(cx, cy, w, h);
    } else {
      const double cx = ref.cx() + rng.normal(0, scales.trans * s);
      const double cy = ref.cy() + rng.normal(0, scales.trans * s);
      const double w = ref.width() * std::exp(rng.normal(0, scales.log_size));
      const double h = ref.height() * std::exp(rng.normal(0, scales.log_size));
      proposal = Box::from_center(cx, cy, w, h);
    }
    proposal = clamp_into(proposal, region);
    if (proposal.valid() && accept(proposal)) {
      out.push_back(proposal);
      rejections = 0;
    } else if (++rejections >= max_rejections) {
      throw SamplingError("no acceptable box after " + std::to_string(max_rejections) + " draws");
    }
  }
  return out;
}

}  // namespace mdt
