// Axis-aligned boxes in continuous pixel coordinates (corner form), with
// center-size conversion and IoU.
#pragma once

#include <algorithm>
#include <cmath>

#include "mdt/common.hpp"

namespace mdt {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  Box() = default;
  Box(double x1_, double y1_, double x2_, double y2_) : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {}

  static Box from_corners(double x1, double y1, double x2, double y2) { return Box(x1, y1, x2, y2); }

  /// Top-left + size, the on-disk ground-truth convention.
  static Box from_xywh(double x, double y, double w, double h) { return Box(x, y, x + w, y + h); }

  static Box from_center(double cx, double cy, double w, double h) {
    return Box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2);
  }

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double cx() const { return (x1 + x2) / 2; }
  double cy() const { return (y1 + y2) / 2; }
  double area() const { return width() * height(); }
  bool valid() const { return x2 > x1 && y2 > y1; }

  Box scaled(double s) const { return Box(x1 * s, y1 * s, x2 * s, y2 * s); }
  Box translated(double dx, double dy) const { return Box(x1 + dx, y1 + dy, x2 + dx, y2 + dy); }

  /// Intersection with [0,w]x[0,h]; may produce an invalid (empty) box.
  Box clipped(double w, double h) const {
    return Box(std::max(0.0, x1), std::max(0.0, y1), std::min(w, x2), std::min(h, y2));
  }

  bool intersects(const Box& o) const {
    return std::min(x2, o.x2) > std::max(x1, o.x1) && std::min(y2, o.y2) > std::max(y1, o.y1);
  }
};

/// Intersection over union in [0,1]; 0 for disjoint boxes.
inline double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) throw ArgumentError("iou requires valid boxes");
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

inline double center_distance(const Box& a, const Box& b) {
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

}  // namespace mdt
