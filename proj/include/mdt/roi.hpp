// Fixed-size feature extraction from a shared convolutional map: quantized
// max pooling, tent-kernel interpolation with an integer bandwidth, and the
// size-adaptive variant that widens the kernel for large regions.
//
// All boxes here live in feature-map coordinates (after project_box). Tent
// weights are renormalized over in-map taps, so border cells keep unit total
// weight instead of darkening; a cell whose taps all fall outside the map
// reads 0.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mdt/box.hpp"
#include "mdt/layers.hpp"
#include "mdt/tensor.hpp"

namespace mdt {

enum class ExtractMode { RoIPooling, RoIAlign, AdaptiveRoIAlign };

inline const char* to_string(ExtractMode m) {
  switch (m) {
    case ExtractMode::RoIPooling: return "RoIPooling";
    case ExtractMode::RoIAlign: return "RoIAlign";
    default: return "AdaptiveRoIAlign";
  }
}

struct RoiFeature {
  Tensord values;  // [C, h', w']
  Box source_box;
  ExtractMode mode = ExtractMode::AdaptiveRoIAlign;
};

/// Continuous division of image-pixel coordinates by the feature stride.
inline Box project_box(const Box& box, double feature_stride) {
  if (feature_stride <= 0) throw ArgumentError("feature stride must be positive");
  return box.scaled(1.0 / feature_stride);
}

// ---------------------------------------------------------------------------
// Quantized max pooling
// ---------------------------------------------------------------------------

/// Bin (i,j) of an output grid (oh,ow) covers feature cells
///   rows [gy1 + floor(i*bh), gy1 + ceil((i+1)*bh)) and likewise for columns,
/// where (gx1,gy1,gx2,gy2) = (floor(x1), floor(y1), ceil(x2), ceil(y2)) is the
/// box quantized outward and bh = (gy2-gy1)/oh. Bins are clamped to the map;
/// empty bins yield 0 (argmax -1).
template <typename Scalar>
struct RoiPoolResult {
  Tensor<Scalar> values;   // [C, oh, ow]
  std::vector<int> argmax; // flat H*W index per (c,i,j); -1 for empty bins
};

template <typename Scalar>
RoiPoolResult<Scalar> roi_pool_core(const Tensor<Scalar>& fm, const Box& box, int oh, int ow) {
  if (fm.rank() != 3) throw DimensionError("roi_pool expects feature map [C,H,W]");
  if (oh < 1 || ow < 1) throw ArgumentError("roi_pool output size must be positive");
  const int C = fm.shape[0], H = fm.shape[1], W = fm.shape[2];
  if (!box.valid()) throw ArgumentError("roi_pool box is degenerate");
  if (box.x2 <= 0 || box.y2 <= 0 || box.x1 >= W || box.y1 >= H)
    throw OutOfBoundsError("roi_pool box does not intersect the feature map");

  const int gx1 = static_cast<int>(std::floor(box.x1));
  const int gy1 = static_cast<int>(std::floor(box.y1));
  const int gx2 = static_cast<int>(std::ceil(box.x2));
  const int gy2 = static_cast<int>(std::ceil(box.y2));
  const double bw = static_cast<double>(gx2 - gx1) / ow;
  const double bh = static_cast<double>(gy2 - gy1) / oh;

  RoiPoolResult<Scalar> r;
  r.values = Tensor<Scalar>({C, oh, ow});
  r.argmax.assign(static_cast<std::size_t>(C) * oh * ow, -1);
  for (int i = 0; i < oh; ++i) {
    int y0 = gy1 + static_cast<int>(std::floor(i * bh));
    int y1 = gy1 + static_cast<int>(std::ceil((i + 1) * bh));
    y0 = std::max(y0, 0);
    y1 = std::min(y1, H);
    for (int j = 0; j < ow; ++j) {
      int x0 = gx1 + static_cast<int>(std::floor(j * bw));
      int x1 = gx1 + static_cast<int>(std::ceil((j + 1) * bw));
      x0 = std::max(x0, 0);
      x1 = std::min(x1, W);
      if (y0 >= y1 || x0 >= x1) continue;  // empty bin stays 0
      for (int c = 0; c < C; ++c) {
        const Scalar* plane = fm.ptr() + static_cast<std::size_t>(c) * H * W;
        int best = y0 * W + x0;
        Scalar bv = plane[best];
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) {
            const int idx = y * W + x;
            if (plane[idx] > bv) {
              bv = plane[idx];
              best = idx;
            }
          }
        r.values(c, i, j) = bv;
        r.argmax[(static_cast<std::size_t>(c) * oh + i) * ow + j] = best;
      }
    }
  }
  return r;
}

inline RoiFeature roi_pool(const Tensord& fm, const Box& box, int oh, int ow) {
  RoiFeature f;
  f.values = roi_pool_core(fm, box, oh, ow).values;
  f.source_box = box;
  f.mode = ExtractMode::RoIPooling;
  return f;
}

// ---------------------------------------------------------------------------
// Tent-kernel interpolation
// ---------------------------------------------------------------------------

struct AlignTap {
  int idx;   // flat v*W + u
  double w;  // normalized weight
};

/// Interpolation recipe for one box: per output cell, the in-map taps and
/// their normalized tent weights. Depends only on geometry, so one plan
/// serves every channel (and any scalar type).
struct AlignPlan {
  int out_h = 0, out_w = 0;
  std::vector<std::vector<AlignTap>> cell_taps;  // out_h*out_w entries
};

/// One sample per output cell at the cell center (samples_per_cell=1), or an
/// s x s uniform sub-grid averaged per cell. Tent half-widths bx, by are in
/// feature cells.
inline AlignPlan make_align_plan(int H, int W, const Box& box, int oh, int ow, int bx, int by,
                                 int samples_per_cell = 1) {
  if (bx < 1 || by < 1) throw ArgumentError("roi_align bandwidth must be >= 1");
  if (oh < 1 || ow < 1) throw ArgumentError("roi_align output size must be positive");
  if (samples_per_cell < 1) throw ArgumentError("samples_per_cell must be >= 1");
  if (box.width() < 1e-6 || box.height() < 1e-6)
    throw DegenerateBoxError("roi_align box extent below 1e-6");

  AlignPlan plan;
  plan.out_h = oh;
  plan.out_w = ow;
  plan.cell_taps.resize(static_cast<std::size_t>(oh) * ow);
  const double cw = box.width() / ow;
  const double ch = box.height() / oh;
  const int s = samples_per_cell;

  std::vector<std::pair<int, double>> xs, ys;
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      auto& taps = plan.cell_taps[static_cast<std::size_t>(i) * ow + j];
      double total = 0.0;
      for (int si = 0; si < s; ++si) {
        const double sy = box.y1 + (i + (si + 0.5) / s) * ch;
        ys.clear();
        for (int v = std::max(0, static_cast<int>(std::ceil(sy - by)));
             v <= std::min(H - 1, static_cast<int>(std::floor(sy + by))); ++v) {
          const double wv = 1.0 - std::abs(sy - v) / by;
          if (wv > 0) ys.emplace_back(v, wv);
        }
        for (int sj = 0; sj < s; ++sj) {
          const double sx = box.x1 + (j + (sj + 0.5) / s) * cw;
          xs.clear();
          for (int u = std::max(0, static_cast<int>(std::ceil(sx - bx)));
               u <= std::min(W - 1, static_cast<int>(std::floor(sx + bx))); ++u) {
            const double wu = 1.0 - std::abs(sx - u) / bx;
            if (wu > 0) xs.emplace_back(u, wu);
          }
          for (const auto& [v, wv] : ys)
            for (const auto& [u, wu] : xs) {
              taps.push_back({v * W + u, wv * wu});
              total += wv * wu;
            }
        }
      }
      if (total > 0) {
        for (auto& t : taps) t.w /= total;
      } else {
        taps.clear();  // fully outside the map
      }
    }
  }
  return plan;
}

template <typename Scalar>
Tensor<Scalar> apply_align_plan(const Tensor<Scalar>& fm, const AlignPlan& plan) {
  const int C = fm.shape[0];
  const std::size_t per = static_cast<std::size_t>(fm.shape[1]) * fm.shape[2];
  Tensor<Scalar> out({C, plan.out_h, plan.out_w});
  const int cells = plan.out_h * plan.out_w;
  for (int c = 0; c < C; ++c) {
    const Scalar* plane = fm.ptr() + c * per;
    Scalar* o = out.ptr() + static_cast<std::size_t>(c) * cells;
    for (int n = 0; n < cells; ++n) {
      double acc = 0.0;
      for (const AlignTap& t : plan.cell_taps[static_cast<std::size_t>(n)])
        acc += t.w * static_cast<double>(plane[t.idx]);
      o[n] = static_cast<Scalar>(acc);
    }
  }
  return out;
}

inline RoiFeature roi_align(const Tensord& fm, const Box& box, int oh, int ow, int bandwidth_x,
                            int bandwidth_y, int samples_per_cell = 1) {
  if (fm.rank() != 3) throw DimensionError("roi_align expects feature map [C,H,W]");
  RoiFeature f;
  f.values = apply_align_plan(
      fm, make_align_plan(fm.shape[1], fm.shape[2], box, oh, ow, bandwidth_x, bandwidth_y, samples_per_cell));
  f.source_box = box;
  f.mode = ExtractMode::RoIAlign;
  return f;
}

/// Kernel half-width per axis: max(1, round(extent / output extent)),
/// round-half-away-from-zero.
inline std::pair<int, int> adaptive_bandwidth(const Box& projected, int oh, int ow) {
  const int bx = std::max(1, static_cast<int>(std::lround(projected.width() / ow)));
  const int by = std::max(1, static_cast<int>(std::lround(projected.height() / oh)));
  return {bx, by};
}

inline RoiFeature adaptive_roi_align(const Tensord& fm, const Box& box, int oh, int ow,
                                     int samples_per_cell = 1) {
  const auto [bx, by] = adaptive_bandwidth(box, oh, ow);
  RoiFeature f = roi_align(fm, box, oh, ow, bx, by, samples_per_cell);
  f.mode = ExtractMode::AdaptiveRoIAlign;
  return f;
}

// ---------------------------------------------------------------------------
// Batched extraction with the trailing 3x3 pool
// ---------------------------------------------------------------------------

struct ExtractConfig {
  ExtractMode mode = ExtractMode::AdaptiveRoIAlign;
  int pre_pool_size = 7;  // interpolated grid, pooled 3x3/2 afterwards
  int pool_kernel = 3;
  int pool_stride = 2;
  int samples_per_cell = 1;
};

/// Everything needed to route gradients from one box's pooled feature back
/// onto the shared map.
struct BoxTrace {
  ExtractMode mode;
  AlignPlan plan;                 // align modes
  std::vector<int> pool_argmax;   // pooling mode, per (c, i, j)
  MaxPoolResult<double> trailing; // the 7x7 -> 3x3 pool
  std::vector<int> pre_shape;
};

struct ExtractBatchResult {
  std::vector<RoiFeature> features;  // post-pool [C,3,3]
  std::vector<BoxTrace> traces;      // filled only when requested
};

/// roi_pool requires an overlapping box; valid convolutions shave the map's
/// borders, so a sampled box near the crop edge can project entirely past it.
/// Snap such boxes to a one-cell border sliver (the classical clamped-bin
/// behavior). Boxes that already intersect pass through untouched.
inline Box snap_to_map(Box b, int map_h, int map_w) {
  const double W = map_w, H = map_h;
  if (b.x1 >= W) { b.x1 = W - 1; b.x2 = W; }
  else if (b.x2 <= 0) { b.x1 = 0; b.x2 = 1; }
  if (b.y1 >= H) { b.y1 = H - 1; b.y2 = H; }
  else if (b.y2 <= 0) { b.y1 = 0; b.y2 = 1; }
  return b;
}

ExtractBatchResult extract_batch_impl(const Tensord& fm, const std::vector<Box>& boxes,
                                      const ExtractConfig& cfg, bool keep_traces);

/// Order-preserving per-box extraction; errors gain the offending box index.
inline std::vector<RoiFeature> extract_batch(const Tensord& fm, const std::vector<Box>& boxes,
                                             const ExtractConfig& cfg) {
  return extract_batch_impl(fm, boxes, cfg, false).features;
}

/// Scatter pooled-feature gradients back to the shared map (exact: the tent
/// weighting is linear, the pools route to their argmax cells).
Tensord extract_backward(const std::vector<BoxTrace>& traces, const std::vector<Tensord>& d_features,
                         const std::vector<int>& fm_shape);

}  // namespace mdt
