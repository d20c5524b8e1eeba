#include "mdt/roi.hpp"

namespace mdt {

ExtractBatchResult extract_batch_impl(const Tensord& fm, const std::vector<Box>& boxes,
                                      const ExtractConfig& cfg, bool keep_traces) {
  if (fm.rank() != 3) throw DimensionError("extract_batch expects feature map [C,H,W]");
  const int H = fm.shape[1], W = fm.shape[2];
  ExtractBatchResult out;
  out.features.reserve(boxes.size());
  if (keep_traces) out.traces.reserve(boxes.size());

  const int p = cfg.pre_pool_size;
  for (std::size_t n = 0; n < boxes.size(); ++n) {
    try {
      const Box& box = boxes[n];
      BoxTrace trace;
      trace.mode = cfg.mode;
      Tensord pre;
      switch (cfg.mode) {
        case ExtractMode::RoIPooling: {
          auto r = roi_pool_core(fm, box, p, p);
          pre = std::move(r.values);
          if (keep_traces) trace.pool_argmax = std::move(r.argmax);
          break;
        }
        case ExtractMode::RoIAlign: {
          AlignPlan plan = make_align_plan(H, W, box, p, p, 1, 1, cfg.samples_per_cell);
          pre = apply_align_plan(fm, plan);
          if (keep_traces) trace.plan = std::move(plan);
          break;
        }
        case ExtractMode::AdaptiveRoIAlign: {
          const auto [bx, by] = adaptive_bandwidth(box, p, p);
          AlignPlan plan = make_align_plan(H, W, box, p, p, bx, by, cfg.samples_per_cell);
          pre = apply_align_plan(fm, plan);
          if (keep_traces) trace.plan = std::move(plan);
          break;
        }
      }
      auto pooled = maxpool2d(pre, cfg.pool_kernel, cfg.pool_stride);
      RoiFeature f;
      f.source_box = box;
      f.mode = cfg.mode;
      f.values = pooled.values;
      out.features.push_back(std::move(f));
      if (keep_traces) {
        trace.pre_shape = pre.shape;
        trace.trailing = std::move(pooled);
        out.traces.push_back(std::move(trace));
      }
    } catch (const std::exception& e) {
      throw ArgumentError("extract_batch: box " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Tensord extract_backward(const std::vector<BoxTrace>& traces, const std::vector<Tensord>& d_features,
                         const std::vector<int>& fm_shape) {
  if (traces.size() != d_features.size())
    throw DimensionError("extract_backward: trace/gradient count mismatch");
  if (fm_shape.size() != 3) throw DimensionError("extract_backward expects [C,H,W] shape");
  Tensord d_fm(fm_shape);
  const int C = fm_shape[0];
  const std::size_t per = static_cast<std::size_t>(fm_shape[1]) * fm_shape[2];

  for (std::size_t n = 0; n < traces.size(); ++n) {
    const BoxTrace& t = traces[n];
    // Route through the trailing pool back to the interpolated grid.
    Tensord d_pre = maxpool2d_backward(t.trailing, t.pre_shape, d_features[n]);
    const int cells = t.pre_shape[1] * t.pre_shape[2];
    if (t.mode == ExtractMode::RoIPooling) {
      for (int c = 0; c < C; ++c) {
        double* plane = d_fm.ptr() + c * per;
        const double* g = d_pre.ptr() + static_cast<std::size_t>(c) * cells;
        for (int i = 0; i < cells; ++i) {
          const int src = t.pool_argmax[static_cast<std::size_t>(c) * cells + i];
          if (src >= 0) plane[src] += g[i];
        }
      }
    } else {
      for (int c = 0; c < C; ++c) {
        double* plane = d_fm.ptr() + c * per;
        const double* g = d_pre.ptr() + static_cast<std::size_t>(c) * cells;
        for (int i = 0; i < cells; ++i) {
          if (g[i] == 0.0) continue;
          for (const AlignTap& tap : t.plan.cell_taps[static_cast<std::size_t>(i)])
            plane[tap.idx] += tap.w * g[i];
        }
      }
    }
  }
  return d_fm;
}

}  // namespace mdt
