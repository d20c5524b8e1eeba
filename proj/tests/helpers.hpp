// Shared test utilities: independent reference implementations kept
// deliberately naive so library results can be checked against them.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mdt/common.hpp"
#include "mdt/roi.hpp"
#include "mdt/tensor.hpp"

namespace testutil {

inline mdt::Tensord random_tensor(std::vector<int> shape, mdt::Rng& rng, double scale = 1.0) {
  mdt::Tensord t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

inline double max_abs_diff(const mdt::Tensord& a, const mdt::Tensord& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

inline bool bitwise_equal(const mdt::Tensord& a, const mdt::Tensord& b) {
  return a.shape == b.shape && a.data == b.data;
}

/// Direct sliding-window convolution, no im2col, accumulation in (c, ky, kx)
/// order starting from the bias.
inline mdt::Tensord conv_reference(const mdt::Tensord& x, const mdt::Tensord& w, const mdt::Tensord& b,
                                   int stride, int dilation) {
  const int ci = x.shape[0], H = x.shape[1], W = x.shape[2];
  const int co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const int eh = (kh - 1) * dilation + 1, ew = (kw - 1) * dilation + 1;
  const int ho = (H - eh) / stride + 1, wo = (W - ew) / stride + 1;
  mdt::Tensord out({co, ho, wo});
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < ho; ++y)
      for (int xo = 0; xo < wo; ++xo) {
        double s = b(o);
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
              s += w(o, c, ky, kx) * x(c, y * stride + ky * dilation, xo * stride + kx * dilation);
        out(o, y, xo) = s;
      }
  return out;
}

/// Dense tent-kernel reference: for every output cell, walk EVERY map cell,
/// weight it by the separable triangular kernel around the sample point, and
/// renormalize. No tap-range arithmetic shared with the library path.
inline mdt::Tensord dense_tent_oracle(const mdt::Tensord& fm, const mdt::Box& box, int oh, int ow,
                                      int bx, int by, int samples = 1) {
  const int C = fm.shape[0], H = fm.shape[1], W = fm.shape[2];
  mdt::Tensord out({C, oh, ow});
  const double cw = box.width() / ow, ch = box.height() / oh;
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      for (int c = 0; c < C; ++c) {
        double acc = 0, total = 0;
        for (int si = 0; si < samples; ++si)
          for (int sj = 0; sj < samples; ++sj) {
            const double sy = box.y1 + (i + (si + 0.5) / samples) * ch;
            const double sx = box.x1 + (j + (sj + 0.5) / samples) * cw;
            for (int v = 0; v < H; ++v)
              for (int u = 0; u < W; ++u) {
                const double wv = 1.0 - std::abs(sy - v) / by;
                const double wu = 1.0 - std::abs(sx - u) / bx;
                if (wv <= 0 || wu <= 0) continue;
                acc += wv * wu * fm(c, v, u);
                total += wv * wu;
              }
          }
        out(c, i, j) = total > 0 ? acc / total : 0.0;
      }
    }
  return out;
}

/// Exhaustive per-bin max with independently recomputed quantized bounds.
inline mdt::Tensord pool_oracle(const mdt::Tensord& fm, const mdt::Box& box, int oh, int ow) {
  const int C = fm.shape[0], H = fm.shape[1], W = fm.shape[2];
  const int gx1 = static_cast<int>(std::floor(box.x1)), gy1 = static_cast<int>(std::floor(box.y1));
  const int gx2 = static_cast<int>(std::ceil(box.x2)), gy2 = static_cast<int>(std::ceil(box.y2));
  mdt::Tensord out({C, oh, ow});
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        double best = 0;
        bool any = false;
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const bool in_row = y >= gy1 + std::floor(i * double(gy2 - gy1) / oh) &&
                                y < gy1 + std::ceil((i + 1) * double(gy2 - gy1) / oh);
            const bool in_col = x >= gx1 + std::floor(j * double(gx2 - gx1) / ow) &&
                                x < gx1 + std::ceil((j + 1) * double(gx2 - gx1) / ow);
            if (!in_row || !in_col) continue;
            if (!any || fm(c, y, x) > best) best = fm(c, y, x);
            any = true;
          }
        out(c, i, j) = any ? best : 0.0;
      }
  return out;
}

inline mdt::Box random_box(mdt::Rng& rng, int H, int W, bool allow_outside) {
  const double slack = allow_outside ? 3.0 : 0.0;
  double x1 = rng.uniform(-slack, W - 1 + slack);
  double y1 = rng.uniform(-slack, H - 1 + slack);
  double w = rng.uniform(0.4, W * 0.9);
  double h = rng.uniform(0.4, H * 0.9);
  return mdt::Box(x1, y1, x1 + w, y1 + h);
}

}  // namespace testutil
