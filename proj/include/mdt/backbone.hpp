// Three-stage convolutional feature extractor in two topologies: the classic
// one (pool after conv1 and conv2, plain conv3) and a dense variant that
// drops the second pool and dilates conv3 by 3, halving the feature stride
// while keeping the 75-pixel receptive field.
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "mdt/box.hpp"
#include "mdt/image.hpp"
#include "mdt/layers.hpp"
#include "mdt/tensor.hpp"

namespace mdt {

enum class BackboneVariant { Original, DenseFM };

inline const char* to_string(BackboneVariant v) {
  return v == BackboneVariant::Original ? "Original" : "DenseFM";
}

/// One stage of the symbolic layer chain (enough to fold output extents,
/// stride, and receptive field without touching any weights).
struct LayerSpec {
  int kernel;
  int stride;
  int dilation;
  int effective_kernel() const { return kernel + (kernel - 1) * (dilation - 1); }
};

struct BackboneConfig {
  BackboneVariant variant = BackboneVariant::DenseFM;
  int c1 = 96, c2 = 256, c3 = 512;
  int input_side = 107;

  int conv3_dilation() const { return variant == BackboneVariant::DenseFM ? 3 : 1; }
  bool pool_after_conv2() const { return variant == BackboneVariant::Original; }

  /// conv1 7x7/2, pool 3x3/2, conv2 5x5/2, [pool 3x3/2], conv3 3x3/1.
  std::vector<LayerSpec> layers() const {
    std::vector<LayerSpec> chain = {{7, 2, 1}, {3, 2, 1}, {5, 2, 1}};
    if (pool_after_conv2()) chain.push_back({3, 2, 1});
    chain.push_back({3, 1, conv3_dilation()});
    return chain;
  }

  int feature_stride() const {
    int s = 1;
    for (const LayerSpec& l : layers()) s *= l.stride;
    return s;
  }

  /// Input pixels seen by one output unit, folded over the layer chain:
  /// rf += (effective_kernel - 1) * jump; jump *= stride.
  int receptive_field() const {
    int rf = 1, jump = 1;
    for (const LayerSpec& l : layers()) {
      rf += (l.effective_kernel() - 1) * jump;
      jump *= l.stride;
    }
    return rf;
  }

  /// Spatial extent of the feature map for a square input (no padding
  /// anywhere): per layer, out = (in - effective_kernel)/stride + 1.
  int feature_extent(int side) const {
    for (const LayerSpec& l : layers()) {
      if (side < l.effective_kernel())
        throw DimensionError("input side below the layer chain's minimum");
      side = (side - l.effective_kernel()) / l.stride + 1;
    }
    return side;
  }

  static BackboneConfig full(BackboneVariant v) {
    BackboneConfig c;
    c.variant = v;
    return c;
  }
  static BackboneConfig toy(BackboneVariant v) {
    BackboneConfig c;
    c.variant = v;
    c.c1 = 8;
    c.c2 = 16;
    c.c3 = 32;
    return c;
  }
};

template <typename Scalar>
struct BackboneParamsT {
  Tensor<Scalar> w1, b1, w2, b2, w3, b3;

  template <typename Other>
  BackboneParamsT<Other> cast() const {
    return {w1.template cast<Other>(), b1.template cast<Other>(), w2.template cast<Other>(),
            b2.template cast<Other>(), w3.template cast<Other>(), b3.template cast<Other>()};
  }
};
using BackboneParams = BackboneParamsT<double>;

/// Centered uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for both
/// weights and biases.
inline Tensord uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensord t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

inline BackboneParams init_backbone(const BackboneConfig& cfg, Rng& rng) {
  BackboneParams p;
  p.w1 = uniform_fan_in({cfg.c1, 3, 7, 7}, 3 * 7 * 7, rng);
  p.b1 = uniform_fan_in({cfg.c1}, 3 * 7 * 7, rng);
  p.w2 = uniform_fan_in({cfg.c2, cfg.c1, 5, 5}, cfg.c1 * 5 * 5, rng);
  p.b2 = uniform_fan_in({cfg.c2}, cfg.c1 * 5 * 5, rng);
  p.w3 = uniform_fan_in({cfg.c3, cfg.c2, 3, 3}, cfg.c2 * 3 * 3, rng);
  p.b3 = uniform_fan_in({cfg.c3}, cfg.c2 * 3 * 3, rng);
  return p;
}

/// Cached activations for the pretraining backward pass.
template <typename Scalar>
struct BackboneTraceT {
  Tensor<Scalar> input;
  Tensor<Scalar> a1, r1;  // conv1 pre/post relu
  MaxPoolResult<Scalar> p1;
  Tensor<Scalar> a2, r2;
  MaxPoolResult<Scalar> p2;  // Original variant only
  Tensor<Scalar> a3;         // conv3 pre-relu; the feature map is relu(a3)
};
using BackboneTrace = BackboneTraceT<double>;

template <typename Scalar>
Tensor<Scalar> forward_features_traced(const Tensor<Scalar>& crop, const BackboneParamsT<Scalar>& p,
                                       const BackboneConfig& cfg, BackboneTraceT<Scalar>* trace) {
  if (crop.rank() != 3 || crop.shape[0] != 3)
    throw DimensionError("forward_features expects input [3,H,W]");
  const int rf = cfg.receptive_field();
  if (crop.shape[1] < rf || crop.shape[2] < rf)
    throw DimensionError("input smaller than the receptive field");

  Tensor<Scalar> a1 = conv2d(crop, p.w1, p.b1, 2, 1);
  Tensor<Scalar> r1 = relu(a1);
  MaxPoolResult<Scalar> p1 = maxpool2d(r1, 3, 2);
  Tensor<Scalar> a2 = conv2d(p1.values, p.w2, p.b2, 2, 1);
  Tensor<Scalar> r2 = relu(a2);
  MaxPoolResult<Scalar> p2;
  const Tensor<Scalar>& conv3_in = cfg.pool_after_conv2() ? (p2 = maxpool2d(r2, 3, 2)).values : r2;
  Tensor<Scalar> a3 = conv2d(conv3_in, p.w3, p.b3, 1, cfg.conv3_dilation());
  Tensor<Scalar> out = relu(a3);
  if (trace) {
    trace->input = crop;
    trace->a1 = std::move(a1);
    trace->r1 = std::move(r1);
    trace->p1 = std::move(p1);
    trace->a2 = std::move(a2);
    trace->r2 = std::move(r2);
    trace->p2 = std::move(p2);
    trace->a3 = std::move(a3);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> forward_features(const Tensor<Scalar>& crop, const BackboneParamsT<Scalar>& p,
                                const BackboneConfig& cfg) {
  return forward_features_traced<Scalar>(crop, p, cfg, nullptr);
}

struct BackboneGrads {
  Tensord d_w1, d_b1, d_w2, d_b2, d_w3, d_b3;
};

/// Exact reverse pass from a feature-map gradient; input gradient is not
/// needed by any caller, so it is dropped after conv1.
inline BackboneGrads backward_features(const Tensord& d_featmap, const BackboneTrace& t,
                                       const BackboneParams& p, const BackboneConfig& cfg) {
  BackboneGrads g;
  Tensord d_a3 = relu_backward(t.a3, d_featmap);
  const Tensord& conv3_in = cfg.pool_after_conv2() ? t.p2.values : t.r2;
  LayerGrad g3 = conv2d_backward(conv3_in, p.w3, p.b3, 1, cfg.conv3_dilation(), 0, d_a3);
  g.d_w3 = std::move(g3.d_params[0]);
  g.d_b3 = std::move(g3.d_params[1]);
  Tensord d_r2 = cfg.pool_after_conv2()
                     ? maxpool2d_backward(t.p2, t.r2.shape, g3.d_input)
                     : std::move(g3.d_input);
  Tensord d_a2 = relu_backward(t.a2, d_r2);
  LayerGrad g2 = conv2d_backward(t.p1.values, p.w2, p.b2, 2, 1, 0, d_a2);
  g.d_w2 = std::move(g2.d_params[0]);
  g.d_b2 = std::move(g2.d_params[1]);
  Tensord d_r1 = maxpool2d_backward(t.p1, t.r1.shape, g2.d_input);
  Tensord d_a1 = relu_backward(t.a1, d_r1);
  LayerGrad g1 = conv2d_backward(t.input, p.w1, p.b1, 2, 1, 0, d_a1);
  g.d_w1 = std::move(g1.d_params[0]);
  g.d_b1 = std::move(g1.d_params[1]);
  return g;
}

// ---------------------------------------------------------------------------
// Input preparation
// ---------------------------------------------------------------------------

struct PreparedInput {
  Tensord crop;   // [3, H, W], intensities in [0,1], zeros beyond the frame
  AffineMap map;  // original pixels -> crop pixels
};

/// Scale the frame so the target's geometric-mean side becomes input_side,
/// then cut the bounding rectangle of all scaled sample boxes. Regions
/// outside the frame read zero.
inline PreparedInput prepare_input(const Image& frame, const Box& target,
                                   const std::vector<Box>& samples, int input_side = 107) {
  if (!target.valid()) throw ArgumentError("prepare_input: degenerate target box");
  if (samples.empty()) throw ArgumentError("prepare_input: no sample boxes");
  const double s = input_side / std::sqrt(target.width() * target.height());

  double x1 = samples[0].x1, y1 = samples[0].y1, x2 = samples[0].x2, y2 = samples[0].y2;
  for (const Box& b : samples) {
    x1 = std::min(x1, b.x1);
    y1 = std::min(y1, b.y1);
    x2 = std::max(x2, b.x2);
    y2 = std::max(y2, b.y2);
  }
  const double ox = std::floor(x1 * s);
  const double oy = std::floor(y1 * s);
  const int w = static_cast<int>(std::ceil(x2 * s) - ox);
  const int h = static_cast<int>(std::ceil(y2 * s) - oy);

  PreparedInput out;
  out.map = AffineMap{s, ox, oy};
  out.crop = sample_crop(frame, out.map, w, h);
  return out;
}

}  // namespace mdt
