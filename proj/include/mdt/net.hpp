// Whole-network parameter bundle: convolutional stack + head, with ordered
// checkpoint (de)serialization and trainable-parameter views for the
// optimizer. A checkpoint is self-describing: branch count and channel widths
// come from tensor shapes, topology and extraction mode from meta entries.
#pragma once

#include <string>
#include <vector>

#include "mdt/backbone.hpp"
#include "mdt/checkpoint.hpp"
#include "mdt/head.hpp"
#include "mdt/roi.hpp"

namespace mdt {

struct NetworkConfig {
  BackboneConfig backbone;
  HeadConfig head;
  ExtractConfig extract;

  /// Head input width implied by the extraction pipeline: C3 channels over
  /// the post-pool grid.
  int pooled_side() const {
    return (extract.pre_pool_size - extract.pool_kernel) / extract.pool_stride + 1;
  }
  int roi_feature_width() const { return backbone.c3 * pooled_side() * pooled_side(); }

  static NetworkConfig toy(BackboneVariant v, int domains,
                           ExtractMode mode = ExtractMode::AdaptiveRoIAlign) {
    NetworkConfig c;
    c.backbone = BackboneConfig::toy(v);
    c.extract.mode = mode;
    c.head.hidden = 32;
    c.head.domains = domains;
    c.head.in_features = c.roi_feature_width();
    return c;
  }
  static NetworkConfig full(BackboneVariant v, int domains,
                            ExtractMode mode = ExtractMode::AdaptiveRoIAlign) {
    NetworkConfig c;
    c.backbone = BackboneConfig::full(v);
    c.extract.mode = mode;
    c.head.hidden = 512;
    c.head.domains = domains;
    c.head.in_features = c.roi_feature_width();
    return c;
  }
};

struct NetworkParams {
  BackboneParams backbone;
  HeadParams head;
};

inline NetworkParams init_network(const NetworkConfig& cfg, Rng& rng) {
  NetworkParams p;
  p.backbone = init_backbone(cfg.backbone, rng);
  p.head = init_head(cfg.head, rng);
  return p;
}

/// Pointers to every learnable tensor; conv layers excluded when frozen
/// (online tracking trains the head only).
inline std::vector<Tensord*> trainable_params(NetworkParams& p, bool include_conv) {
  std::vector<Tensord*> out;
  if (include_conv) {
    out.insert(out.end(), {&p.backbone.w1, &p.backbone.b1, &p.backbone.w2, &p.backbone.b2,
                           &p.backbone.w3, &p.backbone.b3});
  }
  out.insert(out.end(), {&p.head.w4, &p.head.b4, &p.head.w5, &p.head.b5});
  for (std::size_t d = 0; d < p.head.w6.size(); ++d) {
    out.push_back(&p.head.w6[d]);
    out.push_back(&p.head.b6[d]);
  }
  return out;
}

/// Per-parameter learning-rate multipliers aligned with trainable_params:
/// domain branches get branch_scale (10x during tracking), the rest 1.
inline std::vector<double> lr_scales(const NetworkParams& p, bool include_conv, double branch_scale) {
  std::vector<double> s((include_conv ? 6 : 0) + 4, 1.0);
  s.insert(s.end(), p.head.w6.size() * 2, branch_scale);
  return s;
}

/// Gradients in trainable_params order.
inline std::vector<Tensord> collect_grads(const BackboneGrads* bg, const HeadGrads& hg) {
  std::vector<Tensord> out;
  if (bg) out.insert(out.end(), {bg->d_w1, bg->d_b1, bg->d_w2, bg->d_b2, bg->d_w3, bg->d_b3});
  out.insert(out.end(), {hg.d_w4, hg.d_b4, hg.d_w5, hg.d_b5});
  for (std::size_t d = 0; d < hg.d_w6.size(); ++d) {
    out.push_back(hg.d_w6[d]);
    out.push_back(hg.d_b6[d]);
  }
  return out;
}

ParamDict to_param_dict(const NetworkParams& params, const NetworkConfig& cfg);

struct LoadedNetwork {
  NetworkConfig config;
  NetworkParams params;
};

LoadedNetwork from_param_dict(const ParamDict& dict);

inline void save_network(const std::string& path, const NetworkParams& p, const NetworkConfig& cfg) {
  save_checkpoint(path, to_param_dict(p, cfg));
}

inline LoadedNetwork load_network(const std::string& path) {
  return from_param_dict(load_checkpoint(path));
}

}  // namespace mdt
