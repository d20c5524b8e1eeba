#include "mdt/pretrain.hpp"

#include <algorithm>
#include <cmath>

#include "mdt/optim.hpp"

namespace mdt {

Minibatch build_minibatch(const Sequence& domain, const NetworkConfig& cfg, const NetworkParams& params,
                          const PretrainConfig& pc, Rng& rng) {
  if (domain.size() < 1) throw ArgumentError("build_minibatch: domain has no frames");
  const int per_frame = pc.pos_per_frame + pc.neg_per_frame;
  const int N = pc.frames_per_iter * per_frame;
  const int feat_w = cfg.roi_feature_width();
  const double stride = cfg.backbone.feature_stride();

  Minibatch mb;
  mb.X = Tensord({N, feat_w});
  mb.labels.resize(static_cast<std::size_t>(N));
  mb.frames.reserve(static_cast<std::size_t>(pc.frames_per_iter));

  int row = 0;
  for (int f = 0; f < pc.frames_per_iter; ++f) {
    const int fi = rng.uniform_int(static_cast<int>(domain.size()));
    const Image frame = domain.frame(static_cast<std::size_t>(fi));
    const Box& gt = domain.gt[static_cast<std::size_t>(fi)];
    const Box region(0, 0, frame.width, frame.height);

    std::vector<Box> boxes = sample_boxes(gt, pc.pos_per_frame, iou_at_least(gt, pc.pos_iou),
                                          SampleScales::positive(), region, rng);
    std::vector<Box> negs = sample_boxes(gt, pc.neg_per_frame, iou_below(gt, pc.neg_iou),
                                         SampleScales::negative(), region, rng);
    boxes.insert(boxes.end(), negs.begin(), negs.end());

    PreparedInput prep = prepare_input(frame, gt, boxes, pc.input_side);
    FrameBatch fb;
    Tensord fm = forward_features_traced(prep.crop, params.backbone, cfg.backbone, &fb.trace);
    fb.fm_shape = fm.shape;

    std::vector<Box> projected;
    projected.reserve(boxes.size());
    for (const Box& b : boxes) {
      Box p = project_box(prep.map.apply(b), stride);
      if (cfg.extract.mode == ExtractMode::RoIPooling) p = snap_to_map(p, fm.shape[1], fm.shape[2]);
      projected.push_back(p);
    }
    ExtractBatchResult ex = extract_batch_impl(fm, projected, cfg.extract, true);
    fb.roi_traces = std::move(ex.traces);

    for (std::size_t i = 0; i < ex.features.size(); ++i, ++row) {
      const Tensord& v = ex.features[i].values;
      std::copy(v.data.begin(), v.data.end(), mb.X.data.begin() + static_cast<std::size_t>(row) * feat_w);
      mb.labels[static_cast<std::size_t>(row)] = i < static_cast<std::size_t>(pc.pos_per_frame) ? 1 : 0;
      fb.rows.push_back(row);
    }
    mb.frames.push_back(std::move(fb));
  }
  return mb;
}

namespace {

/// Active domain plus (subset_size - 1) others drawn without replacement.
std::vector<int> sample_subset(int num_domains, int active, int subset_size, Rng& rng) {
  subset_size = std::min(subset_size, num_domains);
  std::vector<int> others;
  others.reserve(static_cast<std::size_t>(num_domains) - 1);
  for (int d = 0; d < num_domains; ++d)
    if (d != active) others.push_back(d);
  std::vector<int> subset = {active};
  for (int i = 0; i < subset_size - 1; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(others.size()) - i);
    std::swap(others[static_cast<std::size_t>(i)], others[static_cast<std::size_t>(j)]);
    subset.push_back(others[static_cast<std::size_t>(i)]);
  }
  return subset;
}

}  // namespace

PretrainStats pretrain_loop(const DomainDataset& data, NetworkConfig cfg, const PretrainConfig& pc,
                            std::uint64_t seed, NetworkParams& params, const CheckpointSink& sink) {
  pc.validate();
  const int D = static_cast<int>(data.domains.size());
  if (D < 1) throw ArgumentError("pretrain_loop: dataset has no domains");
  cfg.head.domains = D;
  cfg.head.in_features = cfg.roi_feature_width();

  Rng rng(seed);
  params = init_network(cfg, rng);

  std::vector<Tensord*> train = trainable_params(params, true);
  SgdState sgd(train, pc.lr, pc.momentum, pc.weight_decay);
  GradAccumulator acc(train, pc.accumulate_every);

  const long long total = pc.max_iterations > 0 ? pc.max_iterations
                                                : static_cast<long long>(pc.epochs) * D;
  PretrainStats stats;
  stats.losses.reserve(static_cast<std::size_t>(total));

  for (long long k = 1; k <= total; ++k) {
    const int active = domain_for_iteration(k, D);
    Minibatch mb = build_minibatch(data.domains[static_cast<std::size_t>(active)], cfg, params, pc, rng);

    HeadTrace trace;
    Tensord scores = head_forward_batch(mb.X, params.head, &trace, &cfg.head, &rng);
    const std::vector<int> subset = sample_subset(D, active, pc.inst_domains, rng);
    LossResult loss = multi_task_loss(scores, mb.labels, active, subset, pc.alpha);
    if (!std::isfinite(loss.total)) {
      if (sink) sink(params, "diagnostic");
      throw NumericError("pretrain_loop: non-finite loss at iteration " + std::to_string(k));
    }
    stats.losses.push_back(loss.total);

    HeadGrads hg = head_backward(loss.d_scores, trace, params.head);

    // Route feature gradients back through extraction into the conv stack.
    const int feat_w = cfg.roi_feature_width();
    const int side = cfg.pooled_side();
    BackboneGrads bg;
    bool bg_init = false;
    for (const FrameBatch& fb : mb.frames) {
      std::vector<Tensord> d_feats;
      d_feats.reserve(fb.rows.size());
      for (int r : fb.rows) {
        Tensord d({cfg.backbone.c3, side, side});
        std::copy(hg.d_x.data.begin() + static_cast<std::size_t>(r) * feat_w,
                  hg.d_x.data.begin() + static_cast<std::size_t>(r + 1) * feat_w, d.data.begin());
        d_feats.push_back(std::move(d));
      }
      Tensord d_fm = extract_backward(fb.roi_traces, d_feats, fb.fm_shape);
      BackboneGrads g = backward_features(d_fm, fb.trace, params.backbone, cfg.backbone);
      if (!bg_init) {
        bg = std::move(g);
        bg_init = true;
      } else {
        bg.d_w1.vec() += g.d_w1.vec();
        bg.d_b1.vec() += g.d_b1.vec();
        bg.d_w2.vec() += g.d_w2.vec();
        bg.d_b2.vec() += g.d_b2.vec();
        bg.d_w3.vec() += g.d_w3.vec();
        bg.d_b3.vec() += g.d_b3.vec();
      }
    }

    if (acc.add(collect_grads(&bg, hg), train, sgd)) {
      ++stats.flushes;
      if (sink && pc.checkpoint_every_flushes > 0 && stats.flushes % pc.checkpoint_every_flushes == 0)
        sink(params, "flush_" + std::to_string(stats.flushes));
    }
    ++stats.iterations;
  }
  if (sink) sink(params, "final");
  return stats;
}

}  // namespace mdt
