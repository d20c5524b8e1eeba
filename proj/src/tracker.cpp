#include "mdt/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdt/optim.hpp"

namespace mdt {

namespace {

/// Positive-class probabilities of branch 0 for a stack of features.
std::vector<double> score_features(const Tensord& X, const HeadParams& head) {
  Tensord s = head_forward_batch(X, head);
  const int N = X.shape[0];
  std::vector<double> out(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    const double f0 = s(n, 0, 0), f1 = s(n, 1, 0);
    const double m = std::max(f0, f1);
    const double e0 = std::exp(f0 - m), e1 = std::exp(f1 - m);
    out[static_cast<std::size_t>(n)] = e0 / (e0 + e1);
  }
  return out;
}

Tensord stack_rows(const std::vector<const MemoryEntry*>& entries, const std::vector<int>& picks,
                   int feat_w) {
  Tensord X({static_cast<int>(picks.size()), feat_w});
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const Tensord& f = entries[static_cast<std::size_t>(picks[i])]->feature;
    std::copy(f.data.begin(), f.data.end(), X.data.begin() + i * static_cast<std::size_t>(feat_w));
  }
  return X;
}

/// k distinct indices drawn uniformly from [0, n) via partial Fisher-Yates.
std::vector<int> sample_distinct(int n, int k, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + rng.uniform_int(n - i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

MinedBatch hard_minibatch(const std::vector<const MemoryEntry*>& pos,
                          const std::vector<const MemoryEntry*>& neg, const HeadParams& head,
                          const TrackerConfig& cfg, Rng& rng) {
  if (pos.empty() || neg.empty()) throw StateError("hard_minibatch: sample memory is empty");
  const int feat_w = static_cast<int>(pos[0]->feature.numel());

  // Distinct candidate pool, subsampled only when memory exceeds it.
  std::vector<int> pool;
  if (static_cast<int>(neg.size()) > cfg.mining_pool) {
    pool = sample_distinct(static_cast<int>(neg.size()), cfg.mining_pool, rng);
  } else {
    pool.resize(neg.size());
    std::iota(pool.begin(), pool.end(), 0);
  }

  MinedBatch out;
  out.pool_scores = score_features(stack_rows(neg, pool, feat_w), head);

  std::vector<int> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return out.pool_scores[static_cast<std::size_t>(a)] >
                                              out.pool_scores[static_cast<std::size_t>(b)]; });

  std::vector<int> hard;  // indices into neg
  for (int i = 0; i < cfg.mining_keep && i < static_cast<int>(order.size()); ++i) {
    out.selected.push_back(order[static_cast<std::size_t>(i)]);
    hard.push_back(pool[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
  while (static_cast<int>(hard.size()) < cfg.mining_keep) {  // pool smaller than the batch
    const int r = rng.uniform_int(static_cast<int>(pool.size()));
    out.selected.push_back(r);
    hard.push_back(pool[static_cast<std::size_t>(r)]);
  }

  std::vector<int> pos_rows;
  if (static_cast<int>(pos.size()) >= cfg.batch_pos) {
    pos_rows = sample_distinct(static_cast<int>(pos.size()), cfg.batch_pos, rng);
  } else {
    for (int i = 0; i < cfg.batch_pos; ++i) pos_rows.push_back(rng.uniform_int(static_cast<int>(pos.size())));
  }

  out.X = Tensord({cfg.batch_pos + cfg.mining_keep, feat_w});
  out.labels.assign(static_cast<std::size_t>(cfg.batch_pos + cfg.mining_keep), 0);
  for (int i = 0; i < cfg.batch_pos; ++i) {
    const Tensord& f = pos[static_cast<std::size_t>(pos_rows[static_cast<std::size_t>(i)])]->feature;
    std::copy(f.data.begin(), f.data.end(), out.X.data.begin() + static_cast<std::size_t>(i) * feat_w);
    out.labels[static_cast<std::size_t>(i)] = 1;
  }
  for (int i = 0; i < cfg.mining_keep; ++i) {
    const Tensord& f = neg[static_cast<std::size_t>(hard[static_cast<std::size_t>(i)])]->feature;
    std::copy(f.data.begin(), f.data.end(),
              out.X.data.begin() + static_cast<std::size_t>(cfg.batch_pos + i) * feat_w);
  }
  return out;
}

Tracker::Tracker(const LoadedNetwork& net, const TrackerConfig& cfg, std::uint64_t seed)
    : cfg_(net.config), params_(net.params), tc_(cfg), rng_(seed) {
  tc_.validate();
  // One fresh branch replaces the pretraining domains.
  cfg_.head.domains = 1;
  params_.head.w6.clear();
  params_.head.b6.clear();
  params_.head.w6.push_back(uniform_fan_in({2, cfg_.head.hidden}, cfg_.head.hidden, rng_));
  params_.head.b6.push_back(uniform_fan_in({2}, cfg_.head.hidden, rng_));
}

Box Tracker::state_box(const TargetState& s) const {
  return Box::from_center(s.cx, s.cy, init_w_ * s.scale, init_h_ * s.scale);
}

std::vector<TargetState> Tracker::draw_candidates(double trans_sigma) {
  std::vector<TargetState> out;
  out.reserve(static_cast<std::size_t>(tc_.n_candidates));
  for (int i = 0; i < tc_.n_candidates; ++i) {
    TargetState c;
    c.cx = state_.cx + rng_.normal(0, trans_sigma);
    c.cy = state_.cy + rng_.normal(0, trans_sigma);
    const double u = std::clamp(rng_.normal(), -2.0, 2.0);
    c.scale = std::clamp(state_.scale * std::pow(tc_.scale_step, u), tc_.scale_min, tc_.scale_max);
    out.push_back(c);
  }
  return out;
}

std::vector<Tensord> Tracker::extract_features(const Tensord& fm, const AffineMap& map,
                                               const std::vector<Box>& image_boxes) {
  const double stride = cfg_.backbone.feature_stride();
  std::vector<Box> projected;
  projected.reserve(image_boxes.size());
  for (const Box& b : image_boxes) {
    Box p = project_box(map.apply(b), stride);
    if (cfg_.extract.mode == ExtractMode::RoIPooling) p = snap_to_map(p, fm.shape[1], fm.shape[2]);
    projected.push_back(p);
  }
  std::vector<RoiFeature> feats = extract_batch(fm, projected, cfg_.extract);
  std::vector<Tensord> out;
  out.reserve(feats.size());
  const int w = cfg_.roi_feature_width();
  for (auto& f : feats) out.push_back(f.values.reshaped({w}));
  return out;
}

FrameRecord Tracker::init(const Image& frame, const Box& gt) {
  if (initialized_) throw StateError("tracker already initialized");
  if (!gt.valid()) throw ArgumentError("tracker init box is degenerate");
  initialized_ = true;
  frame_index_ = 0;
  init_w_ = gt.width();
  init_h_ = gt.height();
  motion_sigma_ = tc_.trans_std * (init_w_ + init_h_) / 2;
  state_ = {gt.cx(), gt.cy(), 1.0};

  const Box region(0, 0, frame.width, frame.height);
  std::vector<Box> pos_boxes =
      sample_boxes(gt, tc_.init_pos, iou_at_least(gt, tc_.init_pos_iou), SampleScales::positive(), region, rng_);
  std::vector<Box> neg_boxes =
      sample_boxes(gt, tc_.init_neg, iou_below(gt, tc_.init_neg_iou), SampleScales::negative(), region, rng_);

  std::vector<Box> all = pos_boxes;
  all.insert(all.end(), neg_boxes.begin(), neg_boxes.end());
  PreparedInput prep = prepare_input(frame, gt, all, tc_.input_side);
  Tensord fm = forward_features(prep.crop, params_.backbone, cfg_.backbone);
  ++forward_count_;

  std::vector<Tensord> pos_feats = extract_features(fm, prep.map, pos_boxes);
  std::vector<Tensord> neg_feats = extract_features(fm, prep.map, neg_boxes);

  if (tc_.use_bbox_regressor) {
    std::vector<Tensord> rf;
    std::vector<Box> rb;
    for (std::size_t i = 0; i < pos_boxes.size(); ++i) {
      if (iou(pos_boxes[i], gt) >= tc_.regressor_iou) {
        rf.push_back(pos_feats[i]);
        rb.push_back(pos_boxes[i]);
      }
    }
    regressor_ = fit_regressor(rf, rb, gt, tc_.regressor_lambda, tc_.regressor_iou, tc_.regressor_min_pairs);
  }

  std::vector<MemoryEntry> pos_entries, neg_entries;
  for (auto& f : pos_feats) pos_entries.push_back({0, std::move(f)});
  for (auto& f : neg_feats) neg_entries.push_back({0, std::move(f)});
  std::vector<const MemoryEntry*> pv, nv;
  for (const auto& e : pos_entries) pv.push_back(&e);
  for (const auto& e : neg_entries) nv.push_back(&e);
  init_losses_ = train_head(pv, nv, tc_.init_iters);

  // Seed the memory with collection-gated samples from this same map.
  collect_samples(frame, fm, prep.map, gt);

  return {0, gt, 1.0};
}

Tracker::Scored Tracker::score_candidates(const Image&, const PreparedInput& prep,
                                          const std::vector<TargetState>& states, const Tensord& fm) {
  Scored sc;
  sc.states = states;
  sc.boxes.reserve(states.size());
  for (const TargetState& s : states) sc.boxes.push_back(state_box(s));
  sc.features = extract_features(fm, prep.map, sc.boxes);

  const int w = cfg_.roi_feature_width();
  Tensord X({static_cast<int>(sc.features.size()), w});
  for (std::size_t i = 0; i < sc.features.size(); ++i)
    std::copy(sc.features[i].data.begin(), sc.features[i].data.end(),
              X.data.begin() + i * static_cast<std::size_t>(w));
  sc.scores = score_features(X, params_.head);
  sc.best = static_cast<int>(std::max_element(sc.scores.begin(), sc.scores.end()) - sc.scores.begin());
  return sc;
}

FrameRecord Tracker::step(const Image& frame) {
  if (!initialized_) throw StateError("tracker not initialized");
  ++frame_index_;
  const Box frame_rect(0, 0, frame.width, frame.height);

  // Candidates; when the whole cloud misses the frame, retry with doubled
  // spread a few times before giving up.
  std::vector<TargetState> states;
  double sigma = motion_sigma_;
  for (int attempt = 0;; ++attempt) {
    std::vector<TargetState> drawn = draw_candidates(sigma);
    states.clear();
    for (const TargetState& s : drawn)
      if (state_box(s).intersects(frame_rect)) states.push_back(s);
    if (!states.empty()) break;
    if (attempt >= 4) throw SamplingError("all tracking candidates fell outside the frame");
    sigma *= 2;
  }

  std::vector<Box> boxes;
  boxes.reserve(states.size());
  for (const TargetState& s : states) boxes.push_back(state_box(s));
  // Pad the crop with a context window: sample collection draws negatives
  // around the estimate, and a tight candidate cloud alone would leave the
  // shared map no room for them.
  std::vector<Box> crop_span = boxes;
  crop_span.push_back(
      Box::from_center(state_.cx, state_.cy, 3 * init_w_ * state_.scale, 3 * init_h_ * state_.scale));
  PreparedInput prep = prepare_input(frame, state_box(state_), crop_span, tc_.input_side);
  Tensord fm = forward_features(prep.crop, params_.backbone, cfg_.backbone);
  ++forward_count_;

  Scored sc = score_candidates(frame, prep, states, fm);

  TargetState estimate = sc.states[static_cast<std::size_t>(sc.best)];
  double score = sc.scores[static_cast<std::size_t>(sc.best)];
  if (tc_.top5_average) {
    std::vector<int> order(sc.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return sc.scores[static_cast<std::size_t>(a)] > sc.scores[static_cast<std::size_t>(b)];
    });
    const int k = std::min<int>(5, static_cast<int>(order.size()));
    TargetState mean{0, 0, 0};
    double msc = 0;
    for (int i = 0; i < k; ++i) {
      const TargetState& s = sc.states[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      mean.cx += s.cx / k;
      mean.cy += s.cy / k;
      mean.scale += s.scale / k;
      msc += sc.scores[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] / k;
    }
    estimate = mean;
    score = msc;
  }

  const bool success = score > tc_.success_threshold;
  const Box raw_box = tc_.top5_average ? state_box(estimate) : sc.boxes[static_cast<std::size_t>(sc.best)];

  Box reported = raw_box;
  if (success && tc_.use_bbox_regressor && regressor_.fitted())
    reported = apply_regressor(regressor_, sc.features[static_cast<std::size_t>(sc.best)], raw_box);

  if (success) {
    state_ = estimate;  // failure keeps the last confident state
    collect_samples(frame, fm, prep.map, raw_box);
  }

  if (!success) {
    update_model(UpdateKind::Short);
  } else if (frame_index_ % tc_.long_interval == 0) {
    long_updates_.push_back(frame_index_);
    update_model(UpdateKind::Long);
  }

  return {frame_index_, reported, score};
}

void Tracker::collect_samples(const Image& frame, const Tensord& fm, const AffineMap& map,
                              const Box& estimate) {
  // Stay inside the cropped region so every feature comes off this frame's
  // shared map (no extra backbone pass).
  const Box crop_rect(0, 0, fm.shape[2] * static_cast<double>(cfg_.backbone.feature_stride()),
                      fm.shape[1] * static_cast<double>(cfg_.backbone.feature_stride()));
  Box region = map.invert(crop_rect);
  region = Box(std::max(region.x1, 0.0), std::max(region.y1, 0.0),
               std::min(region.x2, static_cast<double>(frame.width)),
               std::min(region.y2, static_cast<double>(frame.height)));
  if (!region.valid()) return;

  // An estimate overhanging the frame cannot anchor in-frame boxes at high
  // IoU, so collect around its visible part; the sampler is scale-invariant
  // around its reference, which keeps both gates satisfiable.
  const Box target(std::max(estimate.x1, region.x1), std::max(estimate.y1, region.y1),
                   std::min(estimate.x2, region.x2), std::min(estimate.y2, region.y2));
  if (!target.valid()) return;

  std::vector<Box> pos_boxes = sample_boxes(target, tc_.update_pos, iou_above(target, tc_.update_pos_iou),
                                            SampleScales::positive(), region, rng_);
  std::vector<Box> neg_boxes = sample_boxes(target, tc_.update_neg, iou_below(target, tc_.update_neg_iou),
                                            SampleScales::negative(0.0), region, rng_);
  std::vector<Tensord> pos_feats = extract_features(fm, map, pos_boxes);
  std::vector<Tensord> neg_feats = extract_features(fm, map, neg_boxes);
  for (auto& f : pos_feats) memory_.pos.push_back({frame_index_, std::move(f)});
  for (auto& f : neg_feats) memory_.neg.push_back({frame_index_, std::move(f)});
  memory_.evict(frame_index_, tc_.t_long, tc_.t_short);
}

std::vector<double> Tracker::train_head(const std::vector<const MemoryEntry*>& pos,
                                        const std::vector<const MemoryEntry*>& neg, int iterations) {
  std::vector<Tensord*> train = trainable_params(params_, false);
  SgdState sgd(train, tc_.lr, tc_.momentum, tc_.weight_decay);
  sgd.lr_scale = lr_scales(params_, false, tc_.branch_lr_scale);
  const std::vector<int> subset = {0};
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(iterations));
  for (int it = 0; it < iterations; ++it) {
    MinedBatch batch = hard_minibatch(pos, neg, params_.head, tc_, rng_);
    HeadTrace trace;
    Tensord scores = head_forward_batch(batch.X, params_.head, &trace);
    LossResult loss = multi_task_loss(scores, batch.labels, 0, subset, 0.0);
    HeadGrads hg = head_backward(loss.d_scores, trace, params_.head);
    sgd_step(train, collect_grads(nullptr, hg), sgd);
    losses.push_back(loss.total);
  }
  return losses;
}

void Tracker::update_model(UpdateKind kind) {
  const int horizon = kind == UpdateKind::Long ? tc_.t_long : tc_.t_short;
  std::vector<const MemoryEntry*> pos, neg;
  for (const auto& e : memory_.pos)
    if (e.frame >= frame_index_ - horizon) pos.push_back(&e);
  for (const auto& e : memory_.neg)
    if (e.frame >= frame_index_ - tc_.t_short) neg.push_back(&e);
  if (pos.empty() || neg.empty()) return;
  train_head(pos, neg, tc_.update_iters);
}

TrackRunResult track_sequence(const LoadedNetwork& net, const Sequence& seq, const TrackerConfig& cfg,
                              std::uint64_t seed) {
  if (seq.size() < 1) throw ArgumentError("track_sequence: empty sequence");
  Tracker tracker(net, cfg, seed);
  TrackRunResult out;
  out.records.push_back(tracker.init(seq.frame(0), seq.gt[0]));
  for (std::size_t i = 1; i < seq.size(); ++i) out.records.push_back(tracker.step(seq.frame(i)));
  out.backbone_forwards = tracker.backbone_forwards();
  out.long_update_frames = tracker.long_update_frames();
  return out;
}

}  // namespace mdt
