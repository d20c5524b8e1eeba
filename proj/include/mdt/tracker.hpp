// Online tracking: Gaussian candidate search over (cx, cy, scale), one shared
// feature map per frame, confidence-gated box regression, IoU-gated sample
// collection into a time-stamped memory, and hard-negative-mined long/short
// model updates of the head (conv layers stay frozen).
#pragma once

#include <cstdint>
#include <vector>

#include "mdt/bbox_regressor.hpp"
#include "mdt/dataset.hpp"
#include "mdt/net.hpp"
#include "mdt/sampling.hpp"

namespace mdt {

/// Search state: target center in pixels plus a multiplier on the initial
/// target size.
struct TargetState {
  double cx = 0, cy = 0;
  double scale = 1.0;
};

struct TrackerConfig {
  int n_candidates = 256;
  double trans_std = 0.3;    // x mean of initial target (w, h)
  double scale_step = 1.05;  // scale multiplier is scale_step^u, u ~ N(0,1) in [-2,2]
  double scale_min = 0.125, scale_max = 8.0;
  double success_threshold = 0.5;  // positive-probability gate
  int init_pos = 500, init_neg = 5000;
  double init_pos_iou = 0.7, init_neg_iou = 0.5;
  int update_pos = 50, update_neg = 200;
  double update_pos_iou = 0.7, update_neg_iou = 0.3;  // collect: IoU > 0.7 / < 0.3
  int mining_pool = 1024, mining_keep = 96, batch_pos = 32;
  int long_interval = 10;  // frames between scheduled updates
  int t_long = 100, t_short = 20;
  int init_iters = 50, update_iters = 15;
  double lr = 3e-4;
  double branch_lr_scale = 10.0;
  double momentum = 0.9, weight_decay = 5e-4;
  bool use_bbox_regressor = true;
  bool top5_average = false;  // average the top-5 candidate states instead of argmax
  int input_side = 107;
  double regressor_lambda = 1000.0, regressor_iou = 0.6;
  int regressor_min_pairs = 8;

  void validate() const {
    if (n_candidates < 1 || init_pos < 1 || init_neg < 1 || update_pos < 1 || update_neg < 1)
      throw ConfigError("tracker counts must be positive");
    if (mining_pool < mining_keep || batch_pos < 1) throw ConfigError("tracker mining sizes inconsistent");
    if (success_threshold < 0 || success_threshold > 1)
      throw ConfigError("tracker success threshold must lie in [0,1]");
    if (update_pos_iou <= update_neg_iou || init_pos_iou <= init_neg_iou)
      throw ConfigError("tracker IoU gates must be ordered");
    if (scale_min <= 0 || scale_min >= scale_max) throw ConfigError("tracker scale clamp inverted");
    if (lr <= 0 || init_iters < 1 || update_iters < 1) throw ConfigError("tracker training setup invalid");
  }
};

struct MemoryEntry {
  int frame = 0;
  Tensord feature;  // flattened post-pool RoI feature
};

/// Time-stamped feature cache. Positives persist t_long frames, negatives
/// t_short.
struct SampleMemory {
  std::vector<MemoryEntry> pos, neg;

  void evict(int now, int t_long, int t_short) {
    auto drop = [now](std::vector<MemoryEntry>& v, int horizon) {
      std::erase_if(v, [&](const MemoryEntry& e) { return e.frame < now - horizon; });
    };
    drop(pos, t_long);
    drop(neg, t_short);
  }
  std::size_t size() const { return pos.size() + neg.size(); }
};

/// One mined update batch plus the evidence needed to audit the selection.
struct MinedBatch {
  Tensord X;                       // [batch_pos + mining_keep, F]
  std::vector<int> labels;         // 1 x batch_pos, then 0 x mining_keep
  std::vector<double> pool_scores; // positive score of each pool entry
  std::vector<int> selected;       // pool indices kept as hard negatives
};

/// Uniformly pool up to `mining_pool` distinct negatives, score them with the
/// current head, keep the `mining_keep` highest positive scores (ties to the
/// earlier pool index; drawn with replacement when the pool runs short).
/// Positives are drawn uniformly, without replacement when enough exist.
MinedBatch hard_minibatch(const std::vector<const MemoryEntry*>& pos,
                          const std::vector<const MemoryEntry*>& neg, const HeadParams& head,
                          const TrackerConfig& cfg, Rng& rng);

enum class UpdateKind { Long, Short };

class Tracker {
 public:
  /// Takes a pretrained network; its domain branches are replaced by one
  /// freshly initialized branch.
  Tracker(const LoadedNetwork& net, const TrackerConfig& cfg, std::uint64_t seed);

  /// First-frame setup: samples around gt, trains the head, fits the box
  /// regressor, seeds the memory. Returns the frame-0 record (the given box).
  FrameRecord init(const Image& frame, const Box& gt);

  /// Track one subsequent frame.
  FrameRecord step(const Image& frame);

  long long backbone_forwards() const { return forward_count_; }
  const std::vector<int>& long_update_frames() const { return long_updates_; }
  const SampleMemory& memory() const { return memory_; }
  const NetworkParams& params() const { return params_; }
  const TargetState& state() const { return state_; }
  const RegressorModel& regressor() const { return regressor_; }
  const std::vector<double>& init_losses() const { return init_losses_; }

 private:
  struct Scored {
    std::vector<TargetState> states;
    std::vector<Box> boxes;          // image coordinates
    std::vector<Tensord> features;   // flattened
    std::vector<double> scores;
    int best = 0;
  };

  Box state_box(const TargetState& s) const;
  std::vector<TargetState> draw_candidates(double trans_sigma);
  Scored score_candidates(const Image& frame, const PreparedInput& prep, const std::vector<TargetState>& states,
                          const Tensord& fm);
  std::vector<Tensord> extract_features(const Tensord& fm, const AffineMap& map, const std::vector<Box>& image_boxes);
  void collect_samples(const Image& frame, const Tensord& fm, const AffineMap& map, const Box& estimate);
  void update_model(UpdateKind kind);
  std::vector<double> train_head(const std::vector<const MemoryEntry*>& pos,
                                 const std::vector<const MemoryEntry*>& neg, int iterations);

  NetworkConfig cfg_;
  NetworkParams params_;
  TrackerConfig tc_;
  Rng rng_;
  TargetState state_;
  double init_w_ = 0, init_h_ = 0, motion_sigma_ = 0;
  int frame_index_ = -1;
  long long forward_count_ = 0;
  SampleMemory memory_;
  RegressorModel regressor_;
  std::vector<int> long_updates_;
  std::vector<double> init_losses_;
  bool initialized_ = false;
};

struct TrackRunResult {
  std::vector<FrameRecord> records;
  long long backbone_forwards = 0;
  std::vector<int> long_update_frames;
};

/// Track a whole sequence from its first ground-truth box.
TrackRunResult track_sequence(const LoadedNetwork& net, const Sequence& seq, const TrackerConfig& cfg,
                              std::uint64_t seed);

}  // namespace mdt
