// Offline multi-domain training: single-domain minibatches built from
// IoU-gated box samples, domain cycling via (k mod D), gradient accumulation
// with periodic optimizer flushes, and deterministic checkpointing.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mdt/dataset.hpp"
#include "mdt/net.hpp"
#include "mdt/sampling.hpp"

namespace mdt {

struct PretrainConfig {
  int frames_per_iter = 8;
  int pos_per_frame = 32;
  int neg_per_frame = 96;
  double pos_iou = 0.7;   // accept positives at IoU >= pos_iou
  double neg_iou = 0.5;   // accept negatives at IoU < neg_iou
  int accumulate_every = 50;
  int inst_domains = 100;  // softmax subset size, capped at D
  double alpha = 0.1;
  int epochs = 1000;        // one epoch = D iterations
  int max_iterations = -1;  // >0 overrides epochs*D (toy runs)
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int checkpoint_every_flushes = 0;  // 0: only the final checkpoint
  int input_side = 107;

  void validate() const {
    if (frames_per_iter < 1 || pos_per_frame < 1 || neg_per_frame < 1)
      throw ConfigError("pretrain counts must be positive");
    if (pos_iou < 0 || pos_iou > 1 || neg_iou < 0 || neg_iou > 1 || pos_iou <= neg_iou)
      throw ConfigError("pretrain IoU thresholds must lie in [0,1] with pos_iou > neg_iou");
    if (accumulate_every < 1 || inst_domains < 1) throw ConfigError("pretrain schedule values must be >= 1");
    if (alpha < 0 || lr <= 0) throw ConfigError("pretrain alpha must be >= 0 and lr > 0");
    if (epochs < 1 && max_iterations < 1) throw ConfigError("pretrain run length must be positive");
  }
};

/// Everything one frame contributes to a minibatch, including the caches
/// needed to push gradients from RoI features back to the conv weights.
struct FrameBatch {
  BackboneTrace trace;
  std::vector<BoxTrace> roi_traces;
  std::vector<int> rows;  // minibatch row of each RoI
  std::vector<int> fm_shape;
};

struct Minibatch {
  Tensord X;  // [N, feature] flattened post-pool RoI features
  std::vector<int> labels;
  std::vector<FrameBatch> frames;
};

/// Sample frames (with replacement when the domain is short), gate boxes by
/// IoU, run one shared forward per frame, and extract every RoI from it.
Minibatch build_minibatch(const Sequence& domain, const NetworkConfig& cfg, const NetworkParams& params,
                          const PretrainConfig& pc, Rng& rng);

/// Active domain of 1-based iteration k.
inline int domain_for_iteration(long long k, int num_domains) {
  return static_cast<int>(k % num_domains);
}

/// Called whenever a checkpoint is due: tag is "flush_<n>", "final", or
/// "diagnostic" (non-finite loss abort).
using CheckpointSink = std::function<void(const NetworkParams&, const std::string& tag)>;

struct PretrainStats {
  std::vector<double> losses;  // loss_total per iteration
  long long iterations = 0;
  long long flushes = 0;
};

PretrainStats pretrain_loop(const DomainDataset& data, NetworkConfig cfg, const PretrainConfig& pc,
                            std::uint64_t seed, NetworkParams& params,
                            const CheckpointSink& sink = nullptr);

}  // namespace mdt
