// Config-matrix evaluation: each cell names a pretrained checkpoint plus the
// tracker-side switches, runs the fixed sequence suite over fixed seeds, and
// reports mean metrics as a text table.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdt/eval.hpp"
#include "mdt/tracker.hpp"

namespace mdt {

struct AblationCell {
  std::string name;
  BackboneVariant variant = BackboneVariant::DenseFM;
  ExtractMode mode = ExtractMode::AdaptiveRoIAlign;
  bool instance_loss = true;    // pretraining used the embedding term
  bool bbox_regression = true;  // tracker applies the box regressor
  std::string checkpoint;       // path to the pretrained network
};

/// Stable fingerprint of the configuration switches (not the checkpoint), so
/// two cells describing the same setup hash identically.
std::uint64_t cell_hash(const AblationCell& cell);

/// The four standard cells, quantized pooling through the dense adaptive
/// variant, all with the embedding loss and box regression enabled.
std::vector<AblationCell> default_matrix();

struct AblationRow {
  AblationCell cell;
  std::uint64_t hash = 0;
  double mean_auc = 0;
  double mean_precision_at_20 = 0;
  std::vector<double> per_run_auc;  // sequence-major, seed-minor
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::string table;
};

/// Tracks every (sequence, seed) pair per cell and averages the metrics.
/// A cell whose checkpoint is missing or disagrees with its declared
/// variant/mode raises ConfigError.
AblationReport run_ablation(const std::vector<AblationCell>& cells, const std::vector<Sequence>& suite,
                            const TrackerConfig& tracker, const std::vector<std::uint64_t>& seeds);

}  // namespace mdt
