#include "mdt/ablate.hpp"

#include <cstdio>
#include <filesystem>

namespace mdt {

std::uint64_t cell_hash(const AblationCell& cell) {
  std::string canon = std::string(to_string(cell.variant)) + "|" + to_string(cell.mode) + "|" +
                      (cell.instance_loss ? "iel" : "noiel") + "|" + (cell.bbox_regression ? "bbr" : "nobbr");
  return fnv1a(canon.data(), canon.size());
}

std::vector<AblationCell> default_matrix() {
  std::vector<AblationCell> cells(4);
  cells[0] = {"pool_orig", BackboneVariant::Original, ExtractMode::RoIPooling, true, true, ""};
  cells[1] = {"align_orig", BackboneVariant::Original, ExtractMode::RoIAlign, true, true, ""};
  cells[2] = {"adaptive_orig", BackboneVariant::Original, ExtractMode::AdaptiveRoIAlign, true, true, ""};
  cells[3] = {"adaptive_dense", BackboneVariant::DenseFM, ExtractMode::AdaptiveRoIAlign, true, true, ""};
  return cells;
}

AblationReport run_ablation(const std::vector<AblationCell>& cells, const std::vector<Sequence>& suite,
                            const TrackerConfig& tracker, const std::vector<std::uint64_t>& seeds) {
  if (cells.empty() || suite.empty() || seeds.empty())
    throw ArgumentError("run_ablation needs cells, sequences, and seeds");

  AblationReport report;
  for (const AblationCell& cell : cells) {
    if (!std::filesystem::exists(cell.checkpoint))
      throw ConfigError("ablation cell '" + cell.name + "': checkpoint not found: " + cell.checkpoint);
    LoadedNetwork net = load_network(cell.checkpoint);
    if (net.config.backbone.variant != cell.variant || net.config.extract.mode != cell.mode)
      throw ConfigError("ablation cell '" + cell.name + "': checkpoint setup disagrees with the cell");

    TrackerConfig tc = tracker;
    tc.use_bbox_regressor = cell.bbox_regression;

    AblationRow row;
    row.cell = cell;
    row.hash = cell_hash(cell);
    double auc_sum = 0, p20_sum = 0;
    for (const Sequence& seq : suite) {
      for (std::uint64_t seed : seeds) {
        TrackRunResult run = track_sequence(net, seq, tc, seed);
        std::vector<Box> boxes;
        boxes.reserve(run.records.size());
        for (const FrameRecord& r : run.records) boxes.push_back(r.box);
        EvalResult ev = evaluate(boxes, seq.gt);
        row.per_run_auc.push_back(ev.auc);
        auc_sum += ev.auc;
        p20_sum += ev.precision_at_20;
      }
    }
    const double n = static_cast<double>(row.per_run_auc.size());
    row.mean_auc = auc_sum / n;
    row.mean_precision_at_20 = p20_sum / n;
    report.rows.push_back(std::move(row));
  }

  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %-9s %-18s %-4s %-4s %8s %8s  %s\n", "cell", "variant", "mode",
                "iel", "bbr", "auc", "p@20", "hash");
  report.table = line;
  for (const AblationRow& row : report.rows) {
    std::snprintf(line, sizeof(line), "%-16s %-9s %-18s %-4s %-4s %8.4f %8.4f  %016llx\n",
                  row.cell.name.c_str(), to_string(row.cell.variant), to_string(row.cell.mode),
                  row.cell.instance_loss ? "yes" : "no", row.cell.bbox_regression ? "yes" : "no",
                  row.mean_auc, row.mean_precision_at_20,
                  static_cast<unsigned long long>(row.hash));
    report.table += line;
  }
  return report;
}

}  // namespace mdt
