#include "mdt/eval.hpp"

#include "mdt/common.hpp"

namespace mdt {

EvalResult evaluate(const std::vector<Box>& tracked, const std::vector<Box>& truth) {
  if (tracked.size() != truth.size()) throw ArgumentError("evaluate: tracked/truth length mismatch");
  if (tracked.empty()) throw ArgumentError("evaluate: no frames");

  const std::size_t n = tracked.size();
  std::vector<double> ious(n), dists(n);
  for (std::size_t i = 0; i < n; ++i) {
    ious[i] = iou(tracked[i], truth[i]);
    dists[i] = center_distance(tracked[i], truth[i]);
  }

  EvalResult r;
  r.success.resize(101);
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    int hit = 0;
    for (double v : ious)
      if (v >= t) ++hit;
    r.success[static_cast<std::size_t>(i)] = static_cast<double>(hit) / static_cast<double>(n);
  }
  r.precision.resize(51);
  for (int e = 0; e <= 50; ++e) {
    int hit = 0;
    for (double v : dists)
      if (v <= e) ++hit;
    r.precision[static_cast<std::size_t>(e)] = static_cast<double>(hit) / static_cast<double>(n);
  }

  double s = 0;
  for (double v : r.success) s += v;
  r.auc = s / 101.0;
  r.precision_at_20 = r.precision[20];
  return r;
}

}  // namespace mdt
