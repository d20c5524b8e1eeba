#include "mdt/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mdt/backbone.hpp"
#include "mdt/image.hpp"
#include "mdt/roi.hpp"

namespace mdt {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Single-box extraction mirroring extract_batch's dispatch, any scalar.
template <typename Scalar>
Tensor<Scalar> extract_one(const Tensor<Scalar>& fm, Box box, const ExtractConfig& cfg) {
  const int p = cfg.pre_pool_size;
  Tensor<Scalar> pre;
  if (cfg.mode == ExtractMode::RoIPooling) {
    box = snap_to_map(box, fm.shape[1], fm.shape[2]);
    pre = roi_pool_core(fm, box, p, p).values;
  } else {
    int bx = 1, by = 1;
    if (cfg.mode == ExtractMode::AdaptiveRoIAlign) std::tie(bx, by) = adaptive_bandwidth(box, p, p);
    pre = apply_align_plan(fm, make_align_plan(fm.shape[1], fm.shape[2], box, p, p, bx, by,
                                               cfg.samples_per_cell));
  }
  return maxpool2d(pre, cfg.pool_kernel, cfg.pool_stride).values;
}

}  // namespace

BenchReport benchmark_extraction(const NetworkConfig& cfg, int n_rois, int reps, std::uint64_t seed) {
  if (n_rois < 1) throw ArgumentError("benchmark_extraction needs n_rois >= 1");
  if (reps < 1) throw ArgumentError("benchmark_extraction needs reps >= 1");

  Rng rng(seed);
  Image frame(320, 240);
  for (auto& b : frame.data) b = static_cast<std::uint8_t>(rng.uniform_int(256));

  const double side = 64;
  const Box target = Box::from_center(frame.width / 2.0, frame.height / 2.0, side, side);
  std::vector<Box> boxes;
  boxes.reserve(static_cast<std::size_t>(n_rois));
  for (int i = 0; i < n_rois; ++i) {
    const double cx = target.cx() + rng.normal(0, 0.3 * side);
    const double cy = target.cy() + rng.normal(0, 0.3 * side);
    const double s = side * std::pow(1.05, std::clamp(rng.normal(), -2.0, 2.0));
    boxes.push_back(Box::from_center(cx, cy, s, s));
  }

  const auto fparams = init_backbone(cfg.backbone, rng).cast<float>();
  const double stride = cfg.backbone.feature_stride();
  const int input_side = cfg.backbone.input_side;

  std::vector<int> shared_shape, percand_shape;

  auto run_shared = [&]() {
    PreparedInput prep = prepare_input(frame, target, boxes, input_side);
    const Tensor<float> crop = prep.crop.cast<float>();
    const Tensor<float> fm = forward_features(crop, fparams, cfg.backbone);
    for (const Box& b : boxes) {
      Tensor<float> f = extract_one(fm, project_box(prep.map.apply(b), stride), cfg.extract);
      shared_shape = f.shape;
    }
  };

  auto run_per_candidate = [&]() {
    for (const Box& b : boxes) {
      // Resize this candidate alone to the network input and run it through.
      const double s = input_side / b.width();
      AffineMap map{s, s * b.x1, s * b.y1};
      const Tensor<float> crop = sample_crop(frame, map, input_side, input_side).cast<float>();
      const Tensor<float> fm = forward_features(crop, fparams, cfg.backbone);
      const Box whole(0, 0, fm.shape[2], fm.shape[1]);
      Tensor<float> f = extract_one(fm, whole, cfg.extract);
      percand_shape = f.shape;
    }
  };

  run_shared();
  run_per_candidate();  // warm-up, also fills the shapes
  if (shared_shape != percand_shape)
    throw NumericError("benchmark paths disagree on the per-RoI feature shape");

  std::vector<double> shared_times, percand_times;
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    run_shared();
    shared_times.push_back(ms_since(t0));
  }
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    run_per_candidate();
    percand_times.push_back(ms_since(t0));
  }

  BenchReport rep;
  rep.shared_ms = median(shared_times);
  rep.per_candidate_ms = median(percand_times);
  rep.speedup = rep.per_candidate_ms / rep.shared_ms;
  rep.n_rois = n_rois;
  rep.reps = reps;
  rep.feature_shape = shared_shape;
  return rep;
}

}  // namespace mdt
