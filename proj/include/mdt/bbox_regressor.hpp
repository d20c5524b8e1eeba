// Linear refinement of estimated boxes: ridge regression from flattened RoI
// features onto normalized center offsets and log size ratios, fit once on
// first-frame samples and applied only to confident estimates.
#pragma once

#include <array>
#include <vector>

#include "mdt/box.hpp"
#include "mdt/tensor.hpp"

namespace mdt {

struct RegressorModel {
  Tensord weights;  // [4, F] rows: dx, dy, dw, dh
  Tensord bias;     // [4]
  double lambda = 1000.0;

  bool fitted() const { return weights.numel() > 0; }
};

/// Regression targets of proposal -> ground truth:
/// ((gx-px)/pw, (gy-py)/ph, log(gw/pw), log(gh/ph)) in center-size form.
inline std::array<double, 4> encode_targets(const Box& proposal, const Box& gt) {
  if (!proposal.valid() || !gt.valid()) throw ArgumentError("encode_targets requires valid boxes");
  return {(gt.cx() - proposal.cx()) / proposal.width(), (gt.cy() - proposal.cy()) / proposal.height(),
          std::log(gt.width() / proposal.width()), std::log(gt.height() / proposal.height())};
}

/// Inverse of encode_targets applied to a proposal.
inline Box decode_targets(const Box& proposal, const std::array<double, 4>& t) {
  const double cx = proposal.cx() + t[0] * proposal.width();
  const double cy = proposal.cy() + t[1] * proposal.height();
  return Box::from_center(cx, cy, proposal.width() * std::exp(t[2]), proposal.height() * std::exp(t[3]));
}

/// Closed-form ridge fit on centered features/targets; the intercept is not
/// penalized, so lambda -> inf shrinks weights to 0 and predictions to the
/// mean target. Every proposal must overlap gt with IoU >= min_iou.
RegressorModel fit_regressor(const std::vector<Tensord>& features, const std::vector<Box>& proposals,
                             const Box& gt, double lambda = 1000.0, double min_iou = 0.6,
                             int min_pairs = 8);

Box apply_regressor(const RegressorModel& model, const Tensord& feature, const Box& proposal);

}  // namespace mdt
