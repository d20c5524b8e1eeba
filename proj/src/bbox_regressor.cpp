#include "mdt/bbox_regressor.hpp"

#include <Eigen/Dense>

namespace mdt {

RegressorModel fit_regressor(const std::vector<Tensord>& features, const std::vector<Box>& proposals,
                             const Box& gt, double lambda, double min_iou, int min_pairs) {
  if (lambda < 0) throw ArgumentError("fit_regressor: lambda must be >= 0");
  if (features.size() != proposals.size()) throw DimensionError("fit_regressor: feature/box count mismatch");
  const int n = static_cast<int>(features.size());
  if (n < min_pairs)
    throw ArgumentError("fit_regressor: needs at least " + std::to_string(min_pairs) + " pairs");
  if (!gt.valid()) throw ArgumentError("fit_regressor: degenerate ground truth");
  for (const Box& p : proposals)
    if (iou(p, gt) < min_iou) throw ArgumentError("fit_regressor: proposal below the IoU training gate");

  const int F = static_cast<int>(features[0].numel());
  Eigen::MatrixXd X(n, F), Y(n, 4);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(features[static_cast<std::size_t>(i)].numel()) != F)
      throw DimensionError("fit_regressor: inconsistent feature widths");
    X.row(i) = features[static_cast<std::size_t>(i)].vec().transpose();
    const auto t = encode_targets(proposals[static_cast<std::size_t>(i)], gt);
    Y.row(i) << t[0], t[1], t[2], t[3];
  }

  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const Eigen::RowVectorXd y_mean = Y.colwise().mean();
  X.rowwise() -= x_mean;
  Y.rowwise() -= y_mean;

  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += lambda;
  Eigen::MatrixXd Z;  // [F, 4]
  if (lambda == 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw NumericError("fit_regressor: singular normal matrix at lambda=0");
    Z = lu.solve(X.transpose() * Y);
  } else {
    Z = A.ldlt().solve(X.transpose() * Y);
  }

  RegressorModel m;
  m.lambda = lambda;
  m.weights = Tensord({4, F});
  m.weights.mat(4, F) = Z.transpose();
  m.bias = Tensord({4});
  m.bias.vec() = (y_mean - x_mean * Z).transpose();
  return m;
}

Box apply_regressor(const RegressorModel& model, const Tensord& feature, const Box& proposal) {
  if (!model.fitted()) throw StateError("apply_regressor: model not fitted");
  const int F = model.weights.shape[1];
  if (static_cast<int>(feature.numel()) != F)
    throw DimensionError("apply_regressor: feature width mismatch");
  Eigen::Vector4d t = model.weights.mat(4, F) * feature.vec() + model.bias.vec();
  return decode_targets(proposal, {t[0], t[1], t[2], t[3]});
}

}  // namespace mdt
