#pragma once

#include <cstddef>
#include <vector>

#include "mlop/operators.hpp"
#include "mlop/tensorio.hpp"

namespace mlop {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// ROC samples ordered by decreasing prediction threshold alpha; a pixel is
/// predicted positive when pred > alpha. The last threshold is -inf (every
/// pixel positive), so the curve always runs from (0,0) to (1,1).
struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> fpr;
  std::vector<double> tpr;
  bool degenerate = false;  // no positives, no negatives, or constant predictions

  std::size_t size() const { return thresholds.size(); }
};

struct SnapshotMetrics {
  double auc = 0.5;
  double iou = 0.0;
  double best_threshold = 0.0;
  double rel_err = 0.0;  // NaN when the observed snapshot is identically zero
  bool degenerate = false;
};

struct ClassificationReport {
  double median_auc = 0.0;
  double median_iou = 0.0;
  double auc_q25 = 0.0, auc_q75 = 0.0;
  double iou_q25 = 0.0, iou_q75 = 0.0;
  double tau = 0.0;
  std::vector<SnapshotMetrics> per_snapshot;
  std::vector<RocCurve> curves;
};

struct QoiField {
  Grid2D grid;
  Vector values;
};

/// Observation threshold: the largest candidate (0 or a distinct positive pixel
/// value) at which the mean per-snapshot fraction of positive pixels lying
/// strictly above it still exceeds beta. Snapshots without positive pixels are
/// ignored.
double smoke_threshold(const Matrix& val_outputs, double beta);

/// n_thresholds == 0 keeps every distinct prediction value; otherwise the
/// distinct values are thinned to n_thresholds uniform quantiles (extremes kept).
RocCurve roc(const Eigen::Ref<const Vector>& pred, const Mask& obs_mask, std::size_t n_thresholds = 0);

/// Trapezoidal area under TPR(FPR).
double auc(const RocCurve& curve);

/// Index of the curve point closest to (0,1); ties resolve to the larger threshold.
std::size_t best_point(const RocCurve& curve);

/// TP / (TP + FP + FN), and 1 when both masks are empty.
double iou(const Mask& pred_mask, const Mask& obs_mask);

ClassificationReport classification_report(const Matrix& preds, const Matrix& obs, double tau,
                                           std::size_t n_thresholds = 0, bool keep_curves = false);

double relative_frobenius_error(const Matrix& pred, const Matrix& truth);

/// Median and linearly interpolated quantiles (numpy "linear" convention).
double quantile(std::vector<double> values, double q);

QoiField qoi_full_mc(const SnapshotMatrix& final_smoke, Eigen::Index count);
QoiField qoi_reduced_mc(const SnapshotMatrix& final_smoke, const ReducedBasis& qoi_basis, Eigen::Index count);
QoiField qoi_surrogate(const SnapshotMatrix& fires, const OperatorModel& qoi_model, Eigen::Index count);

/// Elementwise ln(g + 1).
Matrix log_transform(const Matrix& smoke);

}  // namespace mlop
