#include "mlop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mlop/error.hpp"

namespace mlop {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

RocCurve degenerate_curve(double top) {
  RocCurve c;
  c.thresholds = {top, kNegInf};
  c.fpr = {0.0, 1.0};
  c.tpr = {0.0, 1.0};
  c.degenerate = true;
  return c;
}

}  // namespace

double smoke_threshold(const Matrix& val_outputs, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("smoke_threshold: beta must lie in (0, 1)");
  std::vector<std::vector<double>> positives;
  std::vector<double> candidates{0.0};
  for (Eigen::Index j = 0; j < val_outputs.cols(); ++j) {
    std::vector<double> p;
    for (Eigen::Index i = 0; i < val_outputs.rows(); ++i)
      if (val_outputs(i, j) > 0.0) p.push_back(val_outputs(i, j));
    if (p.empty()) continue;
    std::sort(p.begin(), p.end());
    candidates.insert(candidates.end(), p.begin(), p.end());
    positives.push_back(std::move(p));
  }
  if (positives.empty()) throw ConfigError("smoke_threshold: every snapshot is identically zero");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  auto fraction_above = [&](double t) {
    double sum = 0.0;
    for (const auto& p : positives) {
      const auto above = p.end() - std::upper_bound(p.begin(), p.end(), t);
      sum += static_cast<double>(above) / static_cast<double>(p.size());
    }
    return sum / static_cast<double>(positives.size());
  };

  // fraction_above is non-increasing and equals 1 at candidate 0 > beta.
  std::size_t lo = 0, hi = candidates.size();
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (fraction_above(candidates[mid]) > beta)
      lo = mid;
    else
      hi = mid;
  }
  return candidates[lo];
}

RocCurve roc(const Eigen::Ref<const Vector>& pred, const Mask& obs_mask, std::size_t n_thresholds) {
  const Eigen::Index n = pred.size();
  if (obs_mask.size() != n) throw ConfigError("roc: prediction and mask lengths differ");
  if (n == 0) throw ConfigError("roc: empty field");
  const Eigen::Index positives = obs_mask.count();
  const Eigen::Index negatives = n - positives;
  const double top = pred.maxCoeff();
  if (positives == 0 || negatives == 0 || pred.minCoeff() == top) return degenerate_curve(top);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return pred(a) > pred(b); });

  // For each distinct value v (descending): counts of pixels strictly above v.
  std::vector<double> values;
  std::vector<Eigen::Index> tp_above, fp_above;
  Eigen::Index tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double v = pred(order[k]);
    values.push_back(v);
    tp_above.push_back(tp);
    fp_above.push_back(fp);
    while (k < order.size() && pred(order[k]) == v) {
      if (obs_mask(order[k]))
        ++tp;
      else
        ++fp;
      ++k;
    }
  }

  std::vector<std::size_t> keep(values.size());
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (n_thresholds >= 2 && values.size() > n_thresholds) {
    keep.clear();
    const double step = static_cast<double>(values.size() - 1) / static_cast<double>(n_thresholds - 1);
    for (std::size_t i = 0; i < n_thresholds; ++i) {
      const auto idx = static_cast<std::size_t>(std::llround(step * static_cast<double>(i)));
      if (keep.empty() || keep.back() != idx) keep.push_back(idx);
    }
  }

  RocCurve c;
  const double pos = static_cast<double>(positives);
  const double neg = static_cast<double>(negatives);
  for (std::size_t idx : keep) {
    c.thresholds.push_back(values[idx]);
    c.fpr.push_back(static_cast<double>(fp_above[idx]) / neg);
    c.tpr.push_back(static_cast<double>(tp_above[idx]) / pos);
  }
  c.thresholds.push_back(kNegInf);
  c.fpr.push_back(1.0);
  c.tpr.push_back(1.0);
  return c;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) * 0.5;
  return std::clamp(area, 0.0, 1.0);
}

std::size_t best_point(const RocCurve& curve) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double d = std::hypot(curve.fpr[i], 1.0 - curve.tpr[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double iou(const Mask& pred_mask, const Mask& obs_mask) {
  if (pred_mask.size() != obs_mask.size()) throw ConfigError("iou: mask lengths differ");
  const auto inter = (pred_mask && obs_mask).count();
  const auto uni = (pred_mask || obs_mask).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return values[lo] + w * (values[hi] - values[lo]);
}

ClassificationReport classification_report(const Matrix& preds, const Matrix& obs, double tau,
                                           std::size_t n_thresholds, bool keep_curves) {
  if (preds.rows() != obs.rows() || preds.cols() != obs.cols())
    throw ConfigError("classification_report: prediction and observation sets are misaligned");
  if (obs.cols() == 0) throw ConfigError("classification_report: no snapshots");
  ClassificationReport rep;
  rep.tau = tau;
  std::vector<double> aucs, ious;
  for (Eigen::Index j = 0; j < obs.cols(); ++j) {
    const Mask obs_mask = obs.col(j).array() > tau;
    const RocCurve c = roc(preds.col(j), obs_mask, n_thresholds);
    SnapshotMetrics s;
    s.auc = auc(c);
    s.degenerate = c.degenerate;
    const std::size_t b = best_point(c);
    s.best_threshold = c.thresholds[b];
    s.iou = iou(preds.col(j).array() > s.best_threshold, obs_mask);
    const double truth = obs.col(j).norm();
    s.rel_err = truth > 0.0 ? (preds.col(j) - obs.col(j)).norm() / truth
                            : std::numeric_limits<double>::quiet_NaN();
    aucs.push_back(s.auc);
    ious.push_back(s.iou);
    rep.per_snapshot.push_back(s);
    if (keep_curves) rep.curves.push_back(c);
  }
  rep.median_auc = quantile(aucs, 0.5);
  rep.median_iou = quantile(ious, 0.5);
  rep.auc_q25 = quantile(aucs, 0.25);
  rep.auc_q75 = quantile(aucs, 0.75);
  rep.iou_q25 = quantile(ious, 0.25);
  rep.iou_q75 = quantile(ious, 0.75);
  return rep;
}

double relative_frobenius_error(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ConfigError("relative_frobenius_error: shape mismatch");
  const double t = truth.norm();
  if (!(t > 0.0)) throw ConfigError("relative_frobenius_error: reference has zero norm");
  return (pred - truth).norm() / t;
}

Matrix log_transform(const Matrix& smoke) { return smoke.array().log1p().matrix(); }

namespace {

void check_count(const SnapshotMatrix& m, Eigen::Index count) {
  if (count < 1 || count > m.cols())
    throw ConfigError("QoI estimator: sample count " + std::to_string(count) + " outside [1, " +
                      std::to_string(m.cols()) + "]");
}

}  // namespace

QoiField qoi_full_mc(const SnapshotMatrix& final_smoke, Eigen::Index count) {
  check_count(final_smoke, count);
  return {final_smoke.grid, log_transform(final_smoke.data.leftCols(count)).rowwise().mean()};
}

QoiField qoi_reduced_mc(const SnapshotMatrix& final_smoke, const ReducedBasis& qoi_basis, Eigen::Index count) {
  check_count(final_smoke, count);
  const Matrix q = log_transform(final_smoke.data.leftCols(count));
  return {final_smoke.grid, decode(qoi_basis, encode(qoi_basis, q)).rowwise().mean()};
}

QoiField qoi_surrogate(const SnapshotMatrix& fires, const OperatorModel& qoi_model, Eigen::Index count) {
  check_count(fires, count);
  return {fires.grid, predict(qoi_model, fires.data.leftCols(count)).rowwise().mean()};
}

}  // namespace mlop
