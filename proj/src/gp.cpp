#include "mlop/gp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "mlop/error.hpp"

namespace mlop {

namespace fs = std::filesystem;
using json = nlohmann::json;

double kernel(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, double length_scale) {
  if (!(length_scale > 0.0)) throw ConfigError("kernel: length scale must be positive");
  if (a.size() != b.size()) throw ConfigError("kernel: dimension mismatch");
  return std::exp(-(a - b).squaredNorm() / (2.0 * length_scale * length_scale));
}

Matrix kernel_matrix(const Matrix& x, const Matrix& y, double length_scale) {
  if (!(length_scale > 0.0)) throw ConfigError("kernel: length scale must be positive");
  if (x.rows() != y.rows()) throw ConfigError("kernel_matrix: dimension mismatch");
  // |a-b|^2 = |a|^2 + |b|^2 - 2 a.b, clipped at zero against cancellation.
  const Vector xx = x.colwise().squaredNorm().transpose();
  const Vector yy = y.colwise().squaredNorm().transpose();
  Matrix d2 = -2.0 * (x.transpose() * y);
  d2.colwise() += xx;
  d2.rowwise() += yy.transpose();
  const double scale = -1.0 / (2.0 * length_scale * length_scale);
  return (d2.cwiseMax(0.0) * scale).array().exp().matrix();
}

GpModel gp_fit(const Matrix& x, const Matrix& y, double length_scale, double noise) {
  if (x.cols() < 1) throw ConfigError("gp_fit: need at least one training pair");
  if (x.cols() != y.cols()) throw ConfigError("gp_fit: input and output sample counts differ");
  if (!(noise >= 0.0)) throw ConfigError("gp_fit: noise must be >= 0");
  Matrix k = kernel_matrix(x, x, length_scale);
  // Exact symmetry and unit diagonal; the expanded-distance formula can leave
  // rounding asymmetry.
  k = 0.5 * (k + k.transpose()).eval();
  k.diagonal().setOnes();

  const Matrix rhs = y.transpose();
  double jitter = std::max(noise, kMinJitter);
  while (true) {
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(kj);
    if (llt.info() == Eigen::Success) {
      GpModel m;
      m.train_inputs = x;
      m.alpha = llt.solve(rhs);
      m.length_scale = length_scale;
      m.noise = jitter;
      if (m.alpha.allFinite()) return m;
    }
    if (jitter >= kMaxJitter) break;
    jitter = std::min(jitter * 10.0, kMaxJitter);
  }
  throw NumericalError("gp_fit: kernel factorization failed after jitter escalation");
}

Matrix gp_predict(const GpModel& model, const Matrix& x_query) {
  if (x_query.rows() != model.train_inputs.rows())
    throw ConfigError("gp_predict: query dimension does not match training inputs");
  return (kernel_matrix(x_query, model.train_inputs, model.length_scale) * model.alpha).transpose();
}

LengthScaleSearch tune_length_scale(const Matrix& x_train, const Matrix& y_train, const Matrix& x_val,
                                    const Matrix& y_val, const std::vector<double>& grid, double noise) {
  if (grid.empty()) throw ConfigError("tune_length_scale: empty grid");
  const double truth = y_val.norm();
  if (!(truth > 0.0)) throw ConfigError("tune_length_scale: validation targets are all zero");
  LengthScaleSearch s;
  s.grid = grid;
  for (double l : grid) {
    if (!(l > 0.0)) throw ConfigError("tune_length_scale: grid values must be positive");
    const GpModel m = gp_fit(x_train, y_train, l, noise);
    const double err = (gp_predict(m, x_val) - y_val).norm() / truth;
    s.errors.push_back(err);
    const bool better = s.errors.size() == 1 || err < s.best_error ||
                        (err == s.best_error && l < s.best);
    if (better) {
      s.best = l;
      s.best_error = err;
    }
  }
  return s;
}

double median_pairwise_distance(const Matrix& x) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    for (Eigen::Index j = i + 1; j < x.cols(); ++j) d.push_back((x.col(i) - x.col(j)).norm());
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

void save_gp(const GpModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  write_matrix(model.train_inputs, dir / "train_inputs.mlop");
  write_matrix(model.alpha, dir / "alpha.mlop");
  json meta = {{"length_scale", model.length_scale},
               {"noise", model.noise},
               {"variant", model.variant},
               {"train_inputs", "train_inputs.mlop"},
               {"alpha", "alpha.mlop"}};
  write_text(dir / "gp.json", meta.dump(2) + "\n");
}

GpModel load_gp(const fs::path& dir) {
  GpModel m;
  try {
    const json meta = json::parse(read_text(dir / "gp.json"));
    m.train_inputs = read_matrix(dir / meta.at("train_inputs").get<std::string>());
    m.alpha = read_matrix(dir / meta.at("alpha").get<std::string>());
    m.length_scale = meta.at("length_scale").get<double>();
    m.noise = meta.at("noise").get<double>();
    m.variant = meta.at("variant").get<std::string>();
  } catch (const json::exception& e) {
    throw IoError("gp model in '" + dir.string() + "': " + e.what());
  }
  if (m.alpha.rows() != m.train_inputs.cols()) throw IoError("gp model in '" + dir.string() + "' is inconsistent");
  return m;
}

}  // namespace mlop
