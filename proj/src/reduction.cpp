#include "mlop/reduction.hpp"

#include <cmath>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "mlop/error.hpp"

namespace mlop {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kRankTolerance = 1e-12;

struct ThinSvd {
  Matrix u;
  Vector s;
  Matrix v;
};

// Tall-skinny inputs go through a Householder QR first so only an M x M SVD is
// needed; otherwise bidiagonalize directly. Neither forms an N x N factor.
ThinSvd economy_svd(const Matrix& m) {
  const Eigen::Index n = m.rows();
  const Eigen::Index k = m.cols();
  ThinSvd out;
  if (4 * k < n) {
    Eigen::HouseholderQR<Matrix> qr(m);
    const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix q = Matrix::Identity(n, k);
    q = qr.householderQ() * q;
    out.u = q * svd.matrixU();
    out.s = svd.singularValues();
    out.v = svd.matrixV();
  } else {
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.s = svd.singularValues();
    out.v = svd.matrixV();
  }
  return out;
}

void normalize_signs(Matrix& modes, Matrix& right) {
  for (Eigen::Index c = 0; c < modes.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < modes.rows(); ++i) {
      const double a = std::abs(modes(i, c));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (modes(best, c) < 0.0) {
      modes.col(c) *= -1.0;
      right.col(c) *= -1.0;
    }
  }
}

}  // namespace

std::pair<Matrix, Vector> mean_center(const Matrix& m) {
  if (m.cols() < 1) throw ConfigError("mean_center: need at least one column");
  Vector mean = m.rowwise().mean();
  Matrix centered = m.colwise() - mean;
  return {std::move(centered), std::move(mean)};
}

Vector singular_values(const Matrix& m) { return economy_svd(m).s; }

ReducedBasis truncated_svd(const Matrix& centered, Eigen::Index r, const Vector& mean) {
  if (mean.size() != centered.rows()) throw ConfigError("truncated_svd: mean length mismatch");
  const Eigen::Index kmax = std::min(centered.rows(), centered.cols());
  if (r < 1 || r > kmax)
    throw ConfigError("truncated_svd: rank " + std::to_string(r) + " outside [1, " +
                      std::to_string(kmax) + "]");
  ThinSvd svd = economy_svd(centered);
  if (!(svd.s(0) > 0.0) || svd.s(r - 1) < kRankTolerance * svd.s(0))
    throw NumericalError("truncated_svd: rank " + std::to_string(r) +
                         " exceeds the numerical rank of the snapshot matrix");
  ReducedBasis b;
  b.mean = mean;
  b.modes = svd.u.leftCols(r);
  b.sing_vals = svd.s.head(r);
  b.right_factors = svd.v.leftCols(r);
  b.full_sing_vals = svd.s;
  normalize_signs(b.modes, b.right_factors);
  return b;
}

Eigen::Index choose_rank(const Vector& sing_vals, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("choose_rank: fraction must lie in (0, 1]");
  if (sing_vals.size() == 0 || !(sing_vals(0) > 0.0))
    throw ConfigError("choose_rank: need at least one positive singular value");
  // Summed in the same order as the running total so that fraction 1 stops at the last positive value.
  double total = 0.0;
  for (Eigen::Index i = 0; i < sing_vals.size(); ++i) total += sing_vals(i);
  double running = 0.0;
  for (Eigen::Index i = 0; i < sing_vals.size(); ++i) {
    running += sing_vals(i);
    if (running / total >= fraction) return i + 1;
  }
  return sing_vals.size();
}

Eigen::Index numerical_rank(const Vector& sing_vals) {
  if (sing_vals.size() == 0 || !(sing_vals(0) > 0.0)) return 0;
  Eigen::Index r = 0;
  while (r < sing_vals.size() && sing_vals(r) >= kRankTolerance * sing_vals(0)) ++r;
  return r;
}

Matrix encode(const ReducedBasis& b, const Matrix& fields) {
  if (fields.rows() != b.field_size())
    throw ConfigError("encode: field length " + std::to_string(fields.rows()) +
                      " does not match basis length " + std::to_string(b.field_size()));
  return b.modes.transpose() * (fields.colwise() - b.mean);
}

Matrix decode(const ReducedBasis& b, const Matrix& coeffs) {
  if (coeffs.rows() != b.rank())
    throw ConfigError("decode: coefficient length " + std::to_string(coeffs.rows()) +
                      " does not match basis rank " + std::to_string(b.rank()));
  Matrix out = b.modes * coeffs;
  out.colwise() += b.mean;
  return out;
}

ReducedBasis fit_basis(const Matrix& snapshots, double fraction, Eigen::Index rank) {
  auto [centered, mean] = mean_center(snapshots);
  Eigen::Index r = rank;
  if (r <= 0) {
    const Vector s = singular_values(centered);
    const Eigen::Index numerical = numerical_rank(s);
    if (numerical == 0) throw NumericalError("fit_basis: snapshots are constant");
    r = std::min(choose_rank(s, fraction), numerical);
  }
  return truncated_svd(centered, r, mean);
}

void save_basis(const ReducedBasis& b, const fs::path& dir) {
  fs::create_directories(dir);
  write_matrix(b.mean, dir / "mean.mlop");
  write_matrix(b.modes, dir / "modes.mlop");
  write_matrix(b.sing_vals, dir / "sing_vals.mlop");
  write_matrix(b.right_factors, dir / "right_factors.mlop");
  write_matrix(b.full_sing_vals, dir / "full_sing_vals.mlop");
  json desc = {{"r", b.rank()}, {"N", b.field_size()}, {"M", b.sample_count()}};
  write_text(dir / "basis.json", desc.dump(2) + "\n");
}

ReducedBasis load_basis(const fs::path& dir) {
  ReducedBasis b;
  b.mean = read_matrix(dir / "mean.mlop");
  b.modes = read_matrix(dir / "modes.mlop");
  b.sing_vals = read_matrix(dir / "sing_vals.mlop");
  b.right_factors = read_matrix(dir / "right_factors.mlop");
  b.full_sing_vals = read_matrix(dir / "full_sing_vals.mlop");
  const json desc = json::parse(read_text(dir / "basis.json"));
  if (desc.at("r").get<Eigen::Index>() != b.rank() || desc.at("N").get<Eigen::Index>() != b.field_size() ||
      b.mean.size() != b.field_size() || b.sing_vals.size() != b.rank() ||
      b.right_factors.cols() != b.rank())
    throw IoError("basis in '" + dir.string() + "' is inconsistent");
  return b;
}

}  // namespace mlop
