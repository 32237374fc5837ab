#pragma once

#include <filesystem>
#include <utility>

#include "mlop/tensorio.hpp"

namespace mlop {

/// Truncated POD basis of one field space.
///
/// `modes` holds the leading left singular vectors of the mean-centered
/// snapshot matrix, `right_factors` the matching right singular vectors (one
/// row per training snapshot, in training order). `full_sing_vals` keeps every
/// singular value so the captured energy can be reported.
struct ReducedBasis {
  Vector mean;
  Matrix modes;
  Vector sing_vals;
  Matrix right_factors;
  Vector full_sing_vals;

  Eigen::Index rank() const { return modes.cols(); }
  Eigen::Index field_size() const { return modes.rows(); }
  Eigen::Index sample_count() const { return right_factors.rows(); }
};

/// Returns (centered, row means).
std::pair<Matrix, Vector> mean_center(const Matrix& m);

/// All min(N, M) singular values of `m`, non-increasing.
Vector singular_values(const Matrix& m);

/// Rank-r economy SVD of an already centered matrix. Modes are sign-normalized
/// so that each mode's largest-magnitude entry is non-negative.
ReducedBasis truncated_svd(const Matrix& centered, Eigen::Index r, const Vector& mean);

/// Smallest r whose cumulative singular-value sum reaches `fraction` of the total.
Eigen::Index choose_rank(const Vector& sing_vals, double fraction);

/// Number of singular values above 1e-12 * sigma_1.
Eigen::Index numerical_rank(const Vector& sing_vals);

Matrix encode(const ReducedBasis& b, const Matrix& fields);
Matrix decode(const ReducedBasis& b, const Matrix& coeffs);

/// Mean-center, then truncate at `rank` (if > 0) or at the energy `fraction`,
/// capped at the numerical rank.
ReducedBasis fit_basis(const Matrix& snapshots, double fraction, Eigen::Index rank = 0);

void save_basis(const ReducedBasis& b, const std::filesystem::path& dir);
ReducedBasis load_basis(const std::filesystem::path& dir);

}  // namespace mlop
