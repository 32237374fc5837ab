#pragma once

#include <filesystem>
#include <variant>

#include "mlop/reduction.hpp"

namespace mlop {

/// Coefficient map theta (r_out x r) between two POD bases.
struct LinearOperatorModel {
  Matrix theta;
  ReducedBasis input_basis;
  ReducedBasis output_basis;
  bool clamp_nonneg = true;
};

/// theta is r_out x (r + r(r+1)/2). Feature order: a_1..a_r, then a_k a_l for
/// k <= l in lexicographic order (1,1),(1,2),...,(1,r),(2,2),...,(r,r).
struct QuadraticOperatorModel {
  Matrix theta;
  double lambda = 0.0;
  ReducedBasis input_basis;
  ReducedBasis output_basis;
  bool clamp_nonneg = true;
};

using OperatorModel = std::variant<LinearOperatorModel, QuadraticOperatorModel>;

/// Normal equations of the linear operator least-squares problem under the
/// sample-expectation inner product: theta * gram = rhs, with
/// gram(j,l) = mean_m a_j a_l and rhs(i,j) = mean_m b_i a_j.
struct GramSystem {
  Matrix gram;
  Matrix rhs;
};

inline Eigen::Index quadratic_feature_count(Eigen::Index r) { return r + r * (r + 1) / 2; }

LinearOperatorModel fit_linear_closed_form(const ReducedBasis& input_basis,
                                           const ReducedBasis& output_basis, bool clamp_nonneg = true);

/// `input_coeffs` is r x M, `output_coeffs` r_out x M (one column per sample).
GramSystem assemble_linear_gram(const Matrix& input_coeffs, const Matrix& output_coeffs);

/// Solves the assembled Gram system for theta. Throws NumericalError when the
/// Gram matrix has condition number >= 1e12.
Matrix solve_linear_gram(const Matrix& input_coeffs, const Matrix& output_coeffs);

/// Gram-route fit on the training coefficients of both bases.
LinearOperatorModel fit_linear_gram(const ReducedBasis& input_basis, const ReducedBasis& output_basis,
                                    bool clamp_nonneg = true);

/// A is M x r (one row per sample).
Matrix build_interaction_matrix(const Matrix& a);

QuadraticOperatorModel fit_quadratic(const ReducedBasis& input_basis, const ReducedBasis& output_basis,
                                     double lambda, bool clamp_nonneg = true);

/// Lower-level quadratic solve: features M x F, targets M x r_out; returns
/// theta (r_out x F) solving (F'F + lambda I) theta' = F' targets.
Matrix solve_regularized(const Matrix& features, const Matrix& targets, double lambda);

/// Reduced-space map only: input coefficients (r x K) to output coefficients.
Matrix apply_coefficients(const OperatorModel& model, const Matrix& input_coeffs);

/// Full pipeline: encode, feature map, theta, decode, optional clamp at zero.
Matrix predict(const OperatorModel& model, const Matrix& fields);

const ReducedBasis& input_basis(const OperatorModel& model);
const ReducedBasis& output_basis(const OperatorModel& model);
const Matrix& theta(const OperatorModel& model);

/// theta.mlop + model.json, bases in input_basis/ and output_basis/.
void save_model(const OperatorModel& model, const std::filesystem::path& dir);
OperatorModel load_model(const std::filesystem::path& dir);

}  // namespace mlop
