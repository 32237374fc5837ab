#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mlop/tensorio.hpp"

namespace mlop {

/// Squared-exponential kernel exp(-|a-b|^2 / (2 l^2)).
double kernel(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, double length_scale);

/// Kernel matrix K(i,j) = k(x_i, y_j) for columns of X (D x M) and Y (D x K).
Matrix kernel_matrix(const Matrix& x, const Matrix& y, double length_scale);

/// GP posterior-mean regressor; one shared kernel factorization for all outputs.
struct GpModel {
  Matrix train_inputs;  // D_in x M
  Matrix alpha;         // M x D_out
  double length_scale = 1.0;
  double noise = 1e-10;  // jitter actually used
  std::string variant = "coeffs";
};

inline constexpr double kMinJitter = 1e-10;
inline constexpr double kMaxJitter = 1e-4;

/// X is D_in x M, Y is D_out x M. Jitter starts at max(noise, 1e-10) and is
/// escalated x10 up to 1e-4 until the Cholesky factorization succeeds.
GpModel gp_fit(const Matrix& x, const Matrix& y, double length_scale, double noise);

/// Returns D_out x K.
Matrix gp_predict(const GpModel& model, const Matrix& x_query);

struct LengthScaleSearch {
  double best = 0.0;
  double best_error = 0.0;
  std::vector<double> grid;
  std::vector<double> errors;  // validation relative Frobenius error per grid point
};

/// Grid search on the validation relative error; ties go to the smaller scale.
LengthScaleSearch tune_length_scale(const Matrix& x_train, const Matrix& y_train, const Matrix& x_val,
                                    const Matrix& y_val, const std::vector<double>& grid, double noise);

/// Median pairwise distance between columns (reference scale for relative grids).
double median_pairwise_distance(const Matrix& x);

void save_gp(const GpModel& model, const std::filesystem::path& dir);
GpModel load_gp(const std::filesystem::path& dir);

}  // namespace mlop
