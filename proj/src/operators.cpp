#include "mlop/operators.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mlop/error.hpp"

namespace mlop {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kMaxCondition = 1e12;

void check_aligned(const ReducedBasis& in, const ReducedBasis& out) {
  if (in.sample_count() != out.sample_count())
    throw ConfigError("input and output bases were built from different training sets (" +
                      std::to_string(in.sample_count()) + " vs " + std::to_string(out.sample_count()) +
                      " snapshots)");
  if (in.rank() < 1 || out.rank() < 1) throw ConfigError("bases must have rank >= 1");
  if (!(in.sing_vals.minCoeff() > 0.0) || !(out.sing_vals.minCoeff() > 0.0))
    throw NumericalError("zero singular value in a truncated basis");
}

// Training coefficients of a basis, one row per snapshot: A = V_r Sigma_r.
Matrix training_rows(const ReducedBasis& b) { return b.right_factors * b.sing_vals.asDiagonal(); }

}  // namespace

LinearOperatorModel fit_linear_closed_form(const ReducedBasis& input_basis,
                                           const ReducedBasis& output_basis, bool clamp_nonneg) {
  check_aligned(input_basis, output_basis);
  LinearOperatorModel m;
  m.theta = output_basis.sing_vals.asDiagonal() *
            (output_basis.right_factors.transpose() * input_basis.right_factors) *
            input_basis.sing_vals.cwiseInverse().asDiagonal();
  m.input_basis = input_basis;
  m.output_basis = output_basis;
  m.clamp_nonneg = clamp_nonneg;
  return m;
}

GramSystem assemble_linear_gram(const Matrix& input_coeffs, const Matrix& output_coeffs) {
  if (input_coeffs.cols() != output_coeffs.cols())
    throw ConfigError("assemble_linear_gram: sample counts differ");
  if (input_coeffs.cols() < 1) throw ConfigError("assemble_linear_gram: no samples");
  const double inv_m = 1.0 / static_cast<double>(input_coeffs.cols());
  GramSystem g;
  g.gram = inv_m * (input_coeffs * input_coeffs.transpose());
  g.rhs = inv_m * (output_coeffs * input_coeffs.transpose());
  return g;
}

Matrix solve_linear_gram(const Matrix& input_coeffs, const Matrix& output_coeffs) {
  if (input_coeffs.cols() < input_coeffs.rows())
    throw NumericalError("solve_linear_gram: fewer samples than input coefficients");
  const GramSystem g = assemble_linear_gram(input_coeffs, output_coeffs);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g.gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= kMaxCondition)
    throw NumericalError("solve_linear_gram: Gram matrix is singular or ill-conditioned");
  Eigen::LDLT<Matrix> ldlt(g.gram);
  // theta * G = y  <=>  G * theta^T = y^T (G symmetric).
  return ldlt.solve(g.rhs.transpose()).transpose();
}

LinearOperatorModel fit_linear_gram(const ReducedBasis& input_basis, const ReducedBasis& output_basis,
                                    bool clamp_nonneg) {
  check_aligned(input_basis, output_basis);
  LinearOperatorModel m;
  m.theta = solve_linear_gram(training_rows(input_basis).transpose(),
                              training_rows(output_basis).transpose());
  m.input_basis = input_basis;
  m.output_basis = output_basis;
  m.clamp_nonneg = clamp_nonneg;
  return m;
}

Matrix build_interaction_matrix(const Matrix& a) {
  const Eigen::Index r = a.cols();
  if (r < 1) throw ConfigError("build_interaction_matrix: need r >= 1");
  Matrix out(a.rows(), quadratic_feature_count(r));
  out.leftCols(r) = a;
  Eigen::Index c = r;
  for (Eigen::Index k = 0; k < r; ++k)
    for (Eigen::Index l = k; l < r; ++l) out.col(c++) = a.col(k).cwiseProduct(a.col(l));
  return out;
}

Matrix solve_regularized(const Matrix& features, const Matrix& targets, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (features.rows() != targets.rows()) throw ConfigError("solve_regularized: row counts differ");
  const Eigen::Index p = features.cols();
  if (lambda > 0.0) {
    // Ridge through the thin SVD of the features (filter factors s / (s^2 + lambda)):
    // same solution as the normal equations without squaring the condition number.
    Eigen::BDCSVD<Matrix> svd(features, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const Vector filter = (s.array() / (s.array().square() + lambda)).matrix();
    return (svd.matrixV() * filter.asDiagonal() * (svd.matrixU().transpose() * targets)).transpose();
  }
  if (features.rows() < p)
    throw NumericalError("solve_regularized: singular system at lambda = 0 (" +
                         std::to_string(features.rows()) + " samples for " + std::to_string(p) +
                         " features); use lambda > 0");
  Eigen::BDCSVD<Matrix> svd(features, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (!(s(p - 1) > 0.0) || s(0) / s(p - 1) >= kMaxCondition)
    throw NumericalError("solve_regularized: feature matrix is rank deficient at lambda = 0");
  return svd.solve(targets).transpose();
}

QuadraticOperatorModel fit_quadratic(const ReducedBasis& input_basis, const ReducedBasis& output_basis,
                                     double lambda, bool clamp_nonneg) {
  check_aligned(input_basis, output_basis);
  QuadraticOperatorModel m;
  m.theta = solve_regularized(build_interaction_matrix(training_rows(input_basis)),
                              training_rows(output_basis), lambda);
  m.lambda = lambda;
  m.input_basis = input_basis;
  m.output_basis = output_basis;
  m.clamp_nonneg = clamp_nonneg;
  return m;
}

const ReducedBasis& input_basis(const OperatorModel& model) {
  return std::visit([](const auto& m) -> const ReducedBasis& { return m.input_basis; }, model);
}

const ReducedBasis& output_basis(const OperatorModel& model) {
  return std::visit([](const auto& m) -> const ReducedBasis& { return m.output_basis; }, model);
}

const Matrix& theta(const OperatorModel& model) {
  return std::visit([](const auto& m) -> const Matrix& { return m.theta; }, model);
}

Matrix apply_coefficients(const OperatorModel& model, const Matrix& input_coeffs) {
  if (const auto* lin = std::get_if<LinearOperatorModel>(&model)) return lin->theta * input_coeffs;
  const auto& quad = std::get<QuadraticOperatorModel>(model);
  return quad.theta * build_interaction_matrix(input_coeffs.transpose()).transpose();
}

Matrix predict(const OperatorModel& model, const Matrix& fields) {
  Matrix out = decode(output_basis(model), apply_coefficients(model, encode(input_basis(model), fields)));
  const bool clamp = std::visit([](const auto& m) { return m.clamp_nonneg; }, model);
  if (clamp) out = out.cwiseMax(0.0);
  return out;
}

void save_model(const OperatorModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  const bool quadratic = std::holds_alternative<QuadraticOperatorModel>(model);
  write_matrix(theta(model), dir / "theta.mlop");
  save_basis(input_basis(model), dir / "input_basis");
  save_basis(output_basis(model), dir / "output_basis");
  json meta = {{"kind", quadratic ? "quadratic" : "linear"},
               {"r", input_basis(model).rank()},
               {"r_out", output_basis(model).rank()},
               {"lambda", quadratic ? std::get<QuadraticOperatorModel>(model).lambda : 0.0},
               {"clamp_nonneg", std::visit([](const auto& m) { return m.clamp_nonneg; }, model)},
               {"theta", "theta.mlop"},
               {"input_basis", "input_basis"},
               {"output_basis", "output_basis"}};
  write_text(dir / "model.json", meta.dump(2) + "\n");
}

OperatorModel load_model(const fs::path& dir) {
  json meta;
  try {
    meta = json::parse(read_text(dir / "model.json"));
  } catch (const json::exception& e) {
    throw IoError("model.json in '" + dir.string() + "': " + e.what());
  }
  const std::string kind = meta.at("kind").get<std::string>();
  Matrix th = read_matrix(dir / meta.at("theta").get<std::string>());
  ReducedBasis in = load_basis(dir / meta.at("input_basis").get<std::string>());
  ReducedBasis out = load_basis(dir / meta.at("output_basis").get<std::string>());
  const bool clamp = meta.at("clamp_nonneg").get<bool>();
  const Eigen::Index features = kind == "quadratic" ? quadratic_feature_count(in.rank()) : in.rank();
  if (th.rows() != out.rank() || th.cols() != features)
    throw IoError("model in '" + dir.string() + "': theta shape does not match bases");
  if (kind == "linear") return LinearOperatorModel{std::move(th), std::move(in), std::move(out), clamp};
  if (kind == "quadratic")
    return QuadraticOperatorModel{std::move(th), meta.at("lambda").get<double>(), std::move(in),
                                  std::move(out), clamp};
  throw IoError("model in '" + dir.string() + "': unknown kind '" + kind + "'");
}

}  // namespace mlop
