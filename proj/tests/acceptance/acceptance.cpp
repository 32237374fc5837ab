// End-to-end acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <Eigen/SVD>
#include <Eigen/QR>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mlop/error.hpp"
#include "mlop/metrics.hpp"
#include "mlop/operators.hpp"
#include "mlop/pipeline.hpp"
#include "mlop/reduction.hpp"
#include "mlop/rng.hpp"
#include "mlop/synthfire.hpp"
#include "test_support.hpp"

using namespace mlop;
using mlop::pipeline::json;
using mlop::testing::random_matrix;
using mlop::testing::rel_diff;
using mlop::testing::TempDir;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Outcome of one criterion; `detail` lists the measured numbers.
struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v) { return pipeline::format_double(v); }

json read_json(const fs::path& p) { return json::parse(read_text(p)); }

/// Keeps the current directory for the lifetime of the guard.
class ChangeDir {
 public:
  explicit ChangeDir(const fs::path& to) : old_(fs::current_path()) { fs::current_path(to); }
  ~ChangeDir() { fs::current_path(old_); }

 private:
  fs::path old_;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Matrix orthonormal_columns(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, k, seed));
  return qr.householderQ() * Matrix::Identity(n, k);
}

// --- 1 ---------------------------------------------------------------------
void closed_form_vs_gram(Outcome& o) {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Matrix f = random_matrix(200, 80, 10 + k);
    const Matrix g = random_matrix(200, 200, 100 + k) * f / 15.0 + 0.1 * random_matrix(200, 80, 200 + k);
    const ReducedBasis bi = fit_basis(f, 1.0, 8), bo = fit_basis(g, 1.0, 8);
    const Matrix closed = fit_linear_closed_form(bi, bo).theta;
    const Matrix gram = fit_linear_gram(bi, bo).theta;
    worst = std::max(worst, rel_diff(gram, closed));
  }
  o.detail << "max rel diff " << fmt(worst);
  o.require(worst < 1e-7, "rel diff < 1e-7");
}

// --- 2 ---------------------------------------------------------------------
void linear_recovery(Outcome& o) {
  const Eigen::Index n = 200;
  const Matrix u = orthonormal_columns(n, 6, 1);
  const Vector mu = random_matrix(n, 1, 2);
  auto fields = [&](Eigen::Index m, std::uint64_t seed) -> Matrix {
    Matrix s = u * random_matrix(6, m, seed) * 3.0;
    s.colwise() += mu;
    return s;
  };
  const Matrix l = random_matrix(n, 6, 3) * random_matrix(6, n, 4);  // rank 6
  const Matrix f_train = fields(80, 5), f_test = fields(20, 6);
  const Matrix g_train = l * f_train, g_test = l * f_test;
  const ReducedBasis bi = fit_basis(f_train, 1.0, 6), bo = fit_basis(g_train, 1.0, 6);
  const OperatorModel m = fit_linear_closed_form(bi, bo, false);
  auto proj = [](const ReducedBasis& b, const Matrix& x) { return rel_diff(decode(b, encode(b, x)), x); };
  const double train_excess = rel_diff(predict(m, f_train), g_train) - proj(bo, g_train);
  const double test_excess = rel_diff(predict(m, f_test), g_test) - proj(bo, g_test);
  o.detail << "train excess " << fmt(train_excess) << ", holdout excess " << fmt(test_excess);
  o.require(train_excess < 1e-6 && test_excess < 1e-6, "excess error < 1e-6");
}

// --- 3 ---------------------------------------------------------------------
void quadratic_recovery(Outcome& o) {
  const Eigen::Index r = 5, features = quadratic_feature_count(r), m = 3 * features;
  const Matrix a = random_matrix(m, r, 7);
  const Matrix c = random_matrix(4, features, 8);
  const Matrix f = build_interaction_matrix(a);
  const Matrix targets = f * c.transpose();
  const Matrix theta = solve_regularized(f, targets, 0.0);
  const double err = rel_diff(f * theta.transpose(), targets);
  o.detail << "M=" << m << ", training rel err " << fmt(err) << ", coefficient rel err " << fmt(rel_diff(theta, c));
  o.require(err < 1e-6, "training rel err < 1e-6");
}

// --- 4 ---------------------------------------------------------------------
void energy_identities(Outcome& o) {
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes = {{200, 40}, {40, 200}, {100, 100}, {300, 20}, {20, 300},
                                                                     {150, 60}, {60, 150}, {80, 80},   {500, 30}, {25, 25}};
  double worst_energy = 0.0, worst_ortho = 0.0;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto [rows, cols] = shapes[k];
    const auto [c, mean] = mean_center(random_matrix(rows, cols, 40 + k));
    // Independent spectrum: one-sided Jacobi SVD of the centered data.
    const Vector sv = Eigen::JacobiSVD<Matrix>(c).singularValues();
    const Eigen::Index full = numerical_rank(singular_values(c));
    for (Eigen::Index r = 1; r <= full; ++r) {
      const ReducedBasis b = truncated_svd(c, r, mean);
      // Relative truncation error against the relative spectral tail.
      const double err = (c - b.modes * (b.modes.transpose() * c)).norm() / c.norm();
      const double tail = std::sqrt(sv.tail(sv.size() - r).squaredNorm()) / sv.norm();
      worst_energy = std::max(worst_energy, std::abs(err - tail));
      if (r == full)
        worst_ortho = std::max(
            worst_ortho, (b.modes.transpose() * b.modes - Matrix::Identity(r, r)).cwiseAbs().maxCoeff());
    }
  }
  o.detail << "max rel energy gap " << fmt(worst_energy) << ", max orthonormality defect " << fmt(worst_ortho);
  o.require(worst_energy <= 1e-8, "energy identity within 1e-8");
  o.require(worst_ortho <= 1e-10, "orthonormality within 1e-10");
}

// --- 5 ---------------------------------------------------------------------
void metric_oracles(Outcome& o) {
  Rng rng(55);
  int roc_mismatch = 0;
  for (int k = 0; k < 50; ++k) {
    Vector pred(100);
    Mask obs(100);
    const auto levels = 2 + rng.below(40);
    for (Eigen::Index i = 0; i < 100; ++i) {
      pred(i) = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
      obs(i) = rng.uniform() < 0.35;
    }
    const RocCurve c = roc(pred, obs);
    if (c.degenerate) continue;
    const double pos = static_cast<double>(obs.count()), neg = 100.0 - pos;
    for (std::size_t p = 0; p < c.size(); ++p) {
      int tp = 0, fp = 0;
      for (Eigen::Index i = 0; i < 100; ++i)
        if (pred(i) > c.thresholds[p]) obs(i) ? ++tp : ++fp;
      roc_mismatch += (c.tpr[p] != tp / pos || c.fpr[p] != fp / neg) ? 1 : 0;
    }
  }

  bool separable_ok = true;
  for (int k = 0; k < 20; ++k) {
    Vector pred(100);
    Mask obs(100);
    for (Eigen::Index i = 0; i < 100; ++i) {
      obs(i) = rng.uniform() < 0.4;
      pred(i) = obs(i) ? 1.0 + rng.uniform() : rng.uniform();
    }
    if (obs.count() == 0 || obs.count() == 100) continue;
    separable_ok = separable_ok && auc(roc(pred, obs)) == 1.0;
  }

  int iou_mismatch = 0;
  for (int k = 0; k < 1000; ++k) {
    Mask a(64), b(64);
    std::vector<int> sa, sb;
    const double pa = rng.uniform(), pb = rng.uniform();
    for (int i = 0; i < 64; ++i) {
      a(i) = rng.uniform() < pa;
      b(i) = rng.uniform() < pb;
      if (a(i)) sa.push_back(i);
      if (b(i)) sb.push_back(i);
    }
    std::vector<int> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(uni));
    const double expected = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    iou_mismatch += iou(a, b) != expected ? 1 : 0;
  }

  int tau_mismatch = 0;
  for (int k = 0; k < 30; ++k) {
    Matrix obs(40, 6);
    for (Eigen::Index i = 0; i < obs.size(); ++i)
      obs.data()[i] = rng.uniform() < 0.4 ? 0.0 : std::round(rng.uniform(0.0, 20.0)) / 4.0;
    if (obs.isZero(0.0)) continue;
    for (double beta : {0.1, 0.5, 0.8, 0.95}) {
      std::vector<double> candidates{0.0};
      for (Eigen::Index i = 0; i < obs.size(); ++i)
        if (obs.data()[i] > 0.0) candidates.push_back(obs.data()[i]);
      double best = 0.0;
      for (double t : candidates) {
        double sum = 0.0;
        int used = 0;
        for (Eigen::Index j = 0; j < obs.cols(); ++j) {
          const auto pos = (obs.col(j).array() > 0.0).count();
          if (pos == 0) continue;
          sum += static_cast<double>((obs.col(j).array() > t).count()) / static_cast<double>(pos);
          ++used;
        }
        if (sum / used > beta) best = std::max(best, t);
      }
      tau_mismatch += smoke_threshold(obs, beta) != best ? 1 : 0;
    }
  }
  o.detail << "ROC mismatches " << roc_mismatch << ", separable AUC==1 " << (separable_ok ? "yes" : "no")
           << ", IoU mismatches " << iou_mismatch << ", tau mismatches " << tau_mismatch;
  o.require(roc_mismatch == 0 && separable_ok && iou_mismatch == 0 && tau_mismatch == 0, "all oracles agree");
}

// --- 6 ---------------------------------------------------------------------
void simulator_physics(Outcome& o) {
  // Circular front: R0 = 20 cells, S0 T = 60 cells, 200x200 grid.
  const Grid2D g{200, 200, 10.0, 10.0};
  const std::int64_t c = 100;
  const double r0 = 200.0, dt = 4.0;
  const int steps = 150;
  Vector psi = synth::initial_level_set(g, c, c, r0);
  const Vector s = Vector::Constant(g.size(), 1.0);
  for (int k = 0; k < steps; ++k) psi = synth::propagate_front(psi, s, g, dt);
  const double exact = r0 + dt * steps;
  double worst = 0.0;
  for (std::int64_t y = 0; y < g.ny; ++y)
    for (std::int64_t x = 0; x + 1 < g.nx; ++x) {
      const double a = psi(g.index(x, y)), b = psi(g.index(x + 1, y));
      if ((a < 0.0) == (b < 0.0)) continue;
      const double xs = static_cast<double>(x - c) + a / (a - b);
      worst = std::max(worst, std::abs(std::hypot(xs * g.dx, static_cast<double>(y - c) * g.dy) - exact));
    }

  // Zero-flux transport with a sheared wind and diffusion.
  const Grid2D tg{60, 50, 100.0, 100.0};
  Vector u(tg.size()), v(tg.size());
  for (std::int64_t y = 0; y < tg.ny; ++y)
    for (std::int64_t x = 0; x < tg.nx; ++x) {
      u(tg.index(x, y)) = 3.0 * std::sin(0.2 * static_cast<double>(y));
      v(tg.index(x, y)) = 2.0 * std::cos(0.15 * static_cast<double>(x));
    }
  Vector conc = random_matrix(tg.size(), 1, 66).cwiseAbs();
  const Vector zero = Vector::Zero(tg.size());
  double mass_drift = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double before = conc.sum();
    conc = synth::transport_smoke(conc, u, v, tg, 40.0, zero, 10.0, synth::Boundary::ZeroFlux);
    mass_drift = std::max(mass_drift, std::abs(conc.sum() - before) / before);
  }

  // Monotonicity on 10 seeded scenarios drawn from the default sampler.
  int violations = 0;
  const synth::SamplerConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    synth::FireScenario sc = synth::sample_scenario(cfg, static_cast<std::int64_t>(seed), 1000 + seed);
    sc.randomize = true;
    const auto snaps = synth::run_scenario(sc, seed);
    for (std::size_t k = 1; k < snaps.size(); ++k) {
      violations += static_cast<int>((snaps[k].time_since_ignition.array() < snaps[k - 1].time_since_ignition.array()).count());
      violations += static_cast<int>((snaps[k].cumulative_smoke.array() < snaps[k - 1].cumulative_smoke.array()).count());
    }
  }
  o.detail << "front error " << fmt(worst / g.dx) << " cells, max mass drift/step " << fmt(mass_drift)
           << ", monotonicity violations " << violations;
  o.require(worst <= 2.0 * g.dx, "front within 2 cells");
  o.require(mass_drift <= 1e-10, "mass drift <= 1e-10 per step");
  o.require(violations == 0, "monotone checkpoints");
}

// --- 7 ---------------------------------------------------------------------
void end_to_end(Outcome& o, const fs::path& root) {
  const std::string manifest =
      pipeline::run_command("generate", {{"n_fires", 60}, {"seed", 1}}, root / "data").at("manifest");
  pipeline::run_command("fit", {{"manifest", manifest}, {"kind", "linear"}}, root / "linear");
  // Ridge weight picked on the validation part: best median AUC, ties to the smaller lambda.
  json grid = json::array();
  for (int e = 5; e <= 18; ++e) grid.push_back(std::pow(10.0, e));
  const json sweep =
      pipeline::run_command("sweep", {{"axis", "lambda"}, {"grid", grid}, {"base", {{"manifest", manifest}}}}, root / "sweep");
  double lambda = 0.0, best_auc = -1.0;
  for (const auto& row : sweep.at("rows"))
    if (row.at("median_auc").get<double>() > best_auc) {
      best_auc = row.at("median_auc").get<double>();
      lambda = row.at("value").get<double>();
    }
  pipeline::run_command("fit", {{"manifest", manifest}, {"kind", "quadratic"}, {"lambda", lambda}}, root / "quadratic");
  const json lin = pipeline::run_command(
      "evaluate", {{"model", (root / "linear" / "model").string()}, {"manifest", manifest}, {"beta", 0.95}}, root / "eval_lin");
  const json quad = pipeline::run_command(
      "evaluate", {{"model", (root / "quadratic" / "model").string()}, {"manifest", manifest}, {"beta", 0.95}},
      root / "eval_quad");
  const double la = lin.at("median_auc"), qa = quad.at("median_auc");
  const json lm = read_json(root / "linear" / "metrics.json");
  o.detail << "snapshots " << load_dataset(manifest).inputs.cols() << ", r=" << lm.at("r").get<int>()
           << ", r_out=" << lm.at("r_out").get<int>() << ", tau " << fmt(lin.at("tau")) << ", linear AUC " << fmt(la)
           << " (IoU " << fmt(lin.at("median_iou")) << "), quadratic AUC " << fmt(qa) << " (IoU "
           << fmt(quad.at("median_iou")) << ", lambda " << fmt(lambda) << ")";
  o.require(la >= 0.85 && qa >= 0.85, "median AUC >= 0.85");
  o.require(qa >= la - 0.02, "quadratic >= linear - 0.02");
}

// --- 8 ---------------------------------------------------------------------
void qoi_ordering(Outcome& o, const fs::path& root) {
  const std::string manifest =
      pipeline::run_command("generate", {{"n_fires", 200}, {"seed", 1}}, root / "data").at("manifest");
  const json r = pipeline::run_command("qoi",
                                       {{"manifest", manifest},
                                        {"schedule", {0.1}},
                                        {"repetitions", 20},
                                        {"kind", "linear"},
                                        {"energy", 0.95},
                                        {"surrogate_snapshots", "final"}},
                                       root / "qoi");
  std::map<std::string, double> median;
  Eigen::Index m = 0;
  for (const auto& row : r.at("rows")) {
    median[row.at("estimator")] = row.at("median");
    m = row.at("m");
  }
  o.detail << "holdout " << r.at("holdout").get<int>() << ", M'=" << m << ", median rel err: full " << fmt(median["full"])
           << ", reduced " << fmt(median["reduced"]) << ", surrogate " << fmt(median["surrogate"]);
  o.require(median["surrogate"] <= median["full"], "surrogate <= full MC");
}

// --- 9 ---------------------------------------------------------------------
void ridge_behavior(Outcome& o, const fs::path& root) {
  const std::string manifest =
      pipeline::run_command("generate", {{"n_fires", 30}, {"seed", 2}}, root / "data").at("manifest");
  const std::vector<double> grid{1e-2, 1e0, 1e2, 1e4, 1e6};
  const json sweep = pipeline::run_command(
      "sweep", {{"axis", "lambda"}, {"grid", grid}, {"base", {{"manifest", manifest}}}}, root / "sweep");
  const auto csv = read_csv(root / "sweep" / "sweep.csv");
  bool monotone = true, reproduced = csv.size() == grid.size() + 1;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size() && reproduced; ++k) {
    const auto& row = csv[k + 1];
    const double norm = std::strtod(row[7].c_str(), nullptr);
    monotone = monotone && norm <= prev;
    prev = norm;
    const fs::path fit_dir = root / ("fit_" + std::to_string(k));
    const json metrics =
        pipeline::run_command("fit", {{"manifest", manifest}, {"kind", "quadratic"}, {"lambda", grid[k]}}, fit_dir);
    const json eval = pipeline::run_command(
        "evaluate", {{"model", (fit_dir / "model").string()}, {"manifest", manifest}, {"part", "val"}, {"beta", 0.95}},
        root / ("eval_" + std::to_string(k)));
    reproduced = reproduced && std::strtod(row[1].c_str(), nullptr) == grid[k] &&
                 std::strtod(row[2].c_str(), nullptr) == eval.at("tau").get<double>() &&
                 std::strtod(row[3].c_str(), nullptr) == eval.at("median_auc").get<double>() &&
                 std::strtod(row[4].c_str(), nullptr) == eval.at("median_iou").get<double>() &&
                 std::stoi(row[5]) == metrics.at("r").get<int>() && std::stoi(row[6]) == metrics.at("r_out").get<int>() &&
                 norm == metrics.at("theta_fro_norm").get<double>() &&
                 std::strtod(row[8].c_str(), nullptr) == eval.at("rel_frobenius_error").get<double>();
  }
  o.detail << "theta norms";
  for (const auto& row : sweep.at("rows")) o.detail << " " << fmt(row.at("theta_fro_norm"));
  o.detail << "; rows reproduced by refits: " << (reproduced ? "yes" : "no");
  o.require(monotone, "norm non-increasing in lambda");
  o.require(reproduced, "sweep rows equal refit values");
}

// --- 10 --------------------------------------------------------------------
void run_pipeline(const fs::path& dir) {
  ChangeDir cd(dir);
  pipeline::run_command("generate", {{"n_fires", 12}, {"seed", 5}}, "data");
  const std::string manifest = "data/manifest.json";
  pipeline::run_command("fit", {{"manifest", manifest}}, "linear");
  pipeline::run_command("fit", {{"manifest", manifest}, {"kind", "quadratic"}}, "quadratic");
  pipeline::run_command("evaluate", {{"manifest", manifest}, {"model", "linear/model"}}, "eval_linear");
  pipeline::run_command("evaluate", {{"manifest", manifest}, {"model", "quadratic/model"}}, "eval_quadratic");
  pipeline::run_command("qoi", {{"manifest", manifest}, {"schedule", {0.5, 1.0}}, {"repetitions", 4}}, "qoi");
  pipeline::run_command("sweep", {{"axis", "energy"}, {"grid", {0.9, 0.99}}, {"base", {{"manifest", manifest}}}},
                        "sweep");
  pipeline::run_command("gp", {{"manifest", manifest}}, "gp");
}

void determinism_and_io(Outcome& o, const fs::path& root) {
  fs::create_directories(root / "a");
  fs::create_directories(root / "b");
  run_pipeline(root / "a");
  run_pipeline(root / "b");
  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file() || entry.path().filename() == "timings.json") continue;
    const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
    ++compared;
    if (!fs::exists(other) || read_text(entry.path()) != read_text(other)) ++differing;
  }

  int roundtrip_failures = 0;
  Rng rng(77);
  for (int k = 0; k < 100; ++k) {
    const auto rows = static_cast<Eigen::Index>(rng.below(40)), cols = static_cast<Eigen::Index>(rng.below(40));
    Matrix m = random_matrix(rows, cols, 500 + static_cast<std::uint64_t>(k));
    if (m.size() > 0 && k % 3 == 0) m *= 1e300;
    if (m.size() > 0 && k % 5 == 0) m.data()[0] = std::numeric_limits<double>::denorm_min();
    const fs::path p = root / "m.mlop";
    write_matrix(m, p);
    const Matrix back = read_matrix(p);
    const bool same = back.rows() == m.rows() && back.cols() == m.cols() &&
                      std::equal(m.data(), m.data() + m.size(), back.data(), [](double x, double y) {
                        return std::memcmp(&x, &y, sizeof x) == 0;
                      });
    roundtrip_failures += same ? 0 : 1;
  }
  o.detail << compared << " files compared, " << differing << " differ; matrix round-trip failures "
           << roundtrip_failures << "/100";
  o.require(compared > 20 && differing == 0, "bitwise-identical reruns");
  o.require(roundtrip_failures == 0, "bitwise matrix round-trips");
}

// --- 11 --------------------------------------------------------------------
void performance(Outcome& o, const fs::path& root) {
  const std::string manifest =
      pipeline::run_command("generate", {{"n_fires", 60}, {"seed", 1}}, root / "data").at("manifest");
  const Dataset d = load_dataset(manifest);
  const DatasetSplit split = split_by_fire(d.inputs.labels, {0.45, 0.10, 0.45}, 7);
  const Matrix x = select_columns(d.inputs, split.train).data, y = select_columns(d.outputs, split.train).data;
  const Matrix xt = select_columns(d.inputs, split.test).data;
  const auto t0 = Clock::now();
  const OperatorModel m = fit_linear_closed_form(fit_basis(x, 0.95), fit_basis(y, 0.95));
  const double fit_s = seconds_since(t0);
  const auto t1 = Clock::now();
  const Matrix pred = predict(m, xt);
  const double per_input_ms = 1e3 * seconds_since(t1) / static_cast<double>(xt.cols());
  o.detail << "linear fit " << fmt(fit_s) << " s on " << x.cols() << " snapshots, prediction " << fmt(per_input_ms)
           << " ms/input (" << pred.cols() << " inputs)";
  o.require(fit_s < 1.0, "fit < 1 s");
  o.require(per_input_ms < 1.0, "prediction < 1 ms/input");
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // 0: no runtime requirement
  std::function<void(Outcome&, const fs::path&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "closed form equals Gram solve", 5.0, [](Outcome& o, const fs::path&) { closed_form_vs_gram(o); }},
      {2, "exact linear recovery", 2.0, [](Outcome& o, const fs::path&) { linear_recovery(o); }},
      {3, "exact quadratic recovery", 2.0, [](Outcome& o, const fs::path&) { quadratic_recovery(o); }},
      {4, "PCA energy identities", 0.0, [](Outcome& o, const fs::path&) { energy_identities(o); }},
      {5, "metric oracles", 0.0, [](Outcome& o, const fs::path&) { metric_oracles(o); }},
      {6, "simulator physics", 60.0, [](Outcome& o, const fs::path&) { simulator_physics(o); }},
      {7, "end-to-end synthetic classification", 300.0, end_to_end},
      {8, "QoI estimator ordering", 120.0, qoi_ordering},
      {9, "ridge behavior and sweep reproducibility", 0.0, ridge_behavior},
      {10, "determinism and matrix IO", 0.0, determinism_and_io},
      {11, "performance sanity", 0.0, performance},
  };

  TempDir scratch("acceptance");
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      const fs::path dir = scratch / ("c" + std::to_string(c.id));
      fs::create_directories(dir);
      c.run(o, dir);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double elapsed = seconds_since(t0);
    if (c.budget_s > 0.0) o.require(elapsed < c.budget_s, "runtime < " + fmt(c.budget_s) + " s");
    std::printf("%s  %2d  %-42s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), elapsed,
                o.detail.str().c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
