#include "mlop/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

#include "mlop/error.hpp"
#include "mlop/gp.hpp"
#include "mlop/metrics.hpp"
#include "mlop/operators.hpp"
#include "mlop/reduction.hpp"
#include "mlop/rng.hpp"
#include "mlop/synthfire.hpp"
#include "mlop/tensorio.hpp"

namespace mlop::pipeline {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Like a JSON merge patch, except that null is an ordinary value: nullable
// options (train_condition, energy_out, ...) must survive the merge.
void overlay(json& target, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it.value().is_object() && target.contains(it.key()) && target[it.key()].is_object())
      overlay(target[it.key()], it.value());
    else
      target[it.key()] = it.value();
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename T>
T get(const json& config, const std::string& key) {
  try {
    return config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

fs::path require_path(const json& config, const std::string& key) {
  if (!config.contains(key) || !config.at(key).is_string() || config.at(key).get<std::string>().empty())
    throw ConfigError("config key '" + key + "' (path) is required");
  return fs::path(config.at(key).get<std::string>());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

DatasetSplit make_split(const Dataset& d, const json& split_cfg) {
  const auto fractions = get<std::array<double, 3>>(split_cfg, "fractions");
  return split_by_fire(d.inputs.labels, fractions, get<std::uint64_t>(split_cfg, "seed"));
}

// Columns of `part`, optionally restricted to one condition tag.
std::vector<Eigen::Index> part_columns(const Dataset& d, const DatasetSplit& split, const std::string& part,
                                       const json& condition) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index c : split.part(part))
    if (condition.is_null() || d.inputs.labels[static_cast<std::size_t>(c)].condition == condition.get<std::string>())
      cols.push_back(c);
  return cols;
}

struct Fitted {
  OperatorModel model;
  double encoding_s = 0.0;
  double training_s = 0.0;
};

ReducedBasis basis_for(const Matrix& snapshots, double energy, Eigen::Index rank) {
  return fit_basis(snapshots, energy, rank);
}

Fitted fit_model(const Matrix& inputs, const Matrix& outputs, const json& config) {
  Fitted f;
  const auto t0 = Clock::now();
  const double energy = get<double>(config, "energy");
  const double energy_out = config.at("energy_out").is_null() ? energy : get<double>(config, "energy_out");
  const ReducedBasis in = basis_for(inputs, energy, get<Eigen::Index>(config, "r"));
  const ReducedBasis out = basis_for(outputs, energy_out, get<Eigen::Index>(config, "r_out"));
  f.encoding_s = seconds_since(t0);
  const auto t1 = Clock::now();
  const bool clamp = get<bool>(config, "clamp");
  const std::string kind = get<std::string>(config, "kind");
  if (kind == "linear")
    f.model = fit_linear_closed_form(in, out, clamp);
  else if (kind == "quadratic")
    f.model = fit_quadratic(in, out, get<double>(config, "lambda"), clamp);
  else
    throw ConfigError("kind must be 'linear' or 'quadratic', got '" + kind + "'");
  f.training_s = seconds_since(t1);
  return f;
}

void write_report_files(const fs::path& out, const ClassificationReport& rep, const Dataset& d,
                        const std::vector<Eigen::Index>& cols, const json& summary_extra) {
  std::ostringstream csv;
  csv << "fire_id,time_index,auc,iou,rel_err\n";
  std::size_t degenerate = 0;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& l = d.inputs.labels[static_cast<std::size_t>(cols[k])];
    const auto& s = rep.per_snapshot[k];
    degenerate += s.degenerate ? 1 : 0;
    csv << l.fire_id << ',' << l.time_index << ',' << format_double(s.auc) << ',' << format_double(s.iou) << ','
        << format_double(s.rel_err) << '\n';
  }
  write_text(out / "report.csv", csv.str());

  std::ostringstream roc_csv;
  roc_csv << "snapshot,fire_id,time_index,threshold,fpr,tpr\n";
  for (std::size_t k = 0; k < rep.curves.size(); ++k) {
    const auto& l = d.inputs.labels[static_cast<std::size_t>(cols[k])];
    const auto& c = rep.curves[k];
    for (std::size_t p = 0; p < c.size(); ++p)
      roc_csv << k << ',' << l.fire_id << ',' << l.time_index << ',' << format_double(c.thresholds[p]) << ','
              << format_double(c.fpr[p]) << ',' << format_double(c.tpr[p]) << '\n';
  }
  write_text(out / "roc.csv", roc_csv.str());

  json summary = {{"median_auc", rep.median_auc},
                  {"auc_q25", rep.auc_q25},
                  {"auc_q75", rep.auc_q75},
                  {"median_iou", rep.median_iou},
                  {"iou_q25", rep.iou_q25},
                  {"iou_q75", rep.iou_q75},
                  {"tau", rep.tau},
                  {"n_snapshots", cols.size()},
                  {"degenerate_snapshots", degenerate}};
  summary.update(summary_extra);
  write_json(out / "report.json", summary);
}

// Cumulative singular-value fraction captured by a basis.
double captured_energy(const ReducedBasis& b) { return b.sing_vals.sum() / b.full_sing_vals.sum(); }

// Relative error of projecting `fields` onto the basis.
double projection_error(const ReducedBasis& b, const Matrix& fields) {
  return relative_frobenius_error(decode(b, encode(b, fields)), fields);
}

std::vector<double> get_grid(const json& config, const std::string& key) {
  auto grid = get<std::vector<double>>(config, key);
  if (grid.empty()) throw ConfigError("config key '" + key + "' must be a non-empty list");
  return grid;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

json defaults_generate() {
  return {{"n_fires", 60}, {"seed", 1}, {"sampler", synth::to_json(synth::SamplerConfig{})}};
}

json defaults_fit() {
  return {{"manifest", ""},
          {"split", {{"seed", 7}, {"fractions", {0.45, 0.10, 0.45}}}},
          {"kind", "linear"},
          {"energy", 0.95},
          {"energy_out", nullptr},
          {"r", 0},
          {"r_out", 0},
          {"lambda", 1e5},
          {"clamp", true},
          {"train_condition", nullptr}};
}

json defaults_evaluate() {
  return {{"model", ""},
          {"manifest", ""},
          {"split", ""},
          {"part", "test"},
          {"beta", 0.95},
          {"n_thresholds", 0},
          {"condition", nullptr}};
}

json defaults_qoi() {
  return {{"manifest", ""},
          {"split", {{"seed", 7}, {"fractions", {0.45, 0.10, 0.45}}}},
          {"estimators", {"full", "reduced", "surrogate"}},
          {"schedule", {0.1, 0.2, 0.4, 0.7, 1.0}},
          {"repetitions", 20},
          {"seed", 11},
          {"kind", "linear"},
          {"energy", 0.95},
          {"lambda", 1e5},
          {"surrogate_snapshots", "final"}};
}

json defaults_sweep() {
  json base = defaults_fit();
  return {{"axis", "beta"},
          {"grid", {0.95}},
          {"base", base},
          {"beta", 0.95},
          {"n_thresholds", 0},
          {"gp", {{"subsample", 500}, {"noise", 1e-6}, {"relative_grid", true}, {"seed", 3}}}};
}

json defaults_gp() {
  return {{"manifest", ""},
          {"split", {{"seed", 7}, {"fractions", {0.45, 0.10, 0.45}}}},
          {"variant", "coeffs"},
          {"subsample", 500},
          {"length_scales", {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}},
          {"relative_grid", true},
          {"noise", 1e-6},
          {"seed", 3},
          {"energy", 0.95},
          {"beta", 0.95},
          {"part", "test"},
          {"n_thresholds", 0}};
}

json resolve_config(const std::string& command, const json& user) {
  json config;
  if (command == "generate")
    config = defaults_generate();
  else if (command == "fit")
    config = defaults_fit();
  else if (command == "evaluate")
    config = defaults_evaluate();
  else if (command == "qoi")
    config = defaults_qoi();
  else if (command == "sweep")
    config = defaults_sweep();
  else if (command == "gp")
    config = defaults_gp();
  else
    throw ConfigError("unknown command '" + command + "'");
  if (!user.is_null() && !user.is_object()) throw ConfigError("config must be a JSON object");
  if (!user.is_null()) overlay(config, user);
  config["command"] = command;
  return config;
}

json cmd_generate(const json& config, const fs::path& out) {
  const auto n_fires = get<std::int64_t>(config, "n_fires");
  const synth::SamplerConfig sampler = synth::sampler_from_json(config.at("sampler"));
  const Dataset d = synth::generate_dataset(n_fires, sampler, get<std::uint64_t>(config, "seed"));
  const fs::path manifest = save_dataset(d, out);
  return {{"manifest", manifest.string()}, {"snapshots", d.inputs.cols()}, {"field_size", d.inputs.rows()}};
}

json cmd_fit(const json& config, const fs::path& out) {
  const Dataset d = load_dataset(require_path(config, "manifest"));
  const DatasetSplit split = make_split(d, config.at("split"));
  const auto train = part_columns(d, split, "train", config.at("train_condition"));
  if (train.empty()) throw ConfigError("fit: training part is empty");
  const Matrix x = select_columns(d.inputs, train).data;
  const Matrix y = select_columns(d.outputs, train).data;

  const Fitted f = fit_model(x, y, config);
  save_model(f.model, out / "model");
  write_json(out / "split.json", to_json(split));

  const ReducedBasis& in = input_basis(f.model);
  const ReducedBasis& ob = output_basis(f.model);
  json metrics = {{"kind", get<std::string>(config, "kind")},
                  {"r", in.rank()},
                  {"r_out", ob.rank()},
                  {"n_train", train.size()},
                  {"train_rel_err", relative_frobenius_error(predict(f.model, x), y)},
                  {"train_input_projection_err", projection_error(in, x)},
                  {"train_output_projection_err", projection_error(ob, y)},
                  {"input_energy", captured_energy(in)},
                  {"output_energy", captured_energy(ob)},
                  {"theta_fro_norm", theta(f.model).norm()}};
  const auto val = part_columns(d, split, "val", config.at("train_condition"));
  if (!val.empty()) {
    metrics["val_input_projection_err"] = projection_error(in, select_columns(d.inputs, val).data);
    metrics["val_output_projection_err"] = projection_error(ob, select_columns(d.outputs, val).data);
  }
  write_json(out / "metrics.json", metrics);
  write_json(out / "timings.json", {{"encoding_s", f.encoding_s}, {"training_s", f.training_s}});
  return metrics;
}

json cmd_evaluate(const json& config, const fs::path& out) {
  const fs::path model_dir = require_path(config, "model");
  const Dataset d = load_dataset(require_path(config, "manifest"));
  const fs::path split_path =
      get<std::string>(config, "split").empty() ? model_dir.parent_path() / "split.json" : require_path(config, "split");
  const DatasetSplit split = split_from_json(json::parse(read_text(split_path)));
  const OperatorModel model = load_model(model_dir);
  const std::string part = get<std::string>(config, "part");
  const double beta = get<double>(config, "beta");

  const auto val = part_columns(d, split, "val", config.at("condition"));
  if (val.empty()) throw ConfigError("evaluate: validation part is empty (needed for tau)");
  const double tau = smoke_threshold(select_columns(d.outputs, val).data, beta);

  const auto cols = part_columns(d, split, part, config.at("condition"));
  if (cols.empty()) throw ConfigError("evaluate: part '" + part + "' is empty");
  const Matrix x = select_columns(d.inputs, cols).data;
  const Matrix y = select_columns(d.outputs, cols).data;
  const auto t0 = Clock::now();
  const Matrix pred = predict(model, x);
  const double predict_s = seconds_since(t0);

  const ClassificationReport rep =
      classification_report(pred, y, tau, get<std::size_t>(config, "n_thresholds"), true);
  json extra = {{"beta", beta},
                {"part", part},
                {"rel_frobenius_error", relative_frobenius_error(pred, y)},
                {"kind", std::holds_alternative<QuadraticOperatorModel>(model) ? "quadratic" : "linear"}};
  write_report_files(out, rep, d, cols, extra);
  write_json(out / "timings.json",
             {{"predict_s", predict_s}, {"per_input_ms", 1e3 * predict_s / static_cast<double>(cols.size())}});
  json summary = json::parse(read_text(out / "report.json"));
  return summary;
}

json cmd_qoi(const json& config, const fs::path& out) {
  const Dataset d = load_dataset(require_path(config, "manifest"));
  const DatasetSplit split = make_split(d, config.at("split"));
  const auto estimators = get<std::vector<std::string>>(config, "estimators");
  for (const auto& e : estimators)
    if (e != "full" && e != "reduced" && e != "surrogate") throw ConfigError("unknown QoI estimator '" + e + "'");
  const auto schedule = get_grid(config, "schedule");
  const int reps = get<int>(config, "repetitions");
  if (reps < 1) throw ConfigError("repetitions must be >= 1");
  const auto seed = get<std::uint64_t>(config, "seed");
  const double energy = get<double>(config, "energy");
  const auto surrogate_snapshots = get<std::string>(config, "surrogate_snapshots");
  if (surrogate_snapshots != "final" && surrogate_snapshots != "all")
    throw ConfigError("surrogate_snapshots must be 'final' or 'all'");

  // Holdout = final-time snapshots of test fires.
  const SnapshotMatrix test_in = select_columns(d.inputs, split.test);
  const SnapshotMatrix test_out = select_columns(d.outputs, split.test);
  const auto finals = final_time_columns(test_in.labels);
  const SnapshotMatrix hold_in = select_columns(test_in, finals);
  const SnapshotMatrix hold_out = select_columns(test_out, finals);
  const Eigen::Index n_hold = hold_in.cols();
  const QoiField reference = qoi_full_mc(hold_out, n_hold);
  const double ref_norm = reference.values.norm();
  if (!(ref_norm > 0.0)) throw ConfigError("qoi: holdout smoke is identically zero");

  // Surrogate training columns per training fire: the final-time pair (one
  // high-fidelity sample, like one Monte Carlo draw) or every checkpoint.
  std::map<std::int64_t, std::vector<Eigen::Index>> train_fires;
  if (surrogate_snapshots == "all") {
    for (Eigen::Index c : split.train) train_fires[d.inputs.labels[static_cast<std::size_t>(c)].fire_id].push_back(c);
  } else {
    const SnapshotMatrix train_in = select_columns(d.inputs, split.train);
    for (Eigen::Index k : final_time_columns(train_in.labels)) {
      const Eigen::Index c = split.train[static_cast<std::size_t>(k)];
      train_fires[d.inputs.labels[static_cast<std::size_t>(c)].fire_id].push_back(c);
    }
  }
  std::vector<std::int64_t> fire_ids;
  for (const auto& [id, cols] : train_fires) fire_ids.push_back(id);
  const ReducedBasis qoi_basis = fit_basis(log_transform(select_columns(d.outputs, split.train).data), energy);

  json fit_cfg = defaults_fit();
  fit_cfg["kind"] = config.at("kind");
  fit_cfg["energy"] = energy;
  fit_cfg["lambda"] = config.at("lambda");

  std::ostringstream samples;
  samples << "estimator,m,repetition,rel_error\n";
  std::ostringstream summary;
  summary << "estimator,m,median,q25,q75\n";
  json result = json::array();
  for (std::size_t si = 0; si < schedule.size(); ++si) {
    const double s = schedule[si];
    const auto m = static_cast<Eigen::Index>(s <= 1.0 ? std::max(1.0, std::round(s * static_cast<double>(n_hold))) : s);
    if (m < 1 || m > n_hold) throw ConfigError("qoi: schedule entry exceeds the holdout size");
    std::map<std::string, std::vector<double>> errs;
    for (int rep = 0; rep < reps; ++rep) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(si) * 100003u + static_cast<std::uint64_t>(rep)));
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n_hold));
      for (Eigen::Index k = 0; k < n_hold; ++k) order[static_cast<std::size_t>(k)] = k;
      rng.shuffle(order);
      const SnapshotMatrix subset = select_columns(hold_out, order);
      std::vector<std::int64_t> fires = fire_ids;
      rng.shuffle(fires);
      for (const auto& e : estimators) {
        QoiField q;
        if (e == "full") {
          q = qoi_full_mc(subset, m);
        } else if (e == "reduced") {
          q = qoi_reduced_mc(subset, qoi_basis, m);
        } else {
          // Trained on m high-fidelity training fires, applied to every holdout input.
          std::vector<Eigen::Index> cols;
          const std::size_t take = std::min(static_cast<std::size_t>(m), fires.size());
          for (std::size_t k = 0; k < take; ++k)
            cols.insert(cols.end(), train_fires[fires[k]].begin(), train_fires[fires[k]].end());
          std::sort(cols.begin(), cols.end());
          const Matrix x = select_columns(d.inputs, cols).data;
          const Matrix y = log_transform(select_columns(d.outputs, cols).data);
          const Fitted f = fit_model(x, y, fit_cfg);
          q = qoi_surrogate(hold_in, f.model, n_hold);
        }
        const double err = (q.values - reference.values).norm() / ref_norm;
        errs[e].push_back(err);
        samples << e << ',' << m << ',' << rep << ',' << format_double(err) << '\n';
      }
    }
    for (const auto& e : estimators) {
      const auto& v = errs[e];
      const double med = quantile(v, 0.5), q25 = quantile(v, 0.25), q75 = quantile(v, 0.75);
      summary << e << ',' << m << ',' << format_double(med) << ',' << format_double(q25) << ','
              << format_double(q75) << '\n';
      result.push_back({{"estimator", e}, {"m", m}, {"median", med}, {"q25", q25}, {"q75", q75}});
    }
  }
  write_text(out / "qoi.csv", summary.str());
  write_text(out / "qoi_samples.csv", samples.str());
  return {{"holdout", n_hold}, {"rows", result}};
}

json cmd_sweep(const json& config, const fs::path& out) {
  const std::string axis = get<std::string>(config, "axis");
  const auto grid = get_grid(config, "grid");
  json base = defaults_fit();
  overlay(base, config.at("base"));
  if (axis == "lambda") base["kind"] = "quadratic";
  const Dataset d = load_dataset(require_path(base, "manifest"));
  const DatasetSplit split = make_split(d, base.at("split"));
  const auto train = part_columns(d, split, "train", base.at("train_condition"));
  const auto val = part_columns(d, split, "val", base.at("train_condition"));
  if (train.empty() || val.empty()) throw ConfigError("sweep: training or validation part is empty");
  const Matrix x = select_columns(d.inputs, train).data;
  const Matrix y = select_columns(d.outputs, train).data;
  const Matrix xv = select_columns(d.inputs, val).data;
  const Matrix yv = select_columns(d.outputs, val).data;
  const auto n_thresholds = get<std::size_t>(config, "n_thresholds");

  std::ostringstream csv;
  csv << "axis,value,tau,median_auc,median_iou,r,r_out,theta_fro_norm,val_rel_err\n";
  json rows = json::array();
  std::optional<OperatorModel> cached;
  for (double v : grid) {
    double beta = get<double>(config, "beta");
    json fit_cfg = base;
    Matrix pred;
    Eigen::Index r = 0, r_out = 0;
    double theta_norm = 0.0;
    if (axis == "beta") {
      beta = v;
    } else if (axis == "energy") {
      fit_cfg["energy"] = v;
      fit_cfg["energy_out"] = v;
    } else if (axis == "lambda") {
      fit_cfg["lambda"] = v;
    } else if (axis != "gp_lengthscale") {
      throw ConfigError("sweep axis must be beta|energy|lambda|gp_lengthscale, got '" + axis + "'");
    }
    if (axis == "gp_lengthscale") {
      const json& gcfg = config.at("gp");
      const ReducedBasis in = fit_basis(x, get<double>(fit_cfg, "energy"));
      const ReducedBasis ob = fit_basis(y, get<double>(fit_cfg, "energy"));
      const Matrix a = encode(in, x), b = encode(ob, y);
      const double scale = get<bool>(gcfg, "relative_grid") ? median_pairwise_distance(a) : 1.0;
      const GpModel gm = gp_fit(a, b, v * scale, get<double>(gcfg, "noise"));
      pred = decode(ob, gp_predict(gm, encode(in, xv))).cwiseMax(0.0);
      r = in.rank();
      r_out = ob.rank();
      theta_norm = gm.alpha.norm();
    } else {
      if (axis != "beta" || !cached) cached = fit_model(x, y, fit_cfg).model;
      pred = predict(*cached, xv);
      r = input_basis(*cached).rank();
      r_out = output_basis(*cached).rank();
      theta_norm = theta(*cached).norm();
    }
    const double tau = smoke_threshold(yv, beta);
    const ClassificationReport rep = classification_report(pred, yv, tau, n_thresholds);
    const double rel = relative_frobenius_error(pred, yv);
    csv << axis << ',' << format_double(v) << ',' << format_double(tau) << ',' << format_double(rep.median_auc)
        << ',' << format_double(rep.median_iou) << ',' << r << ',' << r_out << ',' << format_double(theta_norm)
        << ',' << format_double(rel) << '\n';
    rows.push_back({{"value", v},
                    {"tau", tau},
                    {"median_auc", rep.median_auc},
                    {"median_iou", rep.median_iou},
                    {"r", r},
                    {"r_out", r_out},
                    {"theta_fro_norm", theta_norm},
                    {"val_rel_err", rel}});
  }
  write_text(out / "sweep.csv", csv.str());
  return {{"axis", axis}, {"rows", rows}};
}

json cmd_baseline_gp(const json& config, const fs::path& out) {
  const Dataset d = load_dataset(require_path(config, "manifest"));
  const DatasetSplit split = make_split(d, config.at("split"));
  const std::string variant = get<std::string>(config, "variant");
  if (variant != "coeffs" && variant != "images") throw ConfigError("gp variant must be 'coeffs' or 'images'");
  const std::string part = get<std::string>(config, "part");
  const auto subsample = get<std::int64_t>(config, "subsample");
  if (subsample < 1) throw ConfigError("subsample must be >= 1");
  const double noise = get<double>(config, "noise");
  auto grid = get_grid(config, "length_scales");

  std::vector<Eigen::Index> train = split.train;
  Rng rng(get<std::uint64_t>(config, "seed"));
  rng.shuffle(train);
  if (static_cast<std::int64_t>(train.size()) > subsample) train.resize(static_cast<std::size_t>(subsample));
  std::sort(train.begin(), train.end());
  const auto& val = split.validation;
  const auto& cols = split.part(part);
  if (cols.empty() || val.empty()) throw ConfigError("gp: evaluation or validation part is empty");

  const auto t0 = Clock::now();
  const Matrix x = select_columns(d.inputs, train).data, y = select_columns(d.outputs, train).data;
  const Matrix xv = select_columns(d.inputs, val).data, yv = select_columns(d.outputs, val).data;
  const Matrix xt = select_columns(d.inputs, cols).data, yt = select_columns(d.outputs, cols).data;
  std::optional<ReducedBasis> in, ob;
  Matrix a = x, b = y, av = xv, bv = yv, at = xt;
  if (variant == "coeffs") {
    const double energy = get<double>(config, "energy");
    in = fit_basis(select_columns(d.inputs, split.train).data, energy);
    ob = fit_basis(select_columns(d.outputs, split.train).data, energy);
    a = encode(*in, x);
    b = encode(*ob, y);
    av = encode(*in, xv);
    bv = encode(*ob, yv);
    at = encode(*in, xt);
  }
  const double encoding_s = seconds_since(t0);

  const double scale = get<bool>(config, "relative_grid") ? median_pairwise_distance(a) : 1.0;
  for (double& l : grid) l *= scale;
  const auto t1 = Clock::now();
  const LengthScaleSearch search = tune_length_scale(a, b, av, bv, grid, noise);
  const double tuning_s = seconds_since(t1);
  const auto t2 = Clock::now();
  GpModel gm = gp_fit(a, b, search.best, noise);
  gm.variant = variant;
  const double training_s = seconds_since(t2);
  save_gp(gm, out / "gp");
  if (in) {
    save_basis(*in, out / "gp" / "input_basis");
    save_basis(*ob, out / "gp" / "output_basis");
  }

  std::ostringstream tuning;
  tuning << "length_scale,val_rel_err\n";
  for (std::size_t k = 0; k < search.grid.size(); ++k)
    tuning << format_double(search.grid[k]) << ',' << format_double(search.errors[k]) << '\n';
  write_text(out / "tuning.csv", tuning.str());

  Matrix pred = gp_predict(gm, at);
  if (ob) pred = decode(*ob, pred);
  pred = pred.cwiseMax(0.0);
  const double tau = smoke_threshold(yv, get<double>(config, "beta"));
  const ClassificationReport rep = classification_report(pred, yt, tau, get<std::size_t>(config, "n_thresholds"), true);
  json extra = {{"beta", get<double>(config, "beta")},
                {"part", part},
                {"variant", variant},
                {"length_scale", search.best},
                {"val_rel_err", search.best_error},
                {"n_train", train.size()},
                {"rel_frobenius_error", relative_frobenius_error(pred, yt)}};
  write_report_files(out, rep, d, cols, extra);
  write_json(out / "timings.json", {{"encoding_s", encoding_s}, {"tuning_s", tuning_s}, {"training_s", training_s}});
  return json::parse(read_text(out / "report.json"));
}

json run_command(const std::string& command, const json& user_config, const fs::path& out) {
  const json config = resolve_config(command, user_config);
  fs::create_directories(out);
  write_json(out / "config.resolved.json", config);
  if (command == "generate") return cmd_generate(config, out);
  if (command == "fit") return cmd_fit(config, out);
  if (command == "evaluate") return cmd_evaluate(config, out);
  if (command == "qoi") return cmd_qoi(config, out);
  if (command == "sweep") return cmd_sweep(config, out);
  return cmd_baseline_gp(config, out);
}

}  // namespace mlop::pipeline
