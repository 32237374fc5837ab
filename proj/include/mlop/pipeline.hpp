#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace mlop::pipeline {

using json = nlohmann::json;

// Every command merges the user config over its defaults, validates the
// result, writes it to <out>/config.resolved.json and then runs. Return values
// summarize what was written; the files are the contract.

json defaults_generate();
json defaults_fit();
json defaults_evaluate();
json defaults_qoi();
json defaults_sweep();
json defaults_gp();

/// Config for `command` (generate|fit|evaluate|qoi|sweep|gp) with `user` merged over defaults.
json resolve_config(const std::string& command, const json& user);

/// Writes manifest.json, inputs.mlop, outputs.mlop.
json cmd_generate(const json& config, const std::filesystem::path& out);

/// Writes model/, split.json, metrics.json, timings.json.
json cmd_fit(const json& config, const std::filesystem::path& out);

/// Writes report.csv, report.json, roc.csv, timings.json.
json cmd_evaluate(const json& config, const std::filesystem::path& out);

/// Writes qoi.csv (median and quartiles per estimator and sample count) and qoi_samples.csv.
json cmd_qoi(const json& config, const std::filesystem::path& out);

/// Writes sweep.csv, one row per grid value, evaluated on the validation part.
json cmd_sweep(const json& config, const std::filesystem::path& out);

/// Writes gp/, tuning.csv, report.csv, report.json, roc.csv, timings.json.
json cmd_baseline_gp(const json& config, const std::filesystem::path& out);

/// Dispatch by name; resolves the config and persists it first.
json run_command(const std::string& command, const json& user_config, const std::filesystem::path& out);

/// Applies "a.b.c=value" (value parsed as JSON, else taken as a string).
void apply_override(json& config, const std::string& assignment);

/// Shortest round-trip decimal form of a double (as printed in every CSV).
std::string format_double(double v);

}  // namespace mlop::pipeline
