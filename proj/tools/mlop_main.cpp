#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlop/error.hpp"
#include "mlop/pipeline.hpp"
#include "mlop/tensorio.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Invocation {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool print_defaults = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlop: multilinear operator surrogates for fire-to-smoke maps"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "Generate a synthetic fire/smoke dataset"},
      {"fit", "Fit a linear or quadratic operator on the training part"},
      {"evaluate", "Classification report of a fitted model on one dataset part"},
      {"qoi", "Convergence study of the AOD-proxy estimators"},
      {"sweep", "Hyperparameter sweep evaluated on the validation part"},
      {"gp", "Gaussian-process baseline (images or coefficients)"}};

  Invocation inv;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", inv.config_path, "JSON config file (merged over defaults)");
    sub->add_option("-o,--out", inv.out_dir, "Run directory for all outputs");
    sub->add_option("-s,--set", inv.overrides, "Override a config key, e.g. --set split.seed=3");
    sub->add_flag("--print-defaults", inv.print_defaults, "Print the default config and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::string command;
  for (const auto& [name, help] : commands)
    if (app.got_subcommand(name)) command = name;

  try {
    if (inv.print_defaults) {
      std::cout << mlop::pipeline::resolve_config(command, nullptr).dump(2) << "\n";
      return 0;
    }
    if (inv.out_dir.empty()) throw mlop::ConfigError("--out is required");
    nlohmann::json user = nlohmann::json::object();
    if (!inv.config_path.empty()) {
      try {
        user = nlohmann::json::parse(mlop::read_text(inv.config_path));
      } catch (const nlohmann::json::exception& e) {
        throw mlop::ConfigError("config '" + inv.config_path + "': " + e.what());
      }
    }
    for (const auto& o : inv.overrides) mlop::pipeline::apply_override(user, o);
    const auto result = mlop::pipeline::run_command(command, user, inv.out_dir);
    std::cout << result.dump(2) << "\n";
    return 0;
  } catch (const mlop::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const mlop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mlop::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
