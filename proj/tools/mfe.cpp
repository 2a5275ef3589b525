// mfe: batch front end for the mean field lab.
//
//   mfe run <config.json> [--out DIR]
//   mfe validate <config.json>

#include <CLI11.hpp>

#include <iostream>

#include "mfe/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mean field equation lab: solve, continue, diagnose, minimize, family scans, thresholds"};
  app.require_subcommand(1);

  std::string run_path, out_dir, validate_path;
  auto* run = app.add_subcommand("run", "Execute a JSON run configuration");
  run->add_option("config", run_path, "Run configuration (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config's 'output')");
  auto* val = app.add_subcommand("validate", "List every constraint a configuration violates");
  val->add_option("config", validate_path, "Run configuration (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mfe::kExitValidation;
  }

  try {
    if (*val) {
      const auto errors = mfe::validate_config_file(validate_path);
      for (const auto& e : errors) std::cout << "violation: " << e << '\n';
      if (errors.empty()) std::cout << "ok\n";
      return errors.empty() ? mfe::kExitOk : mfe::kExitValidation;
    }
    std::string raw;
    const mfe::Json j = mfe::read_json_file(run_path, &raw);
    std::vector<std::string> errors;
    const auto base = std::filesystem::path(run_path).parent_path();
    mfe::RunConfig cfg = mfe::parse_config(j, base, errors);
    if (!errors.empty()) {
      for (const auto& e : errors) std::cerr << "mfe: config: " << e << '\n';
      return mfe::kExitValidation;
    }
    const std::filesystem::path dir = out_dir.empty() ? base / cfg.output : std::filesystem::path(out_dir);
    const auto outcome = mfe::run_config(cfg, dir, raw);
    if (outcome.exit_code != mfe::kExitOk) std::cerr << "mfe: " << outcome.message << '\n';
    else if (!outcome.message.empty()) std::cerr << "mfe: note: " << outcome.message << '\n';
    std::cout << dir.string() << '\n';
    return outcome.exit_code;
  } catch (const mfe::ValidationError& e) {
    std::cerr << "mfe: " << e.what() << '\n';
    return mfe::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "mfe: " << e.what() << '\n';
    return mfe::kExitNumerical;
  }
}
