// Command-line front end: evohom <command> --config PATH [--out DIR] [--epsilon E] [--quiet]

#include "evohom/config.hpp"
#include "evohom/errors.hpp"
#include "evohom/experiment.hpp"
#include "evohom/log.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  using namespace evohom;
  CLI::App app{"Homogenisation toolkit for reaction-diffusion in porous media with evolving obstacles"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  double epsilon = 0.0;
  bool quiet = false;

  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment configuration (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides [output] dir)");
    sub->add_flag("--quiet", quiet, "only print warnings");
    if (name == "micro-run")
      sub->add_option("--epsilon", epsilon, "cell scale, 1/epsilon an integer (default: first configured)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ExitCode::config_error);
  }
  if (quiet)
    set_log_level(LogLevel::warning);

  const std::string command = app.get_subcommands().front()->get_name();
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "evohom: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config_error);
  }
  if (!out_dir.empty())
    config.output.dir = out_dir;

  std::optional<double> eps;
  if (epsilon != 0.0)
    eps = epsilon;
  const CommandOutcome outcome = run_command(command, config, config.output.dir, eps);

  if (!quiet) {
    for (const auto& c : outcome.checks.checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << c.measured
                << " threshold=" << c.threshold << (c.witness.empty() ? "" : " witness=" + c.witness) << "\n";
    for (const auto& [k, v] : outcome.metrics)
      std::cout << k << " = " << v << "\n";
  }
  if (!outcome.error.empty())
    std::cerr << "evohom: " << outcome.error << "\n";
  return static_cast<int>(outcome.exit_code);
}
