#pragma once

// The five experiment commands. Each writes its outputs, a JSON Lines report and a manifest into
// the output directory; file names are listed in docs/output_schema.md.

#include "evohom/config.hpp"
#include "evohom/report.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace evohom {

enum class ExitCode : int { ok = 0, check_failure = 1, config_error = 2, numerical_failure = 3 };

struct CommandOutcome {
  std::string command;
  CheckList checks;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::vector<std::pair<std::string, double>>> rows; // tabular results, one JSON line each
  std::vector<std::string> outputs; // file names relative to the output directory
  std::vector<std::pair<std::string, double>> timings; // seconds; written apart from the deterministic files
  std::string error;                // set when the command aborted
  ExitCode exit_code = ExitCode::ok;
};

struct ConvergenceRow {
  double epsilon = 0.0;
  double u_l2_error = 0.0;
  double r_l2_error = 0.0;
  double runtime_s = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows; // decreasing epsilon
  bool slopes_fitted = false;
  double u_slope = 0.0; // least-squares slope of log error against log epsilon
  double r_slope = 0.0;
  bool u_decreasing = false;
  bool r_decreasing = false;
  bool steady = false; // every error below the steady-state floor, no fit attempted
};

// Slope of the least-squares line through (log x_i, log y_i).
double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

CommandOutcome cmd_cell_table(const ExperimentConfig& config, const std::filesystem::path& out);
CommandOutcome cmd_macro_run(const ExperimentConfig& config, const std::filesystem::path& out);
CommandOutcome cmd_micro_run(const ExperimentConfig& config, double epsilon, const std::filesystem::path& out);
CommandOutcome cmd_convergence(const ExperimentConfig& config, const std::filesystem::path& out,
                               ConvergenceReport* report = nullptr);
CommandOutcome cmd_validate(const ExperimentConfig& config, const std::filesystem::path& out);

// Dispatches by name ("cell-table", "macro-run", "micro-run", "convergence", "validate"), maps
// library errors to exit codes and always writes the report and manifest for the attempt.
CommandOutcome run_command(const std::string& name, const ExperimentConfig& config,
                           const std::filesystem::path& out, std::optional<double> epsilon = std::nullopt);

std::vector<std::string> command_names();

} // namespace evohom
