#include "evohom/experiment.hpp"

#include "evohom/errors.hpp"
#include "evohom/log.hpp"
#include "evohom/macro_solver.hpp"
#include "evohom/micro_simulator.hpp"
#include "evohom/transform_checks.hpp"
#include "evohom/unit_cell.hpp"

#include "json.hpp"

#include <boost/version.hpp>
#include <openssl/crypto.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evohom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr double kMassTolerance = 1e-9;
constexpr double kSteadyFloor = 1e-9;

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string file_prefix(const std::string& command) {
  std::string s = command;
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

void emit(const fs::path& out, const std::string& name, const std::string& content, CommandOutcome& o) {
  fs::create_directories(out);
  std::ofstream f(out / name, std::ios::binary);
  if (!f)
    throw Error("cannot write " + (out / name).string());
  f << content;
  o.outputs.push_back(name);
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// The output location is not part of an experiment's identity.
std::string identity_text(const ExperimentConfig& c) {
  ExperimentConfig copy = c;
  copy.output.dir = ".";
  return copy.canonical();
}

json check_json(const CheckResult& c) {
  return {{"name", c.name}, {"passed", c.passed}, {"measured", c.measured}, {"threshold", c.threshold},
          {"witness", c.witness}};
}

void merge(CheckList& into, const CheckList& from, const std::string& prefix) {
  for (auto c : from.checks) {
    c.name = prefix + c.name;
    into.add(std::move(c));
  }
}

EffectiveTensorTable obtain_table(const ExperimentConfig& c) {
  if (!c.table.file.empty()) {
    log_info("loading tensor table " + c.table.file);
    try {
      return EffectiveTensorTable::read_csv(c.table.file);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("table.file: " + std::string(e.what()));
    }
  }
  log_info("tabulating the effective tensor at " + std::to_string(c.table.count) + " radii");
  return tabulate(c.geometry, c.table.radii(), c.table.mesh());
}

MacroOptions macro_options(const ExperimentConfig& c) {
  MacroOptions m;
  m.diffusion = c.discretization.diffusion;
  m.cg_tol = c.discretization.cg_tol;
  return m;
}

MicroOptions micro_options(const ExperimentConfig& c) {
  MicroOptions m;
  m.diffusion = c.discretization.diffusion;
  m.cg_tol = c.discretization.cg_tol;
  m.pin_radii = c.discretization.pin_radii;
  m.source_at_mapped_point = c.discretization.source_at_mapped_point;
  return m;
}

// Running statistics for the per-step invariants shared by both simulators.
struct StepMonitor {
  double max_defect = 0.0;
  double max_rate = 0.0;
  double box_violation = 0.0;
  std::size_t worst_step = 0;

  void observe(std::size_t step, double defect, const std::vector<double>& r_old, const std::vector<double>& r_new,
               double dt, const KineticsSpec& spec) {
    if (defect > max_defect) {
      max_defect = defect;
      worst_step = step;
    }
    for (std::size_t i = 0; i < r_new.size(); ++i) {
      max_rate = std::max(max_rate, std::fabs(r_new[i] - r_old[i]) / dt);
      box_violation = std::max({box_violation, spec.r_min - r_new[i], r_new[i] - spec.r_max});
    }
  }

  void report(CheckList& checks, const KineticsSpec& spec, const std::string& prefix) const {
    checks.add(bounded_check(prefix + "mass_balance", max_defect, kMassTolerance,
                             "step=" + std::to_string(worst_step)));
    checks.add(bounded_check(prefix + "radius_box", std::max(0.0, box_violation), 0.0));
    checks.add(bounded_check(prefix + "radius_rate_bound", max_rate, spec.f_cap / spec.c_s * (1.0 + 1e-12)));
  }
};

// Library errors raised inside a step are re-thrown with the step index.
template <class F> auto at_step(std::size_t step, F&& f) {
  try {
    return f();
  } catch (const NumericalError& e) {
    throw NumericalError("step " + std::to_string(step) + ": " + e.what());
  }
}

std::string pad_step(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", step);
  return buf;
}

bool snapshot_due(const ExperimentConfig& c, std::size_t step) {
  const std::size_t every = static_cast<std::size_t>(c.output.snapshot_every);
  return step == 0 || step == c.discretization.steps() || (every > 0 && step % every == 0);
}

struct MacroResult {
  MacroState final_state;
  StepMonitor monitor;
};

MacroResult run_macro(const ExperimentConfig& c, const MacroSolver& solver, const fs::path* out,
                      CommandOutcome* o) {
  const double dt = c.discretization.dt;
  const std::size_t steps = c.discretization.steps();
  MacroState s = solver.init(make_initial_field(c.u0), make_initial_field(c.r0));
  MacroResult res;
  std::ostringstream ledger;
  write_ledger_header(ledger);
  write_ledger_row(ledger, s);
  auto snapshot = [&](const MacroState& st) {
    if (!out || !snapshot_due(c, st.step))
      return;
    std::ostringstream os;
    write_macro_snapshot(os, solver.grid(), st);
    emit(*out, "macro_snapshot_" + pad_step(st.step) + ".csv", os.str(), *o);
  };
  snapshot(s);
  for (std::size_t n = 0; n < steps; ++n) {
    MacroState next = at_step(n + 1, [&] { return solver.step(s, dt); });
    const double defect =
        std::fabs((next.ledger.total() - s.ledger.total()) - (next.ledger.source - s.ledger.source));
    res.monitor.observe(next.step, defect, s.r, next.r, dt, solver.kinetics());
    write_ledger_row(ledger, next);
    s = std::move(next);
    snapshot(s);
  }
  if (out)
    emit(*out, "macro_ledger.csv", ledger.str(), *o);
  res.final_state = std::move(s);
  return res;
}

struct MicroResult {
  MicroState final_state;
  StepMonitor monitor;
  bool pinned_checked = false;
  bool pinned_match = true;
  std::size_t pinned_mismatch_step = 0;
};

MicroResult run_micro(const ExperimentConfig& c, const MicroSimulator& sim, const fs::path* out, CommandOutcome* o,
                      const std::string& prefix) {
  const double dt = c.discretization.dt;
  const std::size_t steps = c.discretization.steps();
  MicroState s = sim.init(make_initial_field(c.u0), make_initial_field(c.r0));
  MicroResult res;

  // Pinned runs are shadowed by the plain heat solver and compared bit for bit.
  std::optional<PerforatedHeatSolver> heat;
  std::vector<double> shadow;
  if (c.discretization.pin_radii) {
    if (!c.discretization.source_at_mapped_point)
      log_info("pinned run: the source evaluation point is irrelevant because the map is the identity");
    heat.emplace(sim.mesh(), c.discretization.diffusion, make_source(c.source), c.discretization.cg_tol);
    shadow = heat->init(make_initial_field(c.u0));
    res.pinned_checked = true;
    res.pinned_match = shadow == s.u_hat;
  }

  std::ostringstream ledger, cells;
  write_ledger_header(ledger);
  write_cell_series_header(cells);
  auto record = [&](const MicroState& st) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", st.t, st.ledger.total(), st.ledger.solid,
                  st.ledger.fluid, st.ledger.source);
    ledger << buf;
    write_cell_series_rows(cells, sim.mesh(), st);
    if (out && snapshot_due(c, st.step)) {
      std::ostringstream os;
      write_micro_snapshot(os, sim.mesh(), st);
      emit(*out, prefix + "snapshot_" + pad_step(st.step) + ".csv", os.str(), *o);
    }
  };
  record(s);
  for (std::size_t n = 0; n < steps; ++n) {
    MicroState next = at_step(n + 1, [&] { return sim.step(s, dt); });
    const double defect =
        std::fabs((next.ledger.total() - s.ledger.total()) - (next.ledger.source - s.ledger.source));
    res.monitor.observe(next.step, defect, s.radii, next.radii, dt, sim.kinetics());
    if (heat) {
      shadow = at_step(n + 1, [&] { return heat->step(shadow, s.t, dt); });
      if (res.pinned_match && shadow != next.u_hat) {
        res.pinned_match = false;
        res.pinned_mismatch_step = next.step;
      }
    }
    s = std::move(next);
    record(s);
  }
  if (out) {
    emit(*out, prefix + "ledger.csv", ledger.str(), *o);
    emit(*out, prefix + "cells.csv", cells.str(), *o);
  }
  res.final_state = std::move(s);
  return res;
}

MicroSimulator make_micro(const ExperimentConfig& c, double epsilon) {
  const PeriodicMesh reference = build_reference_mesh(c.geometry.r0, c.discretization.micro_mesh());
  return MicroSimulator(build_micro_mesh(reference, epsilon), c.geometry, c.kinetics, make_source(c.source),
                        micro_options(c));
}

int cells_per_side(double epsilon) { return static_cast<int>(std::lround(1.0 / epsilon)); }

void check_epsilon(double epsilon) {
  const double inv = 1.0 / epsilon;
  if (!(epsilon > 0.0) || std::fabs(inv - std::round(inv)) > 1e-9 || inv > 64.0)
    throw ConfigError("epsilon must be 1/n for an integer n in [1, 64], got " + std::to_string(epsilon));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v)
    s += x;
  return s / static_cast<double>(v.size());
}

void write_report_and_manifest(const ExperimentConfig& c, const fs::path& out, CommandOutcome& o) {
  const std::string prefix = file_prefix(o.command);
  const std::string hash = sha256_hex(identity_text(c));
  const bool passed = o.exit_code == ExitCode::ok;

  std::ostringstream report;
  report << json{{"type", "command"}, {"command", o.command}, {"config_sha256", hash}, {"version", kVersion}}.dump()
         << '\n';
  for (const auto& ch : o.checks.checks) {
    json j = check_json(ch);
    j["type"] = "check";
    report << j.dump() << '\n';
  }
  for (const auto& [k, v] : o.metrics)
    report << json{{"type", "metric"}, {"name", k}, {"value", v}}.dump() << '\n';
  for (const auto& row : o.rows) {
    json j{{"type", "row"}};
    for (const auto& [k, v] : row)
      j[k] = v;
    report << j.dump() << '\n';
  }
  report << json{{"type", "result"}, {"passed", passed}, {"exit_code", static_cast<int>(o.exit_code)},
                 {"error", o.error}}
                .dump()
         << '\n';
  emit(out, prefix + "_report.jsonl", report.str(), o);

  std::ostringstream timing;
  for (const auto& [phase, sec] : o.timings)
    timing << json{{"phase", phase}, {"seconds", sec}}.dump() << '\n';
  fs::create_directories(out);
  std::ofstream(out / (prefix + "_timing.jsonl"), std::ios::binary) << timing.str();

  json files = json::array();
  for (const auto& name : o.outputs) {
    const std::string content = read_file(out / name);
    files.push_back({{"file", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  }
  json checks = json::array();
  for (const auto& ch : o.checks.checks)
    checks.push_back(check_json(ch));
  const json manifest{
      {"command", o.command},
      {"config_sha256", hash},
      {"config", identity_text(c)},
      {"seed", c.seed},
      {"versions",
       {{"evohom", kVersion},
        {"boost", BOOST_LIB_VERSION},
        {"openssl", OpenSSL_version(OPENSSL_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", __VERSION__}}},
      {"checks", checks},
      {"passed", passed},
      {"exit_code", static_cast<int>(o.exit_code)},
      {"error", o.error},
      {"outputs", files},
  };
  std::ofstream(out / (prefix + "_manifest.json"), std::ios::binary) << manifest.dump(2) << '\n';
}

} // namespace

double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DomainError("slope fit needs at least two matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0))
      throw DomainError("slope fit needs positive values");
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

CommandOutcome cmd_cell_table(const ExperimentConfig& c, const fs::path& out) {
  CommandOutcome o;
  o.command = "cell-table";
  Stopwatch clock;
  const auto table = tabulate(c.geometry, c.table.radii(), c.table.mesh());
  o.timings.emplace_back("tabulate", clock.seconds());
  o.checks = check_table(table);
  std::ostringstream csv;
  table.write_csv(csv);
  emit(out, "table.csv", csv.str(), o);
  for (const auto& e : table.entries()) {
    o.rows.push_back({{"r", e.r},
                      {"A11", e.a_hom[0][0]},
                      {"A12", e.a_hom[0][1]},
                      {"A22", e.a_hom[1][1]},
                      {"theta", e.theta},
                      {"voigt_margin", e.theta - e.a_hom[0][0]}});
  }
  o.metrics.emplace_back("radii", static_cast<double>(table.entries().size()));
  return o;
}

CommandOutcome cmd_macro_run(const ExperimentConfig& c, const fs::path& out) {
  CommandOutcome o;
  o.command = "macro-run";
  Stopwatch clock;
  MacroSolver solver(make_macro_grid(c.discretization.macro_n), obtain_table(c), c.kinetics, make_source(c.source),
                     macro_options(c));
  o.timings.emplace_back("table", clock.seconds());
  const auto res = run_macro(c, solver, &out, &o);
  o.timings.emplace_back("total", clock.seconds());
  res.monitor.report(o.checks, c.kinetics, "");
  const auto& s = res.final_state;
  const auto [umin, umax] = std::minmax_element(s.u.begin(), s.u.end());
  o.metrics = {{"t_final", s.t},
               {"steps", static_cast<double>(s.step)},
               {"mean_u", mean_of(s.u)},
               {"min_u", *umin},
               {"max_u", *umax},
               {"mean_r", mean_of(s.r)},
               {"max_mass_defect", res.monitor.max_defect},
               {"max_radius_rate", res.monitor.max_rate},
               {"table_clamps", static_cast<double>(solver.table().clamp_count())}};
  return o;
}

CommandOutcome cmd_micro_run(const ExperimentConfig& c, double epsilon, const fs::path& out) {
  check_epsilon(epsilon);
  CommandOutcome o;
  o.command = "micro-run";
  Stopwatch clock;
  const MicroSimulator sim = make_micro(c, epsilon);
  const std::string prefix = "micro_n" + std::to_string(cells_per_side(epsilon)) + "_";
  const auto res = run_micro(c, sim, &out, &o, prefix);
  o.timings.emplace_back("total", clock.seconds());
  res.monitor.report(o.checks, c.kinetics, "");
  if (res.pinned_checked) {
    CheckResult ch{"pinned_matches_plain", res.pinned_match, res.pinned_match ? 0.0 : 1.0, 0.0, {}};
    if (!res.pinned_match)
      ch.witness = "step=" + std::to_string(res.pinned_mismatch_step);
    o.checks.add(ch);
  }
  const auto& s = res.final_state;
  const auto [umin, umax] = std::minmax_element(s.u_hat.begin(), s.u_hat.end());
  o.metrics = {{"epsilon", sim.mesh().epsilon},
               {"cells", static_cast<double>(sim.mesh().n_cells())},
               {"nodes", static_cast<double>(sim.mesh().nodes.size())},
               {"t_final", s.t},
               {"steps", static_cast<double>(s.step)},
               {"min_u_hat", *umin},
               {"max_u_hat", *umax},
               {"mean_r", mean_of(s.radii)},
               {"max_mass_defect", res.monitor.max_defect},
               {"max_radius_rate", res.monitor.max_rate}};
  return o;
}

CommandOutcome cmd_convergence(const ExperimentConfig& c, const fs::path& out, ConvergenceReport* report) {
  const auto& eps = c.discretization.epsilons;
  if (eps.size() < 3)
    throw ConfigError("convergence needs at least three epsilons, got " + std::to_string(eps.size()));
  CommandOutcome o;
  o.command = "convergence";
  Stopwatch clock;
  MacroSolver solver(make_macro_grid(c.discretization.macro_n), obtain_table(c), c.kinetics, make_source(c.source),
                     macro_options(c));
  const auto macro = run_macro(c, solver, nullptr, nullptr);
  o.timings.emplace_back("macro", clock.seconds());
  macro.monitor.report(o.checks, c.kinetics, "macro.");

  ConvergenceReport rep;
  for (double e : eps) {
    Stopwatch t;
    log_info("convergence: micro run at epsilon = " + std::to_string(e));
    const MicroSimulator sim = make_micro(c, e);
    const auto micro = run_micro(c, sim, nullptr, nullptr, "");
    micro.monitor.report(o.checks, c.kinetics, "micro_n" + std::to_string(cells_per_side(e)) + ".");
    const auto err = unfold_compare(sim, micro.final_state, solver.grid(), macro.final_state);
    rep.rows.push_back({sim.mesh().epsilon, err.l2_error, err.r_l2_error, t.seconds()});
    o.timings.emplace_back("micro_n" + std::to_string(cells_per_side(e)), t.seconds());
  }

  std::vector<double> ex, eu, er;
  double max_error = 0.0;
  for (const auto& r : rep.rows) {
    ex.push_back(r.epsilon);
    eu.push_back(r.u_l2_error);
    er.push_back(r.r_l2_error);
    max_error = std::max({max_error, r.u_l2_error, r.r_l2_error});
  }
  rep.steady = max_error <= kSteadyFloor;
  // Worst ratio of consecutive errors; strictly decreasing means every ratio is below one.
  auto worst_ratio = [](const std::vector<double>& v) {
    double w = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i)
      w = std::max(w, v[i - 1] > 0.0 ? v[i] / v[i - 1] : HUGE_VAL);
    return w;
  };
  if (rep.steady) {
    o.checks.add(bounded_check("steady_errors", max_error, kSteadyFloor));
  } else {
    const double ru = worst_ratio(eu), rr = worst_ratio(er);
    rep.u_decreasing = ru < 1.0;
    rep.r_decreasing = rr < 1.0;
    o.checks.add({"u_error_decreasing", rep.u_decreasing, ru, 1.0, rep.u_decreasing ? "" : "consecutive ratio"});
    o.checks.add({"r_error_decreasing", rep.r_decreasing, rr, 1.0, rep.r_decreasing ? "" : "consecutive ratio"});
    const bool positive = std::all_of(eu.begin(), eu.end(), [](double v) { return v > 0.0; }) &&
                          std::all_of(er.begin(), er.end(), [](double v) { return v > 0.0; });
    if (positive) {
      rep.slopes_fitted = true;
      rep.u_slope = fit_log_slope(ex, eu);
      rep.r_slope = fit_log_slope(ex, er);
      o.metrics.emplace_back("u_slope", rep.u_slope);
      o.metrics.emplace_back("r_slope", rep.r_slope);
    }
  }

  std::ostringstream csv;
  csv << "epsilon,u_l2_error,r_l2_error\n";
  for (const auto& r : rep.rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.epsilon, r.u_l2_error, r.r_l2_error);
    csv << buf;
    o.rows.push_back({{"epsilon", r.epsilon}, {"u_l2_error", r.u_l2_error}, {"r_l2_error", r.r_l2_error}});
  }
  emit(out, "convergence.csv", csv.str(), o);
  o.metrics.emplace_back("macro_mean_u", mean_of(macro.final_state.u));
  o.metrics.emplace_back("macro_mean_r", mean_of(macro.final_state.r));
  o.timings.emplace_back("total", clock.seconds());
  if (report)
    *report = rep;
  return o;
}

CommandOutcome cmd_validate(const ExperimentConfig& c, const fs::path&) {
  CommandOutcome o;
  o.command = "validate";
  Stopwatch clock;
  merge(o.checks, check_transform_identities(c.geometry), "transform.");
  merge(o.checks, check_transform_jacobian(c.geometry), "transform.");
  const auto jac = measure_jacobian(c.geometry, 500, 1e-5, c.seed);
  std::vector<EpsConstants> constants;
  merge(o.checks, check_eps_uniformity(c.geometry, {0.5, 0.25, 0.125}, 0.05, &constants), "transform.");
  o.timings.emplace_back("transform", clock.seconds());
  const auto kin = validate_structure(c.kinetics, 10000, c.seed);
  merge(o.checks, kin.checks, "kinetics.");
  const auto traj = check_radius_trajectories(c.kinetics, 1000, 100, c.discretization.dt, c.seed);
  merge(o.checks, traj.checks, "kinetics.");
  o.timings.emplace_back("total", clock.seconds());
  o.metrics = {{"det_min", jac.det_min},
               {"det_max", jac.det_max},
               {"max_jacobian_error", jac.max_jacobian_error},
               {"max_rgamma_error", jac.max_rgamma_error},
               {"min_radial_slope", jac.min_radial_slope},
               {"max_abs_f", kin.max_abs_f},
               {"lipschitz_estimate", kin.lipschitz_estimate},
               {"lipschitz_envelope", kin.lipschitz_envelope},
               {"max_step_ratio", traj.max_step_ratio}};
  for (const auto& k : constants)
    o.rows.push_back({{"epsilon", k.epsilon},
                      {"displacement", k.displacement},
                      {"jacobian", k.jacobian},
                      {"det", k.det},
                      {"lipschitz", k.lipschitz}});
  return o;
}

std::vector<std::string> command_names() { return {"cell-table", "macro-run", "micro-run", "convergence", "validate"}; }

CommandOutcome run_command(const std::string& name, const ExperimentConfig& config, const fs::path& out,
                           std::optional<double> epsilon) {
  CommandOutcome o;
  try {
    if (name == "cell-table")
      o = cmd_cell_table(config, out);
    else if (name == "macro-run")
      o = cmd_macro_run(config, out);
    else if (name == "micro-run")
      o = cmd_micro_run(config, epsilon.value_or(config.discretization.epsilons.front()), out);
    else if (name == "convergence")
      o = cmd_convergence(config, out);
    else if (name == "validate")
      o = cmd_validate(config, out);
    else
      throw ConfigError("unknown command '" + name + "'");
    o.exit_code = o.checks.all_passed() ? ExitCode::ok : ExitCode::check_failure;
    for (const auto& ch : o.checks.checks)
      if (!ch.passed)
        log_warning("check failed: " + ch.name + (ch.witness.empty() ? "" : " (" + ch.witness + ")"));
  } catch (const ConfigError& e) {
    o.error = e.what();
    o.exit_code = ExitCode::config_error;
  } catch (const MeshQualityError& e) {
    o.error = e.what();
    o.exit_code = ExitCode::config_error;
  } catch (const std::exception& e) {
    o.error = e.what();
    o.exit_code = ExitCode::numerical_failure;
  }
  o.command = name;
  if (!o.error.empty())
    log_warning(name + ": " + o.error);
  write_report_and_manifest(config, out, o);
  return o;
}

} // namespace evohom
