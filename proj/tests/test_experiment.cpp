#include "evohom/config.hpp"
#include "evohom/errors.hpp"
#include "evohom/experiment.hpp"

#include "json.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

using namespace evohom;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = EVOHOM_SOURCE_DIR;

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test");
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("evohom_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.ini";
  std::ofstream(p) << text;
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EVOHOM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Rows of a CSV file as numbers, header skipped.
std::vector<std::vector<double>> read_rows(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

std::vector<nlohmann::json> read_report(const fs::path& p) {
  std::ifstream f(p);
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(f, line))
    out.push_back(nlohmann::json::parse(line));
  return out;
}

const nlohmann::json* find_check(const std::vector<nlohmann::json>& report, const std::string& name) {
  for (const auto& j : report)
    if (j["type"] == "check" && j["name"] == name)
      return &j;
  return nullptr;
}

std::map<std::string, std::string> outputs_of(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.find("_timing.jsonl") == std::string::npos && name != "config.ini")
      files[name] = slurp(e.path());
  }
  return files;
}

const char* kSmallGrowth = R"(
[discretization]
macro_n = 8
epsilons = 1/2, 1/4, 1/8
target_h = 0.1
dt = 1/100
T = 0.1
[table]
target_h = 0.1
count = 5
)";

} // namespace

TEST(Config, DefaultsMatchCanonicalScenario) {
  const auto c = parse("");
  EXPECT_EQ(c.discretization.macro_n, 32);
  EXPECT_EQ(c.discretization.steps(), 100u);
  EXPECT_EQ(c.u0.name, "constant");
  EXPECT_EQ(make_initial_field(c.u0)({0.3, 0.3}), 0.9);
  EXPECT_EQ(make_initial_field(c.r0)({0.3, 0.3}), 0.2);
  EXPECT_EQ(c.kinetics.r_min, c.geometry.r_min);
  EXPECT_EQ(c.table.radii().size(), 11u);
  EXPECT_EQ(c.discretization.micro_mesh().n_boundary, 80);
}

TEST(Config, CanonicalFormRoundTrips) {
  const auto c = parse(kSmallGrowth);
  const auto again = parse(c.canonical());
  EXPECT_EQ(c.canonical(), again.canonical());
  const auto file = parse(slurp(kSource / "configs" / "canonical_growth.ini"));
  EXPECT_EQ(file.canonical(), parse(file.canonical()).canonical());
  EXPECT_EQ(file.discretization.epsilons, (std::vector<double>{0.5, 0.25, 0.125}));
}

TEST(Config, FieldParametersAndFractions) {
  const auto c = parse("[initial]\nu0 = gaussian\nu0.width = 0.1\n[source]\nname = constant\nvalue = 2\n"
                       "[discretization]\ndt = 1/400\nepsilons = 0.125, 1/2, 1/4\n");
  EXPECT_EQ(c.u0.name, "gaussian");
  EXPECT_EQ(c.u0.params.at("width"), 0.1);
  EXPECT_EQ(make_source(c.source)(0.0, {0.1, 0.1}), 2.0);
  EXPECT_EQ(c.discretization.dt, 1.0 / 400);
  EXPECT_EQ(c.discretization.epsilons.front(), 0.5);
  EXPECT_EQ(c.discretization.epsilons.back(), 0.125);
}

TEST(Config, RejectsInvalidInput) {
  for (const char* bad : {
           "[geometry]\nr_max = 0.49\ndelta = 0.05\n",  // r_max + delta >= 0.5
           "[table]\ncount = 1\n",                       // degenerate grid
           "[discretization]\ndt = 0.2\n",               // radius could cross the box in few steps
           "[discretization]\nT = 0.503\n",              // not a multiple of dt
           "[discretization]\nT = -1\n",
           "[discretization]\nepsilons = 0.3\n",
           "[discretization]\nepsilons = 1/2, 0.5\n",
           "[discretization]\nmacro_n = 1\n",
           "[discretization]\nn_boundary = 20\n",
           "[discretization]\nflux = 1\n",               // unknown key
           "[nonsense]\na = 1\n",                        // unknown section
           "[initial]\nu0 = nonexistent\n",
           "[initial]\nu0.bogus = 1\n",
           "[initial]\nq0 = constant\n",
           "[source]\nname = gaussian\nwidth = -1\n",
           "[kinetics]\nfamily = unknown\n",
           "[kinetics]\nc_s = 0\n",
           "[geometry]\nr0 = abc\n",
           "[kinetics]\nenabled = maybe\n",
           "[table]\nr_lo = 0.1\n",                     // below r_min
       }) {
    EXPECT_THROW(parse(bad), ConfigError) << bad;
  }
}

TEST(Config, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Experiment, LogSlopeFit) {
  const std::vector<double> x{0.5, 0.25, 0.125};
  std::vector<double> y;
  for (double v : x)
    y.push_back(3.0 * v * v);
  EXPECT_NEAR(fit_log_slope(x, y), 2.0, 1e-12);
  EXPECT_THROW(fit_log_slope({1.0}, {1.0}), DomainError);
}

TEST(Cli, CellTableDefaultIsDeterministic) {
  const auto dir = scratch("cell_table");
  const auto cfg = write_config(dir, "");
  ASSERT_EQ(run_cli("cell-table --quiet --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("cell-table --quiet --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
  const auto rows = read_rows(dir / "a" / "table.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_DOUBLE_EQ(rows.front()[0], 0.15);
  EXPECT_DOUBLE_EQ(rows.back()[0], 0.35);
  EXPECT_EQ(outputs_of(dir / "a"), outputs_of(dir / "b"));
  const auto report = read_report(dir / "a" / "cell_table_report.jsonl");
  EXPECT_EQ(report.front()["type"], "command");
  EXPECT_EQ(report.back()["passed"], true);
  for (const char* name : {"tensor_symmetric", "tensor_positive_definite", "voigt_bound", "tensor_decreasing"})
    ASSERT_NE(find_check(report, name), nullptr) << name;
}

TEST(Cli, ManifestRecordsHashesOfOutputs) {
  const auto dir = scratch("manifest");
  const auto cfg = write_config(dir, kSmallGrowth);
  ASSERT_EQ(run_cli("macro-run --quiet --config " + cfg.string() + " --out " + dir.string()), 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "macro_run_manifest.json"));
  EXPECT_EQ(manifest["config_sha256"], sha256_hex(manifest["config"].get<std::string>()));
  EXPECT_EQ(manifest["config_sha256"], sha256_hex(parse(manifest["config"].get<std::string>()).canonical()));
  ASSERT_GE(manifest["outputs"].size(), 4u);
  for (const auto& f : manifest["outputs"])
    EXPECT_EQ(f["sha256"], sha256_hex(slurp(dir / f["file"].get<std::string>()))) << f["file"];
  EXPECT_TRUE(manifest["passed"].get<bool>());
  EXPECT_FALSE(manifest["checks"].empty());
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("exit_codes");
  EXPECT_EQ(run_cli("validate --config " + (dir / "missing.ini").string()), 2);
  EXPECT_EQ(run_cli("frobnicate --config x"), 2);
  const auto bad = write_config(dir, "[geometry]\nr_max = 0.49\ndelta = 0.05\n");
  EXPECT_EQ(run_cli("validate --config " + bad.string() + " --out " + dir.string()), 2);
  const auto tampered = dir / "tampered.ini";
  std::ofstream(tampered) << "[geometry]\nnormalize_mollifier = false\n";
  EXPECT_EQ(run_cli("validate --config " + tampered.string() + " --out " + (dir / "t").string()), 1);
  const auto report = read_report(dir / "t" / "validate_report.jsonl");
  const auto* c = find_check(report, "transform.identity_outside_annulus");
  ASSERT_NE(c, nullptr);
  EXPECT_FALSE((*c)["passed"].get<bool>());
  EXPECT_NE((*c)["witness"].get<std::string>().find(" r="), std::string::npos);

  const auto overflow = dir / "overflow.ini";
  std::ofstream(overflow) << "[source]\nname = constant\nvalue = 1e308\n[discretization]\nmacro_n = 4\nT = 1/100\n";
  EXPECT_EQ(run_cli("macro-run --config " + overflow.string() + " --out " + (dir / "o").string()), 3);
  const auto failed = read_report(dir / "o" / "macro_run_report.jsonl");
  EXPECT_NE(failed.back()["error"].get<std::string>().find("step 1"), std::string::npos);

  const auto few = dir / "few.ini";
  std::ofstream(few) << "[discretization]\nepsilons = 1/2, 1/4\n";
  EXPECT_EQ(run_cli("convergence --config " + few.string() + " --out " + (dir / "f").string()), 2);
  EXPECT_EQ(run_cli("micro-run --epsilon 0.3 --config " + few.string() + " --out " + (dir / "f").string()), 2);
}

TEST(Cli, ValidateDefaultPasses) {
  const auto dir = scratch("validate");
  const auto cfg = write_config(dir, "");
  ASSERT_EQ(run_cli("validate --config " + cfg.string() + " --out " + dir.string()), 0);
  const auto report = read_report(dir / "validate_report.jsonl");
  std::size_t checks = 0;
  for (const auto& j : report)
    if (j["type"] == "check") {
      ++checks;
      EXPECT_TRUE(j["passed"].get<bool>()) << j.dump();
    }
  EXPECT_GE(checks, 15u);
}

TEST(Cli, MacroSteadyStateAndLedger) {
  const auto dir = scratch("macro_steady");
  const auto cfg = write_config(dir, "[initial]\nu0.value = 0.5\nr0.value = 0.25\n[discretization]\nmacro_n = 16\n"
                                     "T = 1/4\n[table]\ncount = 5\ntarget_h = 0.1\n");
  ASSERT_EQ(run_cli("macro-run --config " + cfg.string() + " --out " + dir.string()), 0);
  for (const auto& row : read_rows(dir / "macro_snapshot_000050.csv"))
    EXPECT_NEAR(row[2], 0.5, 1e-10);
  const auto ledger = read_rows(dir / "macro_ledger.csv");
  ASSERT_EQ(ledger.size(), 51u);
  for (std::size_t n = 1; n < ledger.size(); ++n)
    EXPECT_LE(std::fabs((ledger[n][1] - ledger[n - 1][1]) - (ledger[n][4] - ledger[n - 1][4])), 1e-9);
}

TEST(Cli, MacroGrowthMovesTowardsEquilibrium) {
  const auto dir = scratch("macro_growth");
  const auto cfg = write_config(dir, "[table]\ncount = 5\ntarget_h = 0.1\n[discretization]\nmacro_n = 16\n");
  ASSERT_EQ(run_cli("macro-run --config " + cfg.string() + " --out " + dir.string()), 0);
  double mean_u = 0.0, mean_r = 0.0;
  const auto rows = read_rows(dir / "macro_snapshot_000100.csv");
  for (const auto& row : rows) {
    mean_u += row[2] / static_cast<double>(rows.size());
    mean_r += row[3] / static_cast<double>(rows.size());
  }
  EXPECT_GT(mean_r, 0.2);
  EXPECT_LT(mean_u, 0.9);
  const auto ledger = read_rows(dir / "macro_ledger.csv");
  for (std::size_t n = 1; n < ledger.size(); ++n)
    EXPECT_LE(std::fabs((ledger[n][1] - ledger[n - 1][1]) - (ledger[n][4] - ledger[n - 1][4])), 1e-9);
}

TEST(Cli, MicroSteadyState) {
  const auto dir = scratch("micro_steady");
  const auto cfg = write_config(dir, "[initial]\nu0.value = 0.5\nr0.value = 0.25\n[discretization]\nT = 1/4\n");
  ASSERT_EQ(run_cli("micro-run --epsilon 0.5 --config " + cfg.string() + " --out " + dir.string()), 0);
  for (const auto& row : read_rows(dir / "micro_n2_snapshot_000050.csv"))
    EXPECT_NEAR(row[2], 0.5, 1e-10);
  for (const auto& row : read_rows(dir / "micro_n2_cells.csv"))
    EXPECT_EQ(row[3], 0.25);
}

TEST(Cli, MicroPinnedMatchesPlainSolver) {
  const auto dir = scratch("micro_pinned");
  ASSERT_EQ(run_cli("micro-run --epsilon 0.25 --config " + (kSource / "configs" / "pinned.ini").string() +
                    " --out " + dir.string()),
            0);
  const auto report = read_report(dir / "micro_run_report.jsonl");
  const auto* c = find_check(report, "pinned_matches_plain");
  ASSERT_NE(c, nullptr);
  EXPECT_TRUE((*c)["passed"].get<bool>());
}

TEST(Cli, MicroGrowthRadiiMonotoneAndDeterministic) {
  const auto dir = scratch("micro_growth");
  const auto cfg = write_config(dir, "[discretization]\ntarget_h = 0.1\n");
  ASSERT_EQ(run_cli("micro-run --quiet --epsilon 0.5 --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli("micro-run --quiet --epsilon 0.5 --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
  EXPECT_EQ(outputs_of(dir / "a"), outputs_of(dir / "b"));
  std::map<std::pair<int, int>, std::vector<double>> series;
  for (const auto& row : read_rows(dir / "a" / "micro_n2_cells.csv"))
    series[{static_cast<int>(row[1]), static_cast<int>(row[2])}].push_back(row[3]);
  ASSERT_EQ(series.size(), 4u);
  for (const auto& [cell, r] : series) {
    ASSERT_EQ(r.size(), 101u);
    for (std::size_t n = 1; n < r.size(); ++n)
      EXPECT_GE(r[n], r[n - 1]);
    EXPECT_GT(r.back(), r.front());
  }
}

TEST(Cli, ConvergenceStudyReports) {
  // Default cell resolutions: at target_h = 0.1 the cell discretisation floor masks the epsilon decay.
  const auto dir = scratch("convergence");
  const auto cfg = write_config(dir, "[discretization]\nmacro_n = 16\ndt = 1/100\nT = 0.1\n");
  ASSERT_EQ(run_cli("convergence --quiet --config " + cfg.string() + " --out " + dir.string()), 0);
  const auto rows = read_rows(dir / "convergence.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GT(rows[0][0], rows[1][0]);
  EXPECT_GT(rows[0][1], rows[1][1]);
  EXPECT_GT(rows[1][1], rows[2][1]);
  const auto report = read_report(dir / "convergence_report.jsonl");
  bool slope = false;
  for (const auto& j : report)
    slope = slope || (j["type"] == "metric" && j["name"] == "u_slope");
  EXPECT_TRUE(slope);

  const auto steady_dir = scratch("convergence_steady");
  const auto steady = write_config(steady_dir, std::string(kSmallGrowth) + "[initial]\nu0.value = 0.5\n");
  ASSERT_EQ(run_cli("convergence --quiet --config " + steady.string() + " --out " + steady_dir.string()), 0);
  const auto sreport = read_report(steady_dir / "convergence_report.jsonl");
  ASSERT_NE(find_check(sreport, "steady_errors"), nullptr);
  for (const auto& j : sreport)
    EXPECT_FALSE(j["type"] == "metric" && j["name"] == "u_slope");
}
