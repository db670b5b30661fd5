#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "nonlocal_rate/config.hpp"
#include "nonlocal_rate/experiments.hpp"

using namespace nonlocal_rate;
namespace fs = std::filesystem;

namespace {

const std::string kCli = NONLOCAL_RATE_CLI;
const fs::path kConfigs = NONLOCAL_RATE_CONFIGS;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nonlocal_rate_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("nonlocal_rate_cfg_" + name + ".ini");
  std::ofstream(p) << text;
  return p;
}

IniFile ini(const std::string& text) {
  std::istringstream in(text);
  return IniFile::parse(in);
}

}  // namespace

TEST(Config, ParsesSectionsAndRejectsUnknownKeys) {
  const auto c = parse_config(ini("experiment = ratend\nseed = 4\n[field]\nname = poly_bump\ndim = 2\n"
                                             "center = 0.1, 0\n[sweep]\nh = 0.2, 0.1\n[quadrature]\nangular = 32\n"));
  EXPECT_EQ(c.experiment, "ratend");
  EXPECT_EQ(c.field.dim, 2);
  ASSERT_EQ(c.field.center.size(), 2u);
  EXPECT_EQ(c.field.center[0], 0.1);
  EXPECT_EQ(c.h_list, (std::vector<double>{0.2, 0.1}));
  EXPECT_EQ(c.quadrature.angular, 32);
  ASSERT_TRUE(c.seed);
  EXPECT_EQ(*c.seed, 4u);
  EXPECT_THROW(parse_config(ini("[field]\ncolour = red\n")), ConfigError);
  EXPECT_THROW(parse_config(ini("[sweep]\nh = 0.1, abc\n")), ConfigError);
  EXPECT_THROW(ini("[field]\nname = a\nname = b\n"), ConfigError);
}

TEST(Config, ValidationRules) {
  auto base = [] {
    ExperimentConfig c;
    c.experiment = "rate1d";
    c.h_list = {0.2, 0.1};
    c.field.name = "sin_bump";
    return c;
  };
  EXPECT_NO_THROW(validate_config(base()));
  auto c = base();
  c.h_list = {0.1, 0.2};
  EXPECT_THROW(validate_config(c), ConfigError);
  c = base();
  c.h_list = {0.2, -0.1};
  EXPECT_THROW(validate_config(c), ConfigError);
  c = base();
  c.h_list.clear();
  EXPECT_THROW(validate_config(c), ConfigError);
  c = base();
  c.experiment = "nonsense";
  EXPECT_THROW(validate_config(c), ConfigError);
  c = base();
  c.field.dim = 2;
  c.field.center = {0.0, 0.0};
  EXPECT_THROW(validate_config(c), ConfigError);
  c = base();
  c.experiment = "ratend";
  c.method = "monte_carlo";
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(Cli, Rate1dSineReport) {
  const fs::path out = scratch("rate1d");
  ASSERT_EQ(run_cli("rate1d --config " + (kConfigs / "rate1d_sin.ini").string() + " --out " + out.string()), 0);
  const auto rows = read_csv(out / "report.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0][0], "h");
  EXPECT_EQ(rows[0][2], "value_0");
  const double e0 = std::stod(rows[1][2]);
  EXPECT_NEAR(e0, std::numbers::pi * std::numbers::pi / 24.0, 1e-8);
  EXPECT_GE(std::stod(rows[4][4]), 1.0);
  EXPECT_TRUE(fs::exists(out / "plot.svg"));
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_TRUE(j.contains("metadata"));
}

TEST(Cli, KernelReportD3) {
  const fs::path out = scratch("kernel");
  ASSERT_EQ(run_cli("kernel-report --config " + (kConfigs / "kernel_report_d3.ini").string() + " --out " + out.string()),
            0);
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_DOUBLE_EQ(j["kernel"]["sigma_d"].get<double>(), 0.5);
}

TEST(Cli, H2ProbeOnHatGrows) {
  const fs::path out = scratch("hat");
  const fs::path cfg = write_config("hat", "experiment = h2-probe\n[field]\nname = hat\ndim = 2\ncenter = 0, 0\n"
                                           "radius = 1\n[integrand]\nname = quadratic\n[kernel]\nname = ball\n"
                                           "[sweep]\nh = 0.1, 0.05, 0.025\n");
  ASSERT_EQ(run_cli("h2-probe --config " + cfg.string() + " --out " + out.string()), 0);
  const auto rows = read_csv(out / "report.csv");
  ASSERT_EQ(rows.size(), 4u);
  std::size_t col = 0;
  while (col < rows[0].size() && rows[0][col] != "value_h") ++col;
  ASSERT_LT(col, rows[0].size());
  for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_GT(std::stod(rows[i][col]), std::stod(rows[i - 1][col]));
}

TEST(Cli, BoundsAuditZeroFieldHasZeroMargins) {
  const fs::path out = scratch("zero");
  ASSERT_EQ(run_cli("bounds-audit --config " + (kConfigs / "bounds_audit_zero.ini").string() + " --out " + out.string()),
            0);
  const auto rows = read_csv(out / "report.csv");
  ASSERT_GT(rows.size(), 1u);
  ASSERT_EQ(rows[0][4], "margin");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string& check = rows[i][0];
    EXPECT_EQ(rows[i][6], "true") << check;
    if (check.find("Kt") != std::string::npos) continue;
    // With u = 0 the dual forms reduce to -int phi^2 / (4 lambda) < 0, so only
    // their margins are strictly positive.
    if (check.find("dual form") != std::string::npos && check.find("near_optimal") == std::string::npos)
      EXPECT_GT(std::stod(rows[i][4]), 0.0) << check;
    else
      EXPECT_EQ(std::stod(rows[i][4]), 0.0) << check;
  }
}

TEST(Cli, OddKernelIsAValidationError) {
  const fs::path out = scratch("odd");
  EXPECT_EQ(run_cli("bounds-audit --config " + (kConfigs / "bounds_audit_odd_kernel.ini").string() + " --out " +
                    out.string()),
            2);
}

TEST(Cli, AuditFailureExitsWithOne) {
  // A deliberately coarse hyperplane grid cannot meet the 1e-3 slicing tolerance.
  const fs::path out = scratch("coarse");
  const fs::path cfg = write_config("coarse", "experiment = slice-check\n[field]\nname = smooth_bump\ndim = 2\n"
                                              "center = 0, 0\nradius = 1\n[kernel]\nname = ball\n[sweep]\nh = 0.2\n"
                                              "[quadrature]\nnd_x_panels = 8\nslice_dx = 0.45\nslice_panels = 1\n"
                                              "slice_order = 2\n");
  EXPECT_EQ(run_cli("slice-check --config " + cfg.string() + " --out " + out.string()), 1);
  const auto rows = read_csv(out / "report.csv");
  ASSERT_EQ(rows.size(), 2u);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const fs::path out = scratch("bad");
  EXPECT_EQ(run_cli("rate1d --config /nonexistent.ini --out " + out.string()), 2);
  const fs::path bad = write_config("bad", "experiment = rate1d\n[sweep]\nh = 0.1, 0.2\n");
  EXPECT_EQ(run_cli("rate1d --config " + bad.string() + " --out " + out.string()), 2);
  EXPECT_EQ(run_cli("ratend --config " + (kConfigs / "rate1d_sin.ini").string() + " --out " + out.string()), 2);
  EXPECT_EQ(run_cli("rate1d --config " + (kConfigs / "rate1d_sin.ini").string() + " --threads 0"), 2);
  EXPECT_EQ(run_cli("rate1d"), 2);
}

TEST(Cli, CsvIsIdenticalAcrossThreadCounts) {
  const fs::path a = scratch("t1"), b = scratch("t3");
  const fs::path cfg = write_config("det", "experiment = ratend\n[field]\nname = random_bumps\ndim = 2\nseed = 5\n"
                                           "[integrand]\nname = cosh\n[kernel]\nname = annulus\n"
                                           "[sweep]\nh = 0.2, 0.1\n[quadrature]\nnd_x_panels = 8\n");
  ASSERT_EQ(run_cli("ratend --config " + cfg.string() + " --out " + a.string() + " --threads 1"), 0);
  ASSERT_EQ(run_cli("ratend --config " + cfg.string() + " --out " + b.string() + " --threads 3"), 0);
  EXPECT_EQ(slurp(a / "report.csv"), slurp(b / "report.csv"));
}
