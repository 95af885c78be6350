#include "deform/config.hpp"
#include "deform/pipeline.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace deform;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("deform_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json load(const fs::path& p) {
  std::ifstream is(p);
  return nlohmann::json::parse(is);
}

std::string write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p.string();
}

int cli(const std::string& args) {
  const int rc = std::system((std::string(DEFORM_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kManufactured = R"(
[domain]
resolution = 33
[metric]
kind = conformal_bump
[targets]
kind = manufactured
dR_amplitude = 0.01
dR_center = 0.5, 0
dR_width = 0.3
)";

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config text round-trips") {
  RunConfig c;
  c.metric.kind = "round_sphere";
  c.weights.r0 = 0.25;
  c.targets.kind = "bumps";
  c.targets.dR.amplitude = 1e-3;
  c.targets.dR.center = {0.3, 0.4, 0.5};
  c.iteration.tol = 3.5e-7;
  c.output.per_step_dumps = true;
  c.sigma_face = "x+";
  c.scan_resolutions = {33, 49};
  CHECK(parse_config_string(to_ini(c)) == c);
  CHECK(parse_config_string(to_ini(RunConfig{})) == RunConfig{});
}

TEST_CASE("config errors name the offending key") {
  auto message = [](const std::string& text) -> std::string {
    try {
      validate(parse_config_string(text));
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("[domain]\nresolutoin = 33\n").find("resolutoin") != std::string::npos);
  CHECK(message("[nonsense]\nx = 1\n").find("nonsense") != std::string::npos);
  CHECK(message("[domain]\nextents = 1, 1, 1\n").find("extents") != std::string::npos);
  CHECK(message("[weights]\nepsilon = -1\n").find("epsilon") != std::string::npos);
  CHECK(message("[iteration]\ntol = abc\n").find("tol") != std::string::npos);
  CHECK(message("[metric]\nkind = wavy\n").find("kind") != std::string::npos);
  CHECK(message("").empty());
}

TEST_CASE("scan resolutions") {
  RunConfig c;
  CHECK(scan_resolutions(c) == std::vector<int>{33, 49, 65});
  c.dim = 3;
  c.resolution = 17;
  CHECK(scan_resolutions(c) == std::vector<int>{17, 25});
  c.metric.kind = "file";
  CHECK(scan_resolutions(c) == std::vector<int>{9, 17});
  c.scan_resolutions = {17, 21};
  CHECK(scan_resolutions(c) == std::vector<int>{17, 21});
}

TEST_CASE("manufactured run converges and writes its artifacts") {
  fs::path dir = scratch("manufactured");
  const std::string cfg = write(dir / "run.ini", kManufactured);
  RunOutcome o = run(cfg, {(dir / "out").string(), 0});
  CHECK(o.exit_code == kExitOk);
  CHECK(o.reason == "converged");
  auto s = load(o.summary_path);
  CHECK(s["schema"] == 1);
  CHECK(s["status"]["exit_code"] == 0);
  CHECK(s["kernel"]["verdict"] == "generic");
  CHECK(s["kernel"]["kernel_dim"] == 0);
  CHECK(s["final"]["max_metric_change_outside_support"] == 0.0);
  CHECK(s["iteration"]["final_residual"]["R_L2"].get<double>() < 1e-6);
  for (const char* f : {"theta", "rho", "phi", "R_initial", "H_initial", "R_final", "H_final", "metric_initial",
                        "metric_final", "a_final", "a_total"})
    CHECK(fs::exists(dir / "out" / "fields" / (std::string(f) + ".csv")));

  export_plot_data((dir / "out").string());
  for (const char* f : {"residual_vs_step", "sigma_spectrum", "theta_cross_section", "theta_diagonal"})
    CHECK(fs::exists(dir / "out" / "plots" / (std::string(f) + ".csv")));

  // same config, same numbers: only the timing block may differ
  RunOutcome o2 = run(cfg, {(dir / "out2").string(), 0});
  auto s2 = load(o2.summary_path);
  s.erase("timing");
  s2.erase("timing");
  s["config"]["output"].erase("directory");
  s2["config"]["output"].erase("directory");
  CHECK(s == s2);
}

TEST_CASE("theta profile along the cross section is monotone in the distance") {
  fs::path dir = scratch("profile");
  RunOutcome o = run(write(dir / "run.ini", kManufactured), {(dir / "out").string(), 0});
  REQUIRE(o.exit_code == kExitOk);
  export_plot_data((dir / "out").string());
  std::ifstream is(dir / "out" / "plots" / "theta_cross_section.csv");
  std::string line;
  std::vector<std::pair<double, double>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    double s, d, t, r;
    char c;
    std::istringstream(line) >> s >> c >> d >> c >> t >> c >> r;
    rows.emplace_back(d, t);
  }
  REQUIRE(rows.size() == 33);
  std::sort(rows.begin(), rows.end());
  for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].second >= rows[i - 1].second);
}

TEST_CASE("flat metric stops at the generic check") {
  fs::path dir = scratch("flat");
  RunOutcome o = run(write(dir / "run.ini", "[metric]\nkind = flat\n"), {(dir / "out").string(), 0});
  CHECK(o.exit_code == kExitNonGeneric);
  auto s = load(o.summary_path);
  CHECK(s["kernel"]["kernel_dim"] == 2);
  CHECK(s["kernel"]["static_properties"]["applicable"] == true);
  CHECK_FALSE(s.contains("iteration"));
}

TEST_CASE("invalid configuration exits with code 1") {
  fs::path dir = scratch("bad");
  RunOutcome o = run(write(dir / "run.ini", "[weights]\nr1 = 0.5\n"), {(dir / "out").string(), 0});
  CHECK(o.exit_code == kExitConfig);
  CHECK(load(o.summary_path)["status"]["exit_code"] == 1);
  CHECK_THROWS_AS(export_plot_data((dir / "missing").string()), IoError);
}

TEST_CASE("iteration cap exits with code 3") {
  fs::path dir = scratch("cap");
  std::string text = std::string(kManufactured) + "[iteration]\nmax_iter = 1\n";
  RunOutcome o = run(write(dir / "run.ini", text), {(dir / "out").string(), 0});
  CHECK(o.exit_code == kExitDiverged);
  CHECK(o.reason == "max_iter");
}

TEST_CASE("file metric is read back and coarsened by injection") {
  fs::path dir = scratch("file");
  RunOutcome base = run(write(dir / "base.ini", "[domain]\nresolution = 33\n"), {(dir / "base").string(), 0});
  REQUIRE(base.exit_code == kExitOk);
  std::string text = "[domain]\nresolution = 33\n[metric]\nkind = file\npath = " +
                     (dir / "base" / "fields" / "metric_initial.csv").string() + "\n";
  RunOutcome o = run(write(dir / "file.ini", text), {(dir / "out").string(), 0});
  auto s = load(o.summary_path);
  CHECK(s["config"]["domain"]["scan_resolutions"] == std::vector<int>{17, 33});
  CHECK(s["kernel"]["levels"].size() == 2);
  CHECK(o.exit_code != kExitConfig);
}

TEST_CASE("command line") {
  fs::path dir = scratch("cli");
  const std::string cfg = write(dir / "run.ini", kManufactured);
  CHECK(cli("run --config " + cfg + " --out " + (dir / "out").string()) == 0);
  CHECK(cli("export-plot-data " + (dir / "out").string()) == 0);
  CHECK(cli("run --config " + write(dir / "flat.ini", "[metric]\nkind = flat\n") + " --out " +
            (dir / "flat").string()) == 2);
  CHECK(cli("run --config " + write(dir / "bad.ini", "[domain]\ndim = 7\n") + " --out " + (dir / "bad").string()) ==
        1);
  CHECK(cli("run --config " + (dir / "absent.ini").string()) == 1);
  CHECK(cli("verify --suite nonsense") == 1);
  CHECK(cli("verify --suite weights") == 0);
  CHECK(cli("frobnicate") == 1);
}

}  // TEST_SUITE
