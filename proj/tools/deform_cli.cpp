// deform: run | verify | export-plot-data
#include "deform/pipeline.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  if (const char* t = std::getenv("DEFORM_THREADS")) Eigen::setNbThreads(std::atoi(t));

  CLI::App app{"Compactly supported deformation of scalar and boundary mean curvature"};
  app.require_subcommand(1);

  std::string config, out_dir;
  int resolution = 0;
  auto* run = app.add_subcommand("run", "run the pipeline described by a config file");
  run->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (overrides output.directory)");
  run->add_option("--resolution", resolution, "grid resolution (overrides domain.resolution)")
      ->check(CLI::PositiveNumber);

  std::string suite;
  int verify_res = 33;
  auto* verify = app.add_subcommand("verify", "run an invariant suite");
  verify->add_option("--suite", suite, "operators|weights|solver|generic|iteration|all")->required();
  verify->add_option("--resolution", verify_res, "base resolution of the refinement studies");

  std::string run_dir;
  auto* plot = app.add_subcommand("export-plot-data", "write line-plot CSVs for a finished run");
  plot->add_option("run_dir", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : deform::kExitConfig;
  }

  try {
    if (*run) {
      deform::RunOutcome o = deform::run(config, {out_dir, resolution});
      std::cout << o.reason << " (exit " << o.exit_code << "), summary: " << o.summary_path << "\n";
      return o.exit_code;
    }
    if (*verify) return deform::verify(suite, std::cout, verify_res);
    if (*plot) {
      deform::export_plot_data(run_dir);
      std::cout << "wrote " << run_dir << "/plots\n";
      return 0;
    }
  } catch (const deform::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return deform::kExitConfig;
  } catch (const deform::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return deform::kExitConfig;
  }
  return 0;
}
