// Batch orchestration: config -> weights -> generic check -> assemble -> iterate -> outputs.
#pragma once

#include "deform/config.hpp"
#include "deform/generic.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace deform {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNonGeneric = 2, kExitDiverged = 3 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string out_dir;  // overrides output.directory
  int resolution = 0;   // overrides domain.resolution when > 0
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string reason;
  std::string summary_path;
};

RunOutcome run(const std::string& config_path, const RunOptions& opts = {});
RunOutcome run(const RunConfig& cfg, const RunOptions& opts = {});

/// Resolutions of the generic check: refinements of the run resolution for analytic
/// metrics, the run resolution and its injection-coarsened half for file metrics.
std::vector<int> scan_resolutions(const RunConfig& cfg);

/// Metric of the run on any grid of the scan. File metrics are read once at the run
/// resolution and injected onto coarser grids.
MetricProvider metric_provider(const RunConfig& cfg);

struct Targets {
  Vec R, H;
};
/// R′ and H′ as configured (see TargetSpec).
Targets make_targets(const RunConfig& cfg, const DomainGrid& grid, const WeightSystem& ws, const SymTensorField& g0);

/// Executable invariant suites: operators | weights | solver | generic | iteration | all.
/// Prints a table and returns 0 iff every check passes.
int verify(const std::string& suite, std::ostream& os, int resolution = 33);

/// Line-plot CSVs from a completed run directory, written to <run_dir>/plots.
void export_plot_data(const std::string& run_dir);

}  // namespace deform
