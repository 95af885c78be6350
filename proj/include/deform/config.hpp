// Run configuration: sectioned key/value text, validated before any computation.
#pragma once

#include "deform/fields.hpp"
#include "deform/grid.hpp"
#include "deform/picard.hpp"
#include "deform/system.hpp"
#include "deform/weights.hpp"

#include <array>
#include <string>
#include <vector>

namespace deform {

struct BumpSpec {
  double amplitude = 0;
  std::array<double, 3> center{0.5, 0.5, 0.5};
  double width = 0.2;
  bool operator==(const BumpSpec&) const = default;
};

struct TargetSpec {
  // none: R′ = R(g0), H′ = H(g0); bumps: add dR, dH bumps; manufactured: R′, H′ of
  // g0 + a* with a* = dR.amplitude · ρ · bump(dR.center, dR.width) · diag-dominant matrix.
  std::string kind = "none";
  BumpSpec dR;
  BumpSpec dH;
  bool operator==(const TargetSpec&) const = default;
};

struct OutputSpec {
  std::string directory = "run";
  bool per_step_dumps = false;
  unsigned seed = 1;
  bool operator==(const OutputSpec&) const = default;
};

struct RunConfig {
  int dim = 2;
  std::array<double, 3> extents{1.0, 1.0, 1.0};
  int resolution = 33;
  std::string sigma_face;           // "y-", "x+", ...; empty: low face of the last axis
  std::vector<int> scan_resolutions;  // empty: derived from resolution
  MetricSpec metric;
  WeightParams weights;
  TargetSpec targets;
  SolverParams solver;
  PicardParams iteration;
  OutputSpec output;

  SigmaSpec sigma() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config_string(const std::string& text);
RunConfig parse_config_file(const std::string& path);
/// Range checks; throws ConfigError naming the offending key.
void validate(const RunConfig& cfg);
/// Canonical text form; parse_config_string(to_ini(c)) == c.
std::string to_ini(const RunConfig& cfg);

}  // namespace deform
