// Numerical test of the generic condition (trivial kernel of Φ*) by refinement scaling.
#pragma once

#include "deform/operators.hpp"
#include "deform/weights.hpp"

#include <functional>
#include <string>
#include <vector>

namespace deform {

struct KernelScanParams {
  int num_values = 6;        // trailing singular values kept per level
  double min_order = 1.0;    // kernel values must shrink at least like h
  double gap_tolerance = 0.25;  // allowed relative spread of the first non-kernel value
  double roundoff = 1e-10;   // below roundoff·σ_next a value counts as an exact zero
  unsigned seed = 1;
};

struct KernelLevel {
  int resolution = 0;
  double h = 0;
  Vec sigma;  // ascending
  bool converged = true;
};

enum class KernelVerdict { Generic, NonGeneric, Indeterminate };
std::string verdict_name(KernelVerdict v);

struct KernelReport {
  std::vector<KernelLevel> levels;
  int kernel_dim = 0;
  KernelVerdict verdict = KernelVerdict::Indeterminate;
  std::vector<double> kernel_orders;  // worst refinement order of each kernel value
  double gap_spread = 0;              // max/min − 1 of σ_{kernel_dim} over levels
  std::string note;
  // finest level
  DomainGrid grid;
  WeightParams weights;
  std::vector<Vec> basis;  // orthonormal in L²(dμ), zero on pinned nodes
};

using MetricProvider = std::function<SymTensorField(const DomainGrid&)>;

/// Trailing singular values of u ↦ (L*u, u_ν ĝ − u h) in the ρ-weighted norms at each
/// resolution, over nodes that are not pinned by the weight.
KernelReport kernel_scan(int dim, const std::array<double, 3>& extents, SigmaSpec sigma,
                         const MetricProvider& metric, const std::vector<int>& resolutions,
                         const WeightParams& weights = {}, const KernelScanParams& params = {});

KernelReport kernel_scan(int dim, const std::array<double, 3>& extents, SigmaSpec sigma, const MetricSpec& metric,
                         const std::vector<int>& resolutions, const WeightParams& weights = {},
                         const KernelScanParams& params = {});

/// Smallest singular values at one level; the basis of the `keep` smallest is returned too.
KernelLevel phi_star_spectrum(const Geometry& geo, const WeightSystem& ws, int count, unsigned seed,
                              std::vector<Vec>* vectors = nullptr);

struct StaticCheck {
  std::string name;
  double deviation = 0;
  double tolerance = 0;
  bool pass = true;
  bool vacuous = false;
};

struct StaticReport {
  bool applicable = false;  // kernel_dim ≥ 1
  std::vector<StaticCheck> checks;
  bool all_pass() const;
};

/// Consequences of a nontrivial kernel: constant R, locally constant H, umbilic Σ (dim ≥ 3),
/// and u_{iν} = u R_{iν} on Σ for every basis element. Constancy is measured as the
/// oscillation (max − min) with tolerance 10 h² max(1, sup|·|); the ODE residual is allowed h·scale.
StaticReport check_static_properties(const KernelReport& report, const SymTensorField& g0);

}  // namespace deform
