// Fixed-point iteration g_{j+1} = g_j + a_j with the linearization frozen at g0.
#pragma once

#include "deform/system.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deform {

struct PicardParams {
  double tol = 1e-6;
  int max_iter = 20;
  double eps_max = 1.25;    // largest admissible initial residual (weighted sup pair)
  double floor_factor = 0;  // discretization allowance C in tol + C h²; 0 disables
  bool operator==(const PicardParams&) const = default;
};

enum class Termination { None, Converged, ZeroData, Floor, MaxIter, SpdLoss, Divergence };
std::string termination_name(Termination t);

struct ResidualNorms {
  double R_L2 = 0;   // ‖R′ − R(g)‖ in L²_{1/ρ} over interior unknowns
  double H_L2 = 0;   // ‖H′ − H(g)‖ in L²_ρ over Σ unknowns
  double R_sup = 0;  // max φ^{n/2} ρ^{−1/2} |R′ − R(g)| over interior unknowns
  double H_sup = 0;  // max |H′ − H(g)| on Σ unknowns
  double total() const { return R_L2 + H_L2; }
  double sup_total() const { return R_sup + H_sup; }
};

struct StepRecord {
  int step = 0;
  ResidualNorms residual;  // of g_step, before the correction
  double a_sup = 0;        // max |a_step| component
  double leak = 0;         // max |a_step| outside the support mask before masking
  double min_eig = 0;      // smallest eigenvalue of g_{step+1}
  double solve_interior = 0, solve_boundary = 0;
};

struct IterationState {
  int step = 0;
  MetricField g;
  SymTensorField a;  // last correction
  std::vector<StepRecord> history;
  ResidualNorms final_residual;
  double allowance = 0;  // tol + C h² actually applied
  Termination reason = Termination::None;
  std::string message;
  double delta_hat = 0;
  bool delta_fitted = false;
};

struct DivergenceError : std::runtime_error {
  IterationState state;
  DivergenceError(const std::string& msg, IterationState s) : std::runtime_error(msg), state(std::move(s)) {}
};

ResidualNorms residual_norms(const LinearizedSystem& sys, const Vec& dR, const Vec& dH);

/// Runs the iteration from g0 toward (R_target, H_target). Throws DivergenceError when a
/// residual grows across a step above the allowance, and ConfigError when the initial
/// residual exceeds eps_max. The step that would lose positive definiteness is rejected
/// and the run stops with reason SpdLoss.
/// `on_step(j, g_{j+1}, a_j)` runs after every accepted step.
using StepCallback = std::function<void(int, const MetricField&, const SymTensorField&)>;
IterationState picard_run(LinearizedSystem& sys, const MetricField& g0, const Vec& R_target, const Vec& H_target,
                          const PicardParams& params = {}, const StepCallback& on_step = {});

struct LadderRow {
  int step = 0;
  double residual = 0;
  double predicted = 0;  // ε^{1+jδ̂}
};

struct ContractionFit {
  bool sufficient = false;
  double delta = 0;
  double log_eps = 0;   // fitted log ε
  double fit_residual = 0;
  std::vector<LadderRow> table;
  std::string note;
};

/// Least squares fit of log r_j ≈ (1 + jδ) log ε over the recorded residual totals.
ContractionFit contraction_fit(const std::vector<double>& residuals);
ContractionFit contraction_fit(const IterationState& state);

}  // namespace deform
