// Approximate distance θ to Σ′, weight ρ = (ρ̃∘θ)^N, Hölder radius φ, weighted norms.
#pragma once

#include "deform/grid.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace deform {

struct WeightError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WeightParams {
  double eps = 0.1;
  double r0 = 0.3;
  double r1 = 0.15;
  double N = 8;
  double smooth_min_power = 0;   // 0: 12 in dim 2, 16 in dim 3
  double theta_cut_factor = 2;   // θ_cut = factor * h
  bool operator==(const WeightParams&) const = default;
};

/// One failed node-by-node check.
struct WeightViolation {
  std::string check;
  int node = -1;
  double value = 0;
  double bound = 0;
};

struct WeightSystem {
  WeightParams params;
  DomainGrid grid;
  DiffOps ops;
  double p = 12;           // smooth-minimum exponent
  double theta_cut = 0;
  Vec d;                   // exact distance to Σ′
  Vec theta;               // capped approximate distance
  Mat grad_theta;          // nodes x dim, analytic
  std::vector<Eigen::Matrix3d> hess_theta;
  Vec rho, phi;
  std::vector<std::uint8_t> pinned;  // Σ′, Γ and θ < θ_cut

  // measured constants over {2h < θ < r0}
  double C1 = 0;          // max(|Dθ|, 1/|Dθ|)
  double C2 = 0;          // max θ |D²θ|
  double C_rho = 0;       // max_k≤2 |φ^k ρ^{-1} D^k ρ|
  std::vector<WeightViolation> violations;
};

/// Quintic smoothstep on [0,1] (C², clamped outside).
double smoothstep5(double s);
/// Cutoff profile η: 0 for t ≤ ½, 1 for t ≥ 1.
double eta(double t);
/// ρ̃: t on (0, r1), 1 beyond r0, C² monotone blend in between.
double rho_tilde(double t, double r0, double r1);
/// First and second derivative of ρ̃.
double rho_tilde_d1(double t, double r0, double r1);
double rho_tilde_d2(double t, double r0, double r1);

/// Corner blend in Fermi coordinates around Γ: σ tangential with Σ on σ < 0, τ ≥ 0 normal.
double corner_blend_distance(double sigma, double tau, double eps);

/// Builds θ, ρ, φ and checks every invariant node by node. Throws WeightError listing
/// the first violations unless `allow_violations` is set.
WeightSystem build_weights(const DomainGrid& grid, const WeightParams& params = {},
                           bool allow_violations = false);

// Scalar norms in model coordinates (trapezoid quadrature).
double norm_L2_rho(const WeightSystem& ws, const Vec& u);
double norm_L2_rho_inv(const WeightSystem& ws, const Vec& u);  // over non-pinned nodes
double norm_Hk_rho(const WeightSystem& ws, const Vec& u, int k);
/// sup φ^r ρ^s Σ_{j≤2} φ^j |D^j u| over non-pinned nodes.
double weighted_sup(const WeightSystem& ws, const Vec& u, double r, double s);

/// ∫ u² θ^{-2} ρ / ‖u ρ^{1/2}‖²_{H¹}.
double hardy_ratio(const WeightSystem& ws, const Vec& u);

/// Γ-approaching test family: C² bumps on boxes [δ_k, δ_k + s_k] × [0, s_k] next to the corner
/// at the origin, nonzero on Σ, with δ_k / s_k → 0. Members narrower than 3h are dropped.
std::vector<Vec> hardy_corner_family(const DomainGrid& grid, int max_members = 8);

}  // namespace deform
