// Assembled linearized system at g0: Dirichlet problems, P, B̂, complement basis, full solve.
#pragma once

#include "deform/operators.hpp"
#include "deform/weights.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace deform {

struct AssemblyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OrderingError : std::logic_error {
  using std::logic_error::logic_error;
};
struct DefectCompletionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverParams {
  double svd_tol = 1e-8;
  int max_candidates = 40;
  double cg_tol = 1e-10;
  bool force_cg = false;
  unsigned seed = 1;
  bool operator==(const SolverParams&) const = default;
};

struct SolveReport {
  double interior_residual = 0;      // relative, dual (H²₀)* norm
  double boundary_residual = 0;      // relative, D* norm
  double interior_residual_sup = 0;  // relative max-norm of M⁻¹ r on free nodes
  double boundary_residual_sup = 0;  // relative max-norm on Σ unknowns
  double sigma_min = 0;              // of B̂ in the D metric
  double sigma_max = 0;
  int defect_dim = 0;
  double stability_constant = 0;     // ‖a‖_{L²_{1/ρ}} / (‖f‖ + ‖ψ‖)
  std::string method = "ldlt";
  int cg_iterations = 0;
  long factor_nnz = 0;
  bool flagged = false;              // residual above tolerance (not fatal)
  double wall_seconds = 0;
};

/// Discrete system at g0. Tensor vectors are component-major (p * N + node); scalar data
/// on Σ (ψ, û traces) are N-vectors whose entries on Σ unknown nodes are meaningful.
struct LinearizedSystem {
  Geometry geo;
  WeightSystem ws;
  SolverParams params;

  SpMat A_Lstar;  // (nc N) x N, clamped closure on Σ (exact L* for u with u_ν = 0)
  SpMat A_L;      // N x (nc N)
  SpMat A_B;      // N x (nc N), 2 Hdot on Σ rows
  SpMat W_rho;    // tensor inner product with dμ ρ
  SpMat W;        // tensor inner product with dμ
  Vec M;          // dμ per node
  Vec M_sigma;    // dσ per node (Σ face)

  std::vector<int> z_nodes;    // interior unknowns
  std::vector<int> b_nodes;    // Σ unknowns
  std::vector<int> z_of;       // node -> z index or -1
  std::vector<int> b_of;       // node -> b index or -1
  SpMat Pz, Pb;                // prolongations: u = Pz z + Pb b
  SpMat K;                     // A*ᵀ W_ρ A*
  SpMat Kzz;
  SpMat A4;                    // M⁻¹ K: discrete L(ρ L* ·)
  double C0 = 0;               // sup_Σ ‖h‖²_ĝ

  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> factor;
  bool use_cg = false;

  // Built on first boundary solve.
  bool boundary_built = false;
  Mat E;        // N x nb extension
  Mat G_D;      // = P
  Mat K1, K2;   // B̂ = P − K2 − K1
  Mat Bhat;
  Mat L_D;      // Cholesky factor of G_D
  Mat U, V;     // SVD of L⁻¹ B̂ L⁻ᵀ
  Vec sv;
  int rank = 0;

  bool complement_built = false;
  std::vector<SymTensorField> complement;
  Mat complement_images;  // L⁻¹ M_Σ B(a_i), columns

  // Collocated form, built on first use: exact discrete derivatives of (R, 2H) applied to
  // ρ A* u, one equation per interior and Σ unknown.
  bool collocated_built = false;
  SpMat collocated;
  std::shared_ptr<Eigen::SparseLU<SpMat>> collocated_factor;

  int num_nodes() const { return geo.num_nodes(); }
  int nz() const { return static_cast<int>(z_nodes.size()); }
  int nb() const { return static_cast<int>(b_nodes.size()); }
};

LinearizedSystem assemble(const DomainGrid& grid, const SymTensorField& g0, const WeightSystem& ws,
                          const SolverParams& params = {});

/// ρ A* u as a tensor field.
SymTensorField rho_Lstar(const LinearizedSystem& sys, const Vec& u);

/// Minimizer of ½‖L*u‖²_ρ − ⟨f,u⟩ with u = u_ν = 0 on Σ and u = 0 on pinned nodes.
Vec solve_dirichlet_zero(const LinearizedSystem& sys, const Vec& f, SolveReport* report = nullptr);
/// Same with a right-hand side already tested against the z space (length nz).
Vec solve_dirichlet_zero_dual(const LinearizedSystem& sys, const Vec& rhs_z, SolveReport* report = nullptr);

/// Discrete extension: L(ρL*u) = 0 weakly, u = û and u_ν = 0 on Σ.
Vec solve_dirichlet_boundary(LinearizedSystem& sys, const Vec& uhat);

void build_boundary_operators(LinearizedSystem& sys);

Vec to_boundary(const LinearizedSystem& sys, const Vec& full);    // N -> nb
Vec from_boundary(const LinearizedSystem& sys, const Vec& local);  // nb -> N

/// Functionals on Σ unknowns (returned as N-vectors): ⟨Pû, ·⟩ and ⟨B̂û, ·⟩.
Vec apply_P(LinearizedSystem& sys, const Vec& uhat);
Vec apply_Bhat(LinearizedSystem& sys, const Vec& uhat);

/// Weak boundary operator: M_Σ⁻¹ P_bᵀ A*ᵀ W a − ⟨a, h⟩_ĝ on Σ unknowns.
Vec weak_B(const LinearizedSystem& sys, const SymTensorField& a);
/// Pointwise 2 Hdot(a) on Σ unknowns.
Vec strong_B(const LinearizedSystem& sys, const SymTensorField& a);
/// Interior equation residual tested against the z space: P_zᵀ (A*ᵀ W a − M f).
Vec interior_residual(const LinearizedSystem& sys, const SymTensorField& a, const Vec& f);

const std::vector<SymTensorField>& complement_basis(LinearizedSystem& sys, int max_candidates, double svd_tol);

/// a = ρL*u₀ + ρL*Eû₁ + Σ c_i a_i solving L(a) = f (weakly) and B(a) = ψ on Σ.
SymTensorField solve_linearized(LinearizedSystem& sys, const Vec& f, const Vec& psi, SolveReport* report = nullptr);

/// Same ansatz a = ρL*u solved pointwise: dR(a) = f on interior unknowns and 2 dH(a) = ψ on
/// Σ unknowns, with dR, dH the exact derivatives of the discrete curvature at g0. The
/// factorization is cached. Report residuals are relative max-norms.
SymTensorField solve_linearized_collocated(LinearizedSystem& sys, const Vec& f, const Vec& psi,
                                           SolveReport* report = nullptr);

double D_norm(LinearizedSystem& sys, const Vec& uhat);
/// Dual norm of a functional on Σ unknowns given as an N-vector.
double Dstar_norm(LinearizedSystem& sys, const Vec& functional);
/// Integral form of D_norm via the extension, for cross-checks.
double D_norm_direct(LinearizedSystem& sys, const Vec& uhat);

/// ‖a‖_{L²_{1/ρ}} over nodes with ρ > 0 in the metric g0.
double tensor_norm_L2_rho_inv(const LinearizedSystem& sys, const SymTensorField& a);
/// sup of φ^r ρ^s Σ_j φ^j |D^j a| over free nodes, maximized over components.
double tensor_weighted_sup(const LinearizedSystem& sys, const SymTensorField& a, double r, double s);

/// Dual norm of the interior data ‖P_zᵀ M f‖_{K_zz⁻¹}.
double interior_data_norm(const LinearizedSystem& sys, const Vec& f);

struct PoincareConstants {
  double C_Lstar = 0;
  double C_Phi = 0;  // +inf when kernel_dim > 0
  int kernel_dim = 0;
};
/// Discrete Poincaré constants sup ‖u‖_{H²_ρ} / ‖L*u‖ and the Φ* analogue.
PoincareConstants poincare_constants(const LinearizedSystem& sys, int kernel_dim);

/// Gram matrix of the H²_ρ norm (Euclidean derivatives, trapezoid quadrature) on all nodes.
SpMat h2_rho_gram(const WeightSystem& ws);

/// Σ boundary map u -> u_ν ĝ − u h weighted by dσ ρ: Bdᵀ W_Σρ Bd.
SpMat phi_boundary_gram(const LinearizedSystem& sys);

}  // namespace deform
