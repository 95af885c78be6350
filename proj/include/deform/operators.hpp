// Linearized curvature operators at a base metric: L, L*, Hdot, B, Phi*, Green's identity.
#pragma once

#include "deform/curvature.hpp"

#include <functional>
#include <memory>
#include <stdexcept>

namespace deform {

struct StencilError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Base metric with everything the linear operators read: grid, difference
/// matrices, curvature and per-node packed inner-product blocks.
struct Geometry {
  DomainGrid grid;
  DiffOps ops;
  // Summation-by-parts closures at end rows, for the normal equations of ‖L*u‖²: they stay
  // consistent next to Σ where the second-order one-sided rows of `ops` do not.
  DiffOps sbp_ops;
  SymTensorField g;
  CurvatureData curv;
  std::vector<Mat> metric_block;  // <a,b>_g = a_packed^T G b_packed
  std::vector<Mat> ghat_block;    // same with ĝ^{-1} on Σ-face nodes
  Vec dmu;                        // volume quadrature x sqrt(det g)
  Vec dsigma;                     // surface quadrature x sqrt(det ĝ) on the Σ face
  // Christoffel symbols from fourth-order first differences of g; coefficients of L and L*.
  std::vector<std::array<double, 27>> gamma_op;

  double Gop(int node, int k, int i, int j) const { return gamma_op[node][9 * k + 3 * i + j]; }

  int dim() const { return grid.dim; }
  int num_nodes() const { return grid.num_nodes(); }
  int ncomp() const { return num_components(grid.dim); }
};

Geometry make_geometry(const DomainGrid& grid, const SymTensorField& g0);

/// Packed Gram block of the tensor inner product induced by an inverse metric.
Mat packed_inner_block(const Eigen::Matrix3d& ginv, int dim);

double tensor_inner(const Geometry& geo, int node, const SymTensorField& a, const SymTensorField& b);

Vec apply_L(const Geometry& geo, const SymTensorField& a);
SymTensorField apply_Lstar(const Geometry& geo, const Vec& u);
Vec apply_Hdot(const Geometry& geo, const SymTensorField& a);  // nonzero on Σ nodes only
Vec apply_B(const Geometry& geo, const SymTensorField& a);

struct PhiStarValue {
  SymTensorField interior;  // L*u
  SymTensorField boundary;  // u_ν ĝ − u h on Σ nodes (tangential block)
};
PhiStarValue apply_Phi_star(const Geometry& geo, const Vec& u);

/// ν^α ∂_α u on Σ-face nodes (one-sided in the normal direction).
Vec normal_derivative(const Geometry& geo, const Vec& u);

struct GreensTerms {
  double lhs = 0;  // ∫ L(a) u + ∫_Σ 2 Hdot(a) u
  double rhs = 0;  // ∫ <a, L*u> + ∫_Σ (−u <a,h> + u_ν tr a)
  double residual() const { return std::abs(lhs - rhs); }
};
GreensTerms greens_terms(const Geometry& geo, const SymTensorField& a, const Vec& u);
double greens_residual(const Geometry& geo, const SymTensorField& a, const Vec& u);

// Sparse matrices of the same operators. Tensor vectors are component-major (p * N + node).
SpMat lstar_matrix(const Geometry& geo);    // (ncomp N) x N
SpMat lstar_matrix(const Geometry& geo, const DiffOps& ops);
/// L* stencils for functions with u_ν = 0 on Σ: on the face, D2 along the normal uses a
/// reflected ghost node carrying the constrained normal derivative. First differences keep
/// their summation-by-parts closure.
DiffOps clamped_ops(const Geometry& geo);
SpMat l_matrix(const Geometry& geo);        // N x (ncomp N)
SpMat hdot_matrix(const Geometry& geo);     // N x (ncomp N), rows on Σ nodes

/// Exact derivatives of the discrete maps g ↦ R(g) and g ↦ H(g) at g0 (pointwise jet
/// formulas composed with the difference stencils). H rows live on Σ-face nodes.
struct CurvatureJacobian {
  SpMat R;  // N x (ncomp N)
  SpMat H;  // N x (ncomp N)
};
CurvatureJacobian curvature_jacobian(const Geometry& geo);
SpMat phi_boundary_matrix(const Geometry& geo);  // (ncomp N) x N, rows on Σ nodes
SpMat normal_derivative_matrix(const Geometry& geo);  // N x N, rows on Σ-face nodes

/// Block-diagonal tensor inner product with per-node weights: sum_node w_node <a,b>_g.
SpMat tensor_weight_matrix(const Geometry& geo, const Vec& w);
/// Same with the induced metric ĝ on Σ nodes.
SpMat boundary_tensor_weight_matrix(const Geometry& geo, const Vec& w);

/// Sum of tensor fields and a symmetric-unit helper used by tests.
SymTensorField tensor_from_function(const DomainGrid& grid,
                                    const std::function<Eigen::Matrix3d(const Eigen::Vector3d&)>& f);

}  // namespace deform
