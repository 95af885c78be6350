// Structured grid over a rectangle/box, node roles, stencils and quadrature.
#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace deform {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Thrown for invalid user-facing configuration (bad resolution, weight radii, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class NodeRole : std::uint8_t { Interior, Sigma, SigmaPrime, Gamma };

/// Which face of the box is Σ: axis and side (0 = low coordinate, 1 = high).
struct SigmaSpec {
  int axis = -1;  // -1 means "last axis"
  int side = 0;
};

struct DomainGrid {
  int dim = 2;
  std::array<double, 3> extents{1.0, 1.0, 1.0};
  int resolution = 0;
  std::array<int, 3> n{1, 1, 1};
  std::array<double, 3> h{1.0, 1.0, 1.0};
  SigmaSpec sigma;

  std::vector<NodeRole> role;
  Vec volume_weight;
  Vec surface_weight;            // nonzero on the Σ face (Σ and Γ nodes)
  std::vector<int> sigma_nodes;  // Σ nodes in index order
  std::vector<int> gamma_nodes;

  int num_nodes() const { return n[0] * n[1] * n[2]; }
  int node(int i, int j, int k = 0) const { return i + n[0] * (j + n[1] * k); }
  std::array<int, 3> index(int node) const {
    return {node % n[0], (node / n[0]) % n[1], node / (n[0] * n[1])};
  }
  Eigen::Vector3d coords(int node) const {
    auto ix = index(node);
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    for (int a = 0; a < dim; ++a) x[a] = ix[a] * h[a];
    return x;
  }
  double h_min() const;
  /// Outward sign of the Σ face normal along sigma.axis (-1 for the low face).
  int outward_sign() const { return sigma.side == 0 ? -1 : 1; }
  bool on_sigma_face(int node) const;
  /// Node `layers` steps inward from a Σ-face node along the normal axis.
  int inward(int node, int layers) const;
};

/// Builds the grid; `r0` (if positive) is checked against the collar condition r0 >= 4h.
DomainGrid build_grid(int dim, const std::array<double, 3>& extents, int resolution,
                      SigmaSpec sigma = {}, double r0 = 0.0);

/// One-dimensional difference weights at position i of an n-point axis.
struct Stencil1D {
  std::array<int, 4> offset{};
  std::array<double, 4> weight{};
  int size = 0;
};

/// Per-axis first/second difference stencils (second order, one-sided at the ends).
struct StencilSet {
  int n = 0;
  double h = 1.0;
  bool sbp = false;  // end rows: first() is (−1, 1)/h, second() reuses the adjacent central stencil
  Stencil1D first(int i) const;
  Stencil1D second(int i) const;
};

/// Sparse difference matrices on all nodes: d1[a], d2[a][b] (d2[a][b] = d1[a] d1[b] for a != b).
struct DiffOps {
  int dim = 2;
  std::array<SpMat, 3> d1;
  std::array<std::array<SpMat, 3>, 3> d2;
};

/// `sbp` selects end-row closures for which trapezoid quadrature gives a summation-by-parts
/// identity whose boundary derivative is the one-sided (−3, 4, −1)/2h stencil.
DiffOps build_diff_ops(const DomainGrid& grid, bool sbp = false);

/// Exact distance to the Σ′ portion of the boundary in model coordinates.
Vec euclidean_distance_to_sigma_prime(const DomainGrid& grid);

/// Distances of every node to each Σ′ face plane (columns), used by the smooth minimum.
Mat sigma_prime_face_distances(const DomainGrid& grid);

/// Unit inward-from-face normals of the Σ′ face planes, matching the columns above.
std::vector<Eigen::Vector3d> sigma_prime_face_normals(const DomainGrid& grid);

inline double integrate(const DomainGrid& grid, const Vec& f) {
  return grid.volume_weight.dot(f);
}
inline double integrate_sigma(const DomainGrid& grid, const Vec& f) {
  return grid.surface_weight.dot(f);
}

std::string role_name(NodeRole r);

}  // namespace deform
