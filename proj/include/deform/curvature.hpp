// Christoffel symbols, Ricci/scalar curvature and Σ boundary geometry.
#pragma once

#include "deform/fields.hpp"

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <vector>

namespace deform {

struct DegenerateMetric : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Second-order jet of a metric at a point: g, dg[c](a,b) = ∂_c g_ab, ddg[c][d](a,b).
template <typename Scalar>
struct MetricJet {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  int dim = 2;
  Matrix3 g = Matrix3::Identity();
  std::array<Matrix3, 3> dg{Matrix3::Zero(), Matrix3::Zero(), Matrix3::Zero()};
  std::array<std::array<Matrix3, 3>, 3> ddg;
  MetricJet() {
    for (auto& row : ddg)
      for (auto& m : row) m.setZero();
  }
};

template <typename Scalar>
struct PointCurvature {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  Matrix3 ginv = Matrix3::Zero();
  Scalar gamma[3][3][3] = {};  // Γ^k_ij as gamma[k][i][j]
  Matrix3 ricci = Matrix3::Zero();
  Scalar scalar = Scalar(0);
};

/// Inverse of the leading dim x dim block, embedded in a 3x3 matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> block_inverse(const Eigen::Matrix<Scalar, 3, 3>& g, int dim) {
  Eigen::Matrix<Scalar, 3, 3> out = Eigen::Matrix<Scalar, 3, 3>::Zero();
  if (dim == 2)
    out.template topLeftCorner<2, 2>() = g.template topLeftCorner<2, 2>().inverse();
  else
    out = g.inverse();
  return out;
}

/// Curvature of a metric from its second-order jet at one point.
template <typename Scalar>
PointCurvature<Scalar> point_curvature(const MetricJet<Scalar>& j) {
  const int n = j.dim;
  PointCurvature<Scalar> c;
  c.ginv = block_inverse(j.g, n);

  // Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij) and its derivatives.
  Scalar first[3][3][3] = {};
  Scalar dfirst[3][3][3][3] = {};  // [m][l][i][j]
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        first[l][i][k] = Scalar(0.5) * (j.dg[i](k, l) + j.dg[k](i, l) - j.dg[l](i, k));
        for (int m = 0; m < n; ++m)
          dfirst[m][l][i][k] =
              Scalar(0.5) * (j.ddg[m][i](k, l) + j.ddg[m][k](i, l) - j.ddg[m][l](i, k));
      }
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        Scalar s(0);
        for (int l = 0; l < n; ++l) s += c.ginv(k, l) * first[l][a][b];
        c.gamma[k][a][b] = s;
      }

  // ∂_m Γ^k_ij = ∂_m g^{kl} Γ_lij + g^{kl} ∂_m Γ_lij, with ∂_m g^{-1} = −g^{-1} ∂_m g g^{-1}.
  Scalar dgamma[3][3][3][3] = {};  // [m][k][i][j]
  for (int m = 0; m < n; ++m) {
    Eigen::Matrix<Scalar, 3, 3> dginv = -(c.ginv * j.dg[m] * c.ginv);
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          Scalar s(0);
          for (int l = 0; l < n; ++l) s += dginv(k, l) * first[l][a][b] + c.ginv(k, l) * dfirst[m][l][a][b];
          dgamma[m][k][a][b] = s;
        }
  }

  // R_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Scalar s(0);
      for (int k = 0; k < n; ++k) {
        s += dgamma[k][k][a][b] - dgamma[b][k][a][k];
        for (int l = 0; l < n; ++l)
          s += c.gamma[k][k][l] * c.gamma[l][a][b] - c.gamma[k][b][l] * c.gamma[l][a][k];
      }
      c.ricci(a, b) = s;
    }
  c.ricci = (Scalar(0.5) * (c.ricci + c.ricci.transpose())).eval();
  Scalar r(0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) r += c.ginv(a, b) * c.ricci(a, b);
  c.scalar = r;
  return c;
}

/// Σ-face geometry at one point: outward unit normal, induced inverse metric,
/// second fundamental form h_ij = −⟨ν, D_{e_i} e_j⟩ and mean curvature H = ĝ^{ij} h_ij.
template <typename Scalar>
struct PointBoundary {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  Eigen::Matrix<Scalar, 3, 1> nu = Eigen::Matrix<Scalar, 3, 1>::Zero();
  Matrix3 ghat_inv = Matrix3::Zero();  // zero in the normal row/column
  Matrix3 h = Matrix3::Zero();         // tangential block only
  Scalar H = Scalar(0);
  Scalar sqrt_det_ghat = Scalar(1);
};

template <typename Scalar>
PointBoundary<Scalar> point_boundary(const Eigen::Matrix<Scalar, 3, 3>& g, const PointCurvature<Scalar>& c,
                                     int dim, int axis, int outward) {
  using std::sqrt;
  PointBoundary<Scalar> b;
  const Scalar s = Scalar(outward) / sqrt(c.ginv(axis, axis));
  for (int a = 0; a < dim; ++a) b.nu[a] = s * c.ginv(a, axis);
  int t[2];
  int nt = 0;
  for (int a = 0; a < dim; ++a)
    if (a != axis) t[nt++] = a;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gh(nt, nt);
  for (int p = 0; p < nt; ++p)
    for (int q = 0; q < nt; ++q) gh(p, q) = g(t[p], t[q]);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> ghi = gh.inverse();
  b.sqrt_det_ghat = sqrt(gh.determinant());
  for (int p = 0; p < nt; ++p)
    for (int q = 0; q < nt; ++q) {
      b.ghat_inv(t[p], t[q]) = ghi(p, q);
      // ν_α = s δ_α,axis, so h_ij = −ν_α Γ^α_ij = −s Γ^axis_ij.
      b.h(t[p], t[q]) = -s * c.gamma[axis][t[p]][t[q]];
    }
  Scalar H(0);
  for (int p = 0; p < nt; ++p)
    for (int q = 0; q < nt; ++q) H += b.ghat_inv(t[p], t[q]) * b.h(t[p], t[q]);
  b.H = H;
  return b;
}

/// Full curvature data of a metric field on the grid.
struct CurvatureData {
  int dim = 2;
  std::vector<Eigen::Matrix3d> ginv;
  std::vector<std::array<double, 27>> gamma;  // Γ^k_ij at [9k + 3i + j]
  SymTensorField ricci;
  Vec scalar;
  Vec sqrt_det;
  // Σ-face quantities, filled on Σ and Γ nodes.
  std::vector<Eigen::Vector3d> nu;
  std::vector<Eigen::Matrix3d> ghat_inv;
  std::vector<Eigen::Matrix3d> h;
  Vec H;
  Vec sqrt_det_ghat;

  double Gamma(int node, int k, int i, int j) const { return gamma[node][9 * k + 3 * i + j]; }
};

/// Jet of the metric at every node (second order, one-sided at the boundary).
std::vector<MetricJet<double>> metric_jets(const DomainGrid& grid, const DiffOps& ops,
                                           const SymTensorField& g);

CurvatureData curvature(const DomainGrid& grid, const DiffOps& ops, const SymTensorField& g);
CurvatureData curvature(const DomainGrid& grid, const SymTensorField& g);

/// Remainders of the first-order Taylor expansion of (R, H) around g0 along a.
struct TaylorRow {
  double t = 0;
  double remainder_R = 0;
  double remainder_H = 0;
  bool admissible = true;
};
struct TaylorTable {
  std::vector<TaylorRow> rows;
  double largest_admissible_t = 0;  // set when some requested t breaks positivity
};
TaylorTable taylor_check(const DomainGrid& grid, const SymTensorField& g0, const SymTensorField& a,
                         const std::vector<double>& t_values);

}  // namespace deform
