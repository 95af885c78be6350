// Nodal field containers and the analytic metric families used as g0.
#pragma once

#include "deform/grid.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

namespace deform {

inline int num_components(int dim) { return dim * (dim + 1) / 2; }

/// Index of the (i, j) entry in the packed upper-triangular layout.
inline int comp_index(int i, int j, int dim) {
  if (i > j) std::swap(i, j);
  return i * dim - i * (i - 1) / 2 + (j - i);
}

/// Symmetric 2-tensor per node, packed upper triangle, stored nodes x components
/// so that the column-major flattening is component-major (comp * N + node).
template <typename Scalar>
struct SymTensorFieldT {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  int dim = 2;
  Storage comp;
  std::vector<std::uint8_t> support;  // empty: no restriction recorded

  static SymTensorFieldT zeros(int dim, int nodes) {
    SymTensorFieldT f;
    f.dim = dim;
    f.comp = Storage::Zero(nodes, num_components(dim));
    return f;
  }
  int num_nodes() const { return static_cast<int>(comp.rows()); }

  Matrix3 at(int node) const {
    Matrix3 m = Matrix3::Zero();
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) m(i, j) = m(j, i) = comp(node, comp_index(i, j, dim));
    return m;
  }
  void set(int node, const Matrix3& m) {
    for (int i = 0; i < dim; ++i)
      for (int j = i; j < dim; ++j) comp(node, comp_index(i, j, dim)) = Scalar(0.5) * (m(i, j) + m(j, i));
  }
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> flat() const {
    return {comp.data(), comp.size()};
  }
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> flat() { return {comp.data(), comp.size()}; }

  SymTensorFieldT& operator+=(const SymTensorFieldT& o) {
    comp += o.comp;
    return *this;
  }
  friend SymTensorFieldT operator+(SymTensorFieldT a, const SymTensorFieldT& b) { return a += b; }
  friend SymTensorFieldT operator-(SymTensorFieldT a, const SymTensorFieldT& b) {
    a.comp -= b.comp;
    return a;
  }
  friend SymTensorFieldT operator*(Scalar s, SymTensorFieldT a) {
    a.comp *= s;
    return a;
  }
};

using SymTensorField = SymTensorFieldT<double>;
using ScalarField = Vec;
using BoundaryScalarField = Vec;  // one value per grid node, only Σ entries are meaningful

enum class Provenance { Base, Iterate };

struct MetricField : SymTensorField {
  Provenance provenance = Provenance::Base;
  MetricField() = default;
  explicit MetricField(SymTensorField f, Provenance p = Provenance::Base)
      : SymTensorField(std::move(f)), provenance(p) {}
};

/// Analytic metric families; `file` reads a CSV produced by the field exporter.
struct MetricSpec {
  std::string kind = "conformal_bump";  // flat | conformal_bump | round_sphere | file
  double amplitude = 0.2;
  std::array<double, 3> center{0.5, 0.2, 0.5};
  double width = 0.2;
  std::string path;
  bool operator==(const MetricSpec&) const = default;
};

MetricField make_metric(const DomainGrid& grid, const MetricSpec& spec);
MetricField flat_metric(const DomainGrid& grid);
MetricField conformal_metric(const DomainGrid& grid, const Vec& w);  // e^{2w} δ

/// C-infinity bump exp(1 - 1/(1 - r^2)) with r = |x - c| / radius, equal to 1 at the center.
double smooth_bump(const Eigen::Vector3d& x, const Eigen::Vector3d& c, double radius, int dim);

/// Gaussian exp(-|x - c|^2 / (2 s^2)).
double gaussian(const Eigen::Vector3d& x, const Eigen::Vector3d& c, double s, int dim);

/// Samples a scalar function of the node coordinates.
template <typename F>
Vec sample(const DomainGrid& grid, F&& f) {
  Vec v(grid.num_nodes());
  for (int nd = 0; nd < grid.num_nodes(); ++nd) v[nd] = f(grid.coords(nd));
  return v;
}

/// Zero outside the support mask (nodes with role Interior or Sigma).
std::vector<std::uint8_t> support_mask(const DomainGrid& grid);

/// Smallest eigenvalue of g over all nodes, with the offending node when negative.
double min_eigenvalue(const SymTensorField& g, int* node = nullptr);

void write_scalar_csv(const std::string& path, const DomainGrid& grid, const Vec& v);
void write_tensor_csv(const std::string& path, const DomainGrid& grid, const SymTensorField& t);
SymTensorField read_tensor_csv(const std::string& path, const DomainGrid& grid);

}  // namespace deform
