#include "deform/curvature.hpp"

#include <sstream>

namespace deform {

std::vector<MetricJet<double>> metric_jets(const DomainGrid& grid, const DiffOps& ops,
                                           const SymTensorField& g) {
  const int n = grid.dim;
  const int N = grid.num_nodes();
  std::vector<Mat> d1(n), d2(n * n);
  for (int a = 0; a < n; ++a) d1[a] = ops.d1[a] * g.comp;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b <= a; ++b) d2[a * n + b] = ops.d2[a][b] * g.comp;

  std::vector<MetricJet<double>> jets(N);
  for (int nd = 0; nd < N; ++nd) {
    MetricJet<double>& j = jets[nd];
    j.dim = n;
    j.g = g.at(nd);
    for (int i = 0; i < n; ++i)
      for (int k = i; k < n; ++k) {
        int p = comp_index(i, k, n);
        for (int a = 0; a < n; ++a) {
          j.dg[a](i, k) = j.dg[a](k, i) = d1[a](nd, p);
          for (int b = 0; b <= a; ++b) {
            double v = d2[a * n + b](nd, p);
            j.ddg[a][b](i, k) = j.ddg[a][b](k, i) = v;
            j.ddg[b][a](i, k) = j.ddg[b][a](k, i) = v;
          }
        }
      }
  }
  return jets;
}

CurvatureData curvature(const DomainGrid& grid, const DiffOps& ops, const SymTensorField& g) {
  const int n = grid.dim;
  const int N = grid.num_nodes();
  {
    int bad = -1;
    double lo = min_eigenvalue(g, &bad);
    if (!(lo > 0)) {
      Eigen::Vector3d x = grid.coords(bad);
      std::ostringstream os;
      os << "metric is not positive definite at node " << bad << " (" << x[0] << ", " << x[1];
      if (n == 3) os << ", " << x[2];
      os << "), smallest eigenvalue " << lo;
      throw DegenerateMetric(os.str());
    }
  }

  auto jets = metric_jets(grid, ops, g);
  CurvatureData c;
  c.dim = n;
  c.ginv.resize(N);
  c.gamma.resize(N);
  c.ricci = SymTensorField::zeros(n, N);
  c.scalar.resize(N);
  c.sqrt_det.resize(N);
  c.nu.assign(N, Eigen::Vector3d::Zero());
  c.ghat_inv.assign(N, Eigen::Matrix3d::Zero());
  c.h.assign(N, Eigen::Matrix3d::Zero());
  c.H = Vec::Zero(N);
  c.sqrt_det_ghat = Vec::Zero(N);

  for (int nd = 0; nd < N; ++nd) {
    PointCurvature<double> pc = point_curvature(jets[nd]);
    c.ginv[nd] = pc.ginv;
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c.gamma[nd][9 * k + 3 * i + j] = pc.gamma[k][i][j];
    c.ricci.set(nd, pc.ricci);
    c.scalar[nd] = pc.scalar;
    c.sqrt_det[nd] = std::sqrt(jets[nd].g.topLeftCorner(n, n).determinant());
    if (grid.on_sigma_face(nd)) {
      PointBoundary<double> pb = point_boundary(jets[nd].g, pc, n, grid.sigma.axis, grid.outward_sign());
      c.nu[nd] = pb.nu;
      c.ghat_inv[nd] = pb.ghat_inv;
      c.h[nd] = pb.h;
      c.H[nd] = pb.H;
      c.sqrt_det_ghat[nd] = pb.sqrt_det_ghat;
    }
  }
  return c;
}

CurvatureData curvature(const DomainGrid& grid, const SymTensorField& g) {
  return curvature(grid, build_diff_ops(grid), g);
}

}  // namespace deform
