#include "deform/operators.hpp"

#include <Eigen/SparseCore>
#include <unsupported/Eigen/AutoDiff>

namespace deform {

namespace {

using RowSp = Eigen::SparseMatrix<double, Eigen::RowMajor>;

std::pair<int, int> comp_pair(int p, int dim) {
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j)
      if (comp_index(i, j, dim) == p) return {i, j};
  return {-1, -1};
}

Eigen::Matrix3d unit_sym(int p, int dim) {
  auto [i, j] = comp_pair(p, dim);
  Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
  e(i, j) = e(j, i) = 1.0;
  return e;
}

template <typename F>
void for_row(const RowSp& m, int row, F&& f) {
  for (RowSp::InnerIterator it(m, row); it; ++it) f(static_cast<int>(it.col()), it.value());
}

bool is_tangential(const Geometry& geo, int a) { return a != geo.grid.sigma.axis; }

// Pointwise part of Hdot that does not involve differences of a. Linear in `a`.
double hdot_algebraic(const Geometry& geo, int nd, const Eigen::Matrix3d& a,
                      const std::array<Eigen::Vector3d, 3>& dnu) {
  const int n = geo.dim();
  const auto& c = geo.curv;
  const Eigen::Vector3d& nu = c.nu[nd];
  const Eigen::Matrix3d& gh = c.ghat_inv[nd];
  Eigen::Vector3d omega = a * nu;
  double r = 0;
  for (int i = 0; i < n; ++i) {
    if (!is_tangential(geo, i)) continue;
    for (int j = 0; j < n; ++j) {
      if (!is_tangential(geo, j)) continue;
      double gij = gh(i, j);
      double s = 0;
      for (int sg = 0; sg < n; ++sg) {
        double t1 = 0;
        for (int l = 0; l < n; ++l)
          t1 += c.Gamma(nd, l, sg, i) * a(l, j) + c.Gamma(nd, l, sg, j) * a(i, l);
        s += -0.5 * nu[sg] * t1;
        s += a(j, sg) * dnu[i][sg];
        for (int l = 0; l < n; ++l) s += c.Gamma(nd, l, i, sg) * a(j, l) * nu[sg];
      }
      for (int l = 0; l < n; ++l) s += c.Gamma(nd, l, i, j) * omega[l];
      r += gij * s;
    }
  }
  r += 0.5 * nu.dot(a * nu) * c.H[nd];
  r -= (gh * a * gh).cwiseProduct(c.h[nd]).sum();
  return r;
}

// Tangential derivatives of the unit normal field at a Σ node.
std::array<Eigen::Vector3d, 3> normal_gradient(const Geometry& geo, const std::array<RowSp, 3>& d1r, int nd) {
  std::array<Eigen::Vector3d, 3> dnu;
  for (int i = 0; i < 3; ++i) dnu[i].setZero();
  for (int i = 0; i < geo.dim(); ++i) {
    if (!is_tangential(geo, i)) continue;
    for_row(d1r[i], nd, [&](int m, double w) { dnu[i] += w * geo.curv.nu[m]; });
  }
  return dnu;
}

std::array<RowSp, 3> row_major_d1(const Geometry& geo, const DiffOps& ops) {
  std::array<RowSp, 3> r;
  for (int a = 0; a < geo.dim(); ++a) r[a] = ops.d1[a];
  return r;
}

// Fourth-order first difference along one axis of a nodes x cols array.
Mat diff4(const DomainGrid& grid, const Mat& f, int axis) {
  const int m = grid.n[axis];
  if (m < 5) throw ConfigError("at least 5 nodes per axis are required");
  const double c = 1.0 / (12.0 * grid.h[axis]);
  static const double edge0[5] = {-25, 48, -36, 16, -3};
  static const double edge1[5] = {-3, -10, 18, -6, 1};
  static const double mid[5] = {1, -8, 0, 8, -1};
  int stride = 1;
  for (int a = 0; a < axis; ++a) stride *= grid.n[a];
  Mat out(f.rows(), f.cols());
  for (int nd = 0; nd < grid.num_nodes(); ++nd) {
    const int i = grid.index(nd)[axis];
    const double* w;
    int start, dir = 1;
    if (i == 0) { w = edge0; start = 0; }
    else if (i == 1) { w = edge1; start = -1; }
    else if (i == m - 1) { w = edge0; start = 0; dir = -1; }
    else if (i == m - 2) { w = edge1; start = -1; dir = -1; }
    else { w = mid; start = -2; }
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(f.cols());
    for (int q = 0; q < 5; ++q) acc += w[q] * f.row(nd + dir * (start + q) * stride);
    out.row(nd) = dir * c * acc;
  }
  return out;
}

std::vector<std::array<double, 27>> fourth_order_christoffel(const DomainGrid& grid, const SymTensorField& g,
                                                             const CurvatureData& curv) {
  const int n = grid.dim;
  const int N = grid.num_nodes();
  std::array<Mat, 3> dg;
  for (int a = 0; a < n; ++a) dg[a] = diff4(grid, g.comp, a);
  std::vector<std::array<double, 27>> out(N);
  for (int nd = 0; nd < N; ++nd) {
    double first[3][3][3] = {};
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          first[l][i][j] = 0.5 * (dg[i](nd, comp_index(j, l, n)) + dg[j](nd, comp_index(i, l, n)) -
                                  dg[l](nd, comp_index(i, j, n)));
    out[nd].fill(0.0);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int l = 0; l < n; ++l) s += curv.ginv[nd](k, l) * first[l][i][j];
          out[nd][9 * k + 3 * i + j] = s;
        }
  }
  return out;
}

}  // namespace

Mat packed_inner_block(const Eigen::Matrix3d& ginv, int dim) {
  const int nc = num_components(dim);
  Mat G(nc, nc);
  for (int p = 0; p < nc; ++p) {
    Eigen::Matrix3d ep = ginv * unit_sym(p, dim) * ginv;
    for (int q = 0; q < nc; ++q) G(p, q) = ep.cwiseProduct(unit_sym(q, dim)).sum();
  }
  return G;
}

Geometry make_geometry(const DomainGrid& grid, const SymTensorField& g0) {
  Geometry geo;
  geo.grid = grid;
  geo.ops = build_diff_ops(grid);
  geo.sbp_ops = build_diff_ops(grid, true);
  geo.g = g0;
  geo.curv = curvature(grid, geo.ops, g0);
  const int N = grid.num_nodes();
  geo.metric_block.resize(N);
  geo.ghat_block.resize(N);
  for (int nd = 0; nd < N; ++nd) {
    geo.metric_block[nd] = packed_inner_block(geo.curv.ginv[nd], grid.dim);
    if (grid.on_sigma_face(nd)) geo.ghat_block[nd] = packed_inner_block(geo.curv.ghat_inv[nd], grid.dim);
  }
  geo.gamma_op = fourth_order_christoffel(grid, g0, geo.curv);
  geo.dmu = grid.volume_weight.cwiseProduct(geo.curv.sqrt_det);
  geo.dsigma = grid.surface_weight.cwiseProduct(geo.curv.sqrt_det_ghat);
  return geo;
}

double tensor_inner(const Geometry& geo, int nd, const SymTensorField& a, const SymTensorField& b) {
  return a.comp.row(nd) * geo.metric_block[nd] * b.comp.row(nd).transpose();
}

SymTensorField tensor_from_function(const DomainGrid& grid,
                                    const std::function<Eigen::Matrix3d(const Eigen::Vector3d&)>& f) {
  SymTensorField t = SymTensorField::zeros(grid.dim, grid.num_nodes());
  for (int nd = 0; nd < grid.num_nodes(); ++nd) t.set(nd, f(grid.coords(nd)));
  return t;
}

// ---------------------------------------------------------------- L*

SymTensorField apply_Lstar(const Geometry& geo, const Vec& u) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  std::array<Vec, 3> du;
  std::array<std::array<Vec, 3>, 3> ddu;
  for (int a = 0; a < n; ++a) du[a] = geo.ops.d1[a] * u;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b <= a; ++b) ddu[a][b] = ddu[b][a] = geo.ops.d2[a][b] * u;

  SymTensorField out = SymTensorField::zeros(n, N);
  for (int nd = 0; nd < N; ++nd) {
    Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = ddu[i][j][nd];
        for (int k = 0; k < n; ++k) s -= geo.Gop(nd, k, i, j) * du[k][nd];
        hess(i, j) = s;
      }
    double lap = geo.curv.ginv[nd].cwiseProduct(hess).sum();
    Eigen::Matrix3d v = -lap * geo.g.at(nd) + hess - u[nd] * geo.curv.ricci.at(nd);
    out.set(nd, v);
  }
  return out;
}

SpMat lstar_matrix(const Geometry& geo) { return lstar_matrix(geo, geo.ops); }

SpMat lstar_matrix(const Geometry& geo, const DiffOps& ops) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  std::array<RowSp, 3> d1 = row_major_d1(geo, ops);
  std::array<std::array<RowSp, 3>, 3> d2;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b <= a; ++b) d2[a][b] = ops.d2[a][b];

  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(N) * nc * 16);
  for (int nd = 0; nd < N; ++nd) {
    const Eigen::Matrix3d g = geo.g.at(nd);
    const Eigen::Matrix3d& gi = geo.curv.ginv[nd];
    const Eigen::Matrix3d ric = geo.curv.ricci.at(nd);
    for (int p = 0; p < nc; ++p) {
      auto [i, j] = comp_pair(p, n);
      const int row = p * N + nd;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b <= a; ++b) {
          // both orderings (a,b), (b,a) share one mixed stencil
          const double delta = (a == i && b == j) || (a == j && b == i) ? 1.0 : 0.0;
          const double c2 = a == b ? -g(i, j) * gi(a, b) + delta : -2 * g(i, j) * gi(a, b) + delta;
          if (c2 == 0) continue;
          for_row(d2[a][b], nd, [&](int m, double w) { trip.emplace_back(row, m, c2 * w); });
        }
      for (int k = 0; k < n; ++k) {
        double c1 = -geo.Gop(nd, k, i, j);
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) c1 += g(i, j) * gi(a, b) * geo.Gop(nd, k, a, b);
        if (c1 == 0) continue;
        for_row(d1[k], nd, [&](int m, double w) { trip.emplace_back(row, m, c1 * w); });
      }
      if (ric(i, j) != 0) trip.emplace_back(row, nd, -ric(i, j));
    }
  }
  SpMat m(nc * N, N);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

DiffOps clamped_ops(const Geometry& geo) {
  const DomainGrid& grid = geo.grid;
  const int n = grid.dim;
  const int k = grid.sigma.axis;
  const int N = grid.num_nodes();
  const double h = grid.h[k];
  const double out = grid.outward_sign();
  DiffOps ops = geo.sbp_ops;
  std::vector<std::uint8_t> face(N, 0);
  for (int nd = 0; nd < N; ++nd) face[nd] = grid.on_sigma_face(nd);
  auto keep_off_face = [&](const SpMat& m, std::vector<Triplet>& t) {
    for (int c = 0; c < m.outerSize(); ++c)
      for (SpMat::InnerIterator it(m, c); it; ++it)
        if (!face[it.row()]) t.emplace_back(it.row(), it.col(), it.value());
  };
  std::array<RowSp, 3> d1 = row_major_d1(geo, geo.sbp_ops);

  // constrained normal derivative on the face: u_k = −Σ_t (g^{tk}/g^{kk}) u_t
  std::vector<Triplet> face_rows;
  for (int nd = 0; nd < N; ++nd) {
    if (!face[nd]) continue;
    const Eigen::Matrix3d& gi = geo.curv.ginv[nd];
    for (int t = 0; t < n; ++t) {
      if (t == k || gi(t, k) == 0) continue;
      const double c = -gi(t, k) / gi(k, k);
      for_row(d1[t], nd, [&](int m, double w) { face_rows.emplace_back(nd, m, c * w); });
    }
  }

  // reflected ghost node across Σ: D2_kk = 2(u_in − u0 + out·h·u_k)/h²
  std::vector<Triplet> t2;
  keep_off_face(ops.d2[k][k], t2);
  for (int nd = 0; nd < N; ++nd) {
    if (!face[nd]) continue;
    t2.emplace_back(nd, grid.inward(nd, 1), 2 / (h * h));
    t2.emplace_back(nd, nd, -2 / (h * h));
  }
  for (const Triplet& tr : face_rows) t2.emplace_back(tr.row(), tr.col(), 2 * out / h * tr.value());
  ops.d2[k][k].setFromTriplets(t2.begin(), t2.end());

  return ops;
}

// ---------------------------------------------------------------- L
//
// Conservative form: √g L(a) = ∂_a∂_b c^{ab} + ∂_k(c^{ab} Γ^k_ab) − √g <a, Ric>,
// c^{ab} = √g (a^{ab} − tr(a) g^{ab}).

namespace {

struct LCoefficients {
  // per node and packed component p: c^{ab}_p, v^k_p = c^{ab}_p Γ^k_ab, r_p
  std::vector<std::array<Eigen::Matrix3d, 6>> c;
  std::vector<std::array<Eigen::Vector3d, 6>> v;
  Mat r;
};

LCoefficients l_coefficients(const Geometry& geo) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  const auto& cv = geo.curv;
  LCoefficients L;
  L.c.resize(N);
  L.v.resize(N);
  L.r.resize(N, nc);
  for (int nd = 0; nd < N; ++nd) {
    const Eigen::Matrix3d& gi = cv.ginv[nd];
    const Eigen::Matrix3d ric = cv.ricci.at(nd);
    for (int p = 0; p < nc; ++p) {
      Eigen::Matrix3d e = unit_sym(p, n);
      Eigen::Matrix3d up = gi * e * gi;
      Eigen::Matrix3d c = cv.sqrt_det[nd] * (up - gi.cwiseProduct(e).sum() * gi);
      Eigen::Vector3d v = Eigen::Vector3d::Zero();
      for (int k = 0; k < n; ++k)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) v[k] += c(a, b) * geo.Gop(nd, k, a, b);
      L.c[nd][p] = c;
      L.v[nd][p] = v;
      L.r(nd, p) = -up.cwiseProduct(ric).sum();
    }
  }
  return L;
}

// On boundary rows the normal stencils are one-sided and the conservative form loses
// accuracy; there L is the exact linearization of the pointwise curvature formula in the
// jet (a, D1 a, D2 a). Layout of a returned row: [a_p | D1_c a_p | D2_cd a_p (c <= d)].
// The second row is the derivative of H (zero off the Σ face).
std::pair<Eigen::VectorXd, Eigen::VectorXd> jet_linearization(const Geometry& geo,
                                                              const std::vector<MetricJet<double>>& jets, int nd,
                                                              bool with_H) {
  using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
  const int n = geo.dim();
  const int nc = geo.ncomp();
  const int npair = n * (n + 1) / 2;
  const int nvar = nc * (1 + n + npair);
  MetricJet<AD> j;
  j.dim = n;
  auto seed = [&](AD& x, double v, int var) {
    x = AD(v, nvar, var);
  };
  const MetricJet<double>& jd = jets[nd];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      j.g(a, b) = AD(jd.g(a, b), Eigen::VectorXd::Zero(nvar));
      for (int c = 0; c < 3; ++c) j.dg[c](a, b) = AD(jd.dg[c](a, b), Eigen::VectorXd::Zero(nvar));
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) j.ddg[c][d](a, b) = AD(jd.ddg[c][d](a, b), Eigen::VectorXd::Zero(nvar));
    }
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      const int p = comp_index(a, b, n);
      seed(j.g(a, b), jd.g(a, b), p);
      j.g(b, a) = j.g(a, b);
      for (int c = 0; c < n; ++c) {
        seed(j.dg[c](a, b), jd.dg[c](a, b), nc + c * nc + p);
        j.dg[c](b, a) = j.dg[c](a, b);
      }
      for (int c = 0; c < n; ++c)
        for (int d = c; d < n; ++d) {
          const int var = nc * (1 + n) + comp_index(c, d, n) * nc + p;
          seed(j.ddg[c][d](a, b), jd.ddg[c][d](a, b), var);
          j.ddg[c][d](b, a) = j.ddg[c][d](a, b);
          j.ddg[d][c](a, b) = j.ddg[d][c](b, a) = j.ddg[c][d](a, b);
        }
    }
  PointCurvature<AD> pc = point_curvature(j);
  auto derivs = [&](const AD& x) {
    Eigen::VectorXd d = x.derivatives();
    return d.size() == nvar ? d : Eigen::VectorXd::Zero(nvar);
  };
  Eigen::VectorXd dR = derivs(pc.scalar);
  Eigen::VectorXd dH = Eigen::VectorXd::Zero(nvar);
  if (with_H && geo.grid.on_sigma_face(nd))
    dH = derivs(point_boundary(j.g, pc, n, geo.grid.sigma.axis, geo.grid.outward_sign()).H);
  return {dR, dH};
}

Eigen::VectorXd jet_linearization_row(const Geometry& geo, const std::vector<MetricJet<double>>& jets, int nd) {
  return jet_linearization(geo, jets, nd, false).first;
}

// Appends the stencil expansion of a jet row at node nd to row `out` of a triplet list.
void expand_jet_row(const Geometry& geo, const Eigen::VectorXd& row, int nd, int out,
                    const std::array<RowSp, 3>& d1, const std::array<std::array<RowSp, 3>, 3>& d2,
                    std::vector<Triplet>& trip) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  for (int p = 0; p < nc; ++p) {
    if (row[p] != 0) trip.emplace_back(out, p * N + nd, row[p]);
    for (int c = 0; c < n; ++c) {
      const double f = row[nc + c * nc + p];
      if (f != 0) for_row(d1[c], nd, [&](int m, double w) { trip.emplace_back(out, p * N + m, f * w); });
      for (int d = c; d < n; ++d) {
        const double f2 = row[nc * (1 + n) + comp_index(c, d, n) * nc + p];
        if (f2 != 0) for_row(d2[d][c], nd, [&](int m, double w) { trip.emplace_back(out, p * N + m, f2 * w); });
      }
    }
  }
}

}  // namespace

Vec apply_L(const Geometry& geo, const SymTensorField& a) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  LCoefficients L = l_coefficients(geo);

  Vec acc = Vec::Zero(N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      Vec s = Vec::Zero(N);
      for (int nd = 0; nd < N; ++nd)
        for (int p = 0; p < nc; ++p) s[nd] += L.c[nd][p](i, j) * a.comp(nd, p);
      acc += (i == j ? 1.0 : 2.0) * (geo.ops.d2[i][j] * s);
    }
  for (int k = 0; k < n; ++k) {
    Vec s = Vec::Zero(N);
    for (int nd = 0; nd < N; ++nd)
      for (int p = 0; p < nc; ++p) s[nd] += L.v[nd][p][k] * a.comp(nd, p);
    acc += geo.ops.d1[k] * s;
  }
  Vec out(N);
  for (int nd = 0; nd < N; ++nd) out[nd] = acc[nd] / geo.curv.sqrt_det[nd] + L.r.row(nd).dot(a.comp.row(nd));

  auto jets = metric_jets(geo.grid, geo.ops, geo.g);
  std::array<Mat, 3> da;
  std::array<std::array<Mat, 3>, 3> dda;
  for (int c = 0; c < n; ++c) da[c] = geo.ops.d1[c] * a.comp;
  for (int c = 0; c < n; ++c)
    for (int d = c; d < n; ++d) dda[c][d] = geo.ops.d2[d][c] * a.comp;
  for (int nd = 0; nd < N; ++nd) {
    if (geo.grid.role[nd] == NodeRole::Interior) continue;
    Eigen::VectorXd row = jet_linearization_row(geo, jets, nd);
    double v = 0;
    for (int p = 0; p < nc; ++p) {
      v += row[p] * a.comp(nd, p);
      for (int c = 0; c < n; ++c) v += row[nc + c * nc + p] * da[c](nd, p);
      for (int c = 0; c < n; ++c)
        for (int d = c; d < n; ++d) v += row[nc * (1 + n) + comp_index(c, d, n) * nc + p] * dda[c][d](nd, p);
    }
    out[nd] = v;
  }
  return out;
}

SpMat l_matrix(const Geometry& geo) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  LCoefficients L = l_coefficients(geo);
  std::array<RowSp, 3> d1 = row_major_d1(geo, geo.ops);
  std::array<std::array<RowSp, 3>, 3> d2;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b <= a; ++b) d2[a][b] = geo.ops.d2[a][b];

  auto jets = metric_jets(geo.grid, geo.ops, geo.g);

  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(N) * nc * 24);
  for (int nd = 0; nd < N; ++nd) {
    if (geo.grid.role[nd] != NodeRole::Interior) {
      expand_jet_row(geo, jet_linearization_row(geo, jets, nd), nd, nd, d1, d2, trip);
      continue;
    }
    const double isg = 1.0 / geo.curv.sqrt_det[nd];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        const double f = (i == j ? 1.0 : 2.0) * isg;
        for_row(d2[i][j], nd, [&](int m, double w) {
          for (int p = 0; p < nc; ++p) {
            double val = f * w * L.c[m][p](i, j);
            if (val != 0) trip.emplace_back(nd, p * N + m, val);
          }
        });
      }
    for (int k = 0; k < n; ++k)
      for_row(d1[k], nd, [&](int m, double w) {
        for (int p = 0; p < nc; ++p) {
          double val = isg * w * L.v[m][p][k];
          if (val != 0) trip.emplace_back(nd, p * N + m, val);
        }
      });
    for (int p = 0; p < nc; ++p)
      if (L.r(nd, p) != 0) trip.emplace_back(nd, p * N + nd, L.r(nd, p));
  }
  SpMat m(N, nc * N);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

CurvatureJacobian curvature_jacobian(const Geometry& geo) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  std::array<RowSp, 3> d1 = row_major_d1(geo, geo.ops);
  std::array<std::array<RowSp, 3>, 3> d2;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b <= a; ++b) d2[a][b] = geo.ops.d2[a][b];
  auto jets = metric_jets(geo.grid, geo.ops, geo.g);
  std::vector<Triplet> tr, th;
  for (int nd = 0; nd < N; ++nd) {
    auto [dR, dH] = jet_linearization(geo, jets, nd, true);
    expand_jet_row(geo, dR, nd, nd, d1, d2, tr);
    if (geo.grid.on_sigma_face(nd)) expand_jet_row(geo, dH, nd, nd, d1, d2, th);
  }
  CurvatureJacobian J;
  J.R.resize(N, nc * N);
  J.H.resize(N, nc * N);
  J.R.setFromTriplets(tr.begin(), tr.end());
  J.H.setFromTriplets(th.begin(), th.end());
  return J;
}

// ---------------------------------------------------------------- Hdot
//
// Hdot = ½ ĝ^{ij} ν^σ (∇_σ a)_ij − ĝ^{ij} ν^σ (∇_i a)_jσ + ½ a(ν,ν) H − <a,h>_ĝ,
// with the tangential divergence taken of the nodal 1-form ω_j = a(ν, e_j).

namespace {

struct HdotStencil {
  Eigen::Matrix<double, 3, 6> alpha = Eigen::Matrix<double, 3, 6>::Zero();  // on D_c a_p
  Eigen::Matrix3d beta = Eigen::Matrix3d::Zero();                          // on D_i ω_j
};

HdotStencil hdot_stencil(const Geometry& geo, int nd) {
  const int n = geo.dim();
  HdotStencil st;
  const Eigen::Matrix3d& gh = geo.curv.ghat_inv[nd];
  const Eigen::Vector3d& nu = geo.curv.nu[nd];
  for (int sg = 0; sg < n; ++sg)
    for (int p = 0; p < geo.ncomp(); ++p) {
      auto [i, j] = comp_pair(p, n);
      st.alpha(sg, p) = (i == j ? 0.5 : 1.0) * gh(i, j) * nu[sg];
    }
  st.beta = -gh;
  return st;
}

}  // namespace

Vec apply_Hdot(const Geometry& geo, const SymTensorField& a) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  const DomainGrid& grid = geo.grid;
  if (!a.support.empty()) {
    for (int nd : grid.sigma_nodes)
      for (int layer = 0; layer < 3; ++layer)
        if (!a.support[grid.inward(nd, layer)])
          throw StencilError("Hdot needs the tensor on 3 node layers above each Sigma node");
  }
  std::array<RowSp, 3> d1 = row_major_d1(geo, geo.ops);
  std::array<Mat, 3> da;
  for (int c = 0; c < n; ++c) da[c] = geo.ops.d1[c] * a.comp;
  Mat omega = Mat::Zero(N, n);
  for (int nd = 0; nd < N; ++nd)
    if (grid.on_sigma_face(nd)) omega.row(nd) = (a.at(nd) * geo.curv.nu[nd]).head(n).transpose();
  std::array<Mat, 3> domega;
  for (int i = 0; i < n; ++i) domega[i] = geo.ops.d1[i] * omega;

  Vec out = Vec::Zero(N);
  for (int nd : grid.sigma_nodes) {
    HdotStencil st = hdot_stencil(geo, nd);
    double v = 0;
    for (int c = 0; c < n; ++c)
      for (int p = 0; p < geo.ncomp(); ++p) v += st.alpha(c, p) * da[c](nd, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (st.beta(i, j) != 0) v += st.beta(i, j) * domega[i](nd, j);
    v += hdot_algebraic(geo, nd, a.at(nd), normal_gradient(geo, d1, nd));
    out[nd] = v;
  }
  return out;
}

Vec apply_B(const Geometry& geo, const SymTensorField& a) { return 2.0 * apply_Hdot(geo, a); }

SpMat hdot_matrix(const Geometry& geo) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  std::array<RowSp, 3> d1 = row_major_d1(geo, geo.ops);
  std::vector<Triplet> trip;
  for (int nd : geo.grid.sigma_nodes) {
    HdotStencil st = hdot_stencil(geo, nd);
    for (int c = 0; c < n; ++c)
      for (int p = 0; p < nc; ++p)
        if (st.alpha(c, p) != 0)
          for_row(d1[c], nd, [&](int m, double w) { trip.emplace_back(nd, p * N + m, st.alpha(c, p) * w); });
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (st.beta(i, j) == 0) continue;
        for_row(d1[i], nd, [&](int m, double w) {
          const Eigen::Vector3d& nu = geo.curv.nu[m];
          for (int sg = 0; sg < n; ++sg)
            if (nu[sg] != 0) trip.emplace_back(nd, comp_index(j, sg, n) * N + m, st.beta(i, j) * w * nu[sg]);
        });
      }
    auto dnu = normal_gradient(geo, d1, nd);
    for (int p = 0; p < nc; ++p) {
      double val = hdot_algebraic(geo, nd, unit_sym(p, n), dnu);
      if (val != 0) trip.emplace_back(nd, p * N + nd, val);
    }
  }
  SpMat m(N, nc * N);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

// ---------------------------------------------------------------- Φ* and Green

Vec normal_derivative(const Geometry& geo, const Vec& u) {
  const int N = geo.num_nodes();
  Vec out = Vec::Zero(N);
  std::array<Vec, 3> du;
  for (int a = 0; a < geo.dim(); ++a) du[a] = geo.ops.d1[a] * u;
  for (int nd = 0; nd < N; ++nd) {
    if (!geo.grid.on_sigma_face(nd)) continue;
    for (int a = 0; a < geo.dim(); ++a) out[nd] += geo.curv.nu[nd][a] * du[a][nd];
  }
  return out;
}

SpMat normal_derivative_matrix(const Geometry& geo) {
  const int N = geo.num_nodes();
  std::array<RowSp, 3> d1 = row_major_d1(geo, geo.ops);
  std::vector<Triplet> trip;
  for (int nd = 0; nd < N; ++nd) {
    if (!geo.grid.on_sigma_face(nd)) continue;
    for (int a = 0; a < geo.dim(); ++a) {
      double c = geo.curv.nu[nd][a];
      if (c != 0) for_row(d1[a], nd, [&](int m, double w) { trip.emplace_back(nd, m, c * w); });
    }
  }
  SpMat m(N, N);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

PhiStarValue apply_Phi_star(const Geometry& geo, const Vec& u) {
  PhiStarValue out;
  out.interior = apply_Lstar(geo, u);
  out.boundary = SymTensorField::zeros(geo.dim(), geo.num_nodes());
  Vec unu = normal_derivative(geo, u);
  for (int nd : geo.grid.sigma_nodes) {
    Eigen::Matrix3d ghat = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d g = geo.g.at(nd);
    for (int i = 0; i < geo.dim(); ++i)
      for (int j = 0; j < geo.dim(); ++j)
        if (is_tangential(geo, i) && is_tangential(geo, j)) ghat(i, j) = g(i, j);
    out.boundary.set(nd, unu[nd] * ghat - u[nd] * geo.curv.h[nd]);
  }
  return out;
}

SpMat phi_boundary_matrix(const Geometry& geo) {
  const int n = geo.dim();
  const int N = geo.num_nodes();
  SpMat dn = normal_derivative_matrix(geo);
  RowSp dnr = dn;
  std::vector<Triplet> trip;
  for (int nd : geo.grid.sigma_nodes) {
    Eigen::Matrix3d g = geo.g.at(nd);
    for (int p = 0; p < geo.ncomp(); ++p) {
      auto [i, j] = comp_pair(p, n);
      if (!is_tangential(geo, i) || !is_tangential(geo, j)) continue;
      for_row(dnr, nd, [&](int m, double w) { trip.emplace_back(p * N + nd, m, g(i, j) * w); });
      double hij = geo.curv.h[nd](i, j);
      if (hij != 0) trip.emplace_back(p * N + nd, nd, -hij);
    }
  }
  SpMat m(geo.ncomp() * N, N);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

GreensTerms greens_terms(const Geometry& geo, const SymTensorField& a, const Vec& u) {
  const int N = geo.num_nodes();
  Vec La = apply_L(geo, a);
  SymTensorField Lsu = apply_Lstar(geo, u);
  Vec Hd = apply_Hdot(geo, a);
  Vec unu = normal_derivative(geo, u);
  GreensTerms t;
  for (int nd = 0; nd < N; ++nd) {
    t.lhs += geo.dmu[nd] * La[nd] * u[nd];
    t.rhs += geo.dmu[nd] * tensor_inner(geo, nd, a, Lsu);
  }
  for (int nd : geo.grid.sigma_nodes) {
    Eigen::Matrix3d an = a.at(nd);
    const Eigen::Matrix3d& gh = geo.curv.ghat_inv[nd];
    double ah = (gh * an * gh).cwiseProduct(geo.curv.h[nd]).sum();
    double tr = gh.cwiseProduct(an).sum();
    t.lhs += geo.dsigma[nd] * 2.0 * Hd[nd] * u[nd];
    t.rhs += geo.dsigma[nd] * (-u[nd] * ah + unu[nd] * tr);
  }
  return t;
}

double greens_residual(const Geometry& geo, const SymTensorField& a, const Vec& u) {
  return greens_terms(geo, a, u).residual();
}

SpMat tensor_weight_matrix(const Geometry& geo, const Vec& w) {
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(N) * nc * nc);
  for (int nd = 0; nd < N; ++nd) {
    if (w[nd] == 0) continue;
    for (int p = 0; p < nc; ++p)
      for (int q = 0; q < nc; ++q) trip.emplace_back(p * N + nd, q * N + nd, w[nd] * geo.metric_block[nd](p, q));
  }
  SpMat m(nc * N, nc * N);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SpMat boundary_tensor_weight_matrix(const Geometry& geo, const Vec& w) {
  const int N = geo.num_nodes();
  const int nc = geo.ncomp();
  std::vector<Triplet> trip;
  for (int nd : geo.grid.sigma_nodes) {
    if (w[nd] == 0) continue;
    for (int p = 0; p < nc; ++p)
      for (int q = 0; q < nc; ++q) {
        double v = w[nd] * geo.ghat_block[nd](p, q);
        if (v != 0) trip.emplace_back(p * N + nd, q * N + nd, v);
      }
  }
  SpMat m(nc * N, nc * N);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

// ---------------------------------------------------------------- Taylor remainders

TaylorTable taylor_check(const DomainGrid& grid, const SymTensorField& g0, const SymTensorField& a,
                         const std::vector<double>& t_values) {
  Geometry geo = make_geometry(grid, g0);
  Vec La = apply_L(geo, a);
  Vec Ha = apply_Hdot(geo, a);
  auto spd = [&](double t) { return min_eigenvalue(g0 + t * a) > 0; };

  TaylorTable table;
  for (double t : t_values) {
    TaylorRow row;
    row.t = t;
    if (!spd(t)) {
      row.admissible = false;
      double lo = 0, hi = t;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (spd(mid) ? lo : hi) = mid;
      }
      if (table.largest_admissible_t == 0 || lo < table.largest_admissible_t) table.largest_admissible_t = lo;
      table.rows.push_back(row);
      continue;
    }
    CurvatureData ct = curvature(grid, geo.ops, g0 + t * a);
    for (int nd = 0; nd < grid.num_nodes(); ++nd) {
      NodeRole r = grid.role[nd];
      if (r == NodeRole::Interior || r == NodeRole::Sigma)
        row.remainder_R = std::max(row.remainder_R, std::abs(ct.scalar[nd] - geo.curv.scalar[nd] - t * La[nd]));
    }
    for (int nd : grid.sigma_nodes)
      row.remainder_H = std::max(row.remainder_H, std::abs(ct.H[nd] - geo.curv.H[nd] - t * Ha[nd]));
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace deform
