#include "deform/system.hpp"

#include "deform/eigs.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SVD>

#include <chrono>
#include <limits>
#include <random>

namespace deform {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SpMat selection(int N, const std::vector<int>& nodes) {
  std::vector<Triplet> t;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) t.emplace_back(nodes[i], i, 1.0);
  SpMat S(N, static_cast<int>(nodes.size()));
  S.setFromTriplets(t.begin(), t.end());
  return S;
}

// ⟨a, h⟩_ĝ at a Σ node.
double inner_h(const Geometry& geo, int nd, const SymTensorField& a) {
  const Eigen::Matrix3d& gh = geo.curv.ghat_inv[nd];
  return (gh * a.at(nd) * gh).cwiseProduct(geo.curv.h[nd]).sum();
}

Vec solve_zz(const LinearizedSystem& sys, const Vec& rhs, SolveReport* report) {
  if (rhs.size() == 0) return rhs;
  if (!sys.use_cg) {
    Vec z = sys.factor->solve(rhs);
    if (sys.factor->info() != Eigen::Success) throw NumericError("factorized solve failed");
    z += sys.factor->solve(rhs - sys.Kzz * z);  // one refinement step: ρ spans many decades
    if (report) {
      report->method = "ldlt";
      report->factor_nnz = static_cast<long>(sys.factor->matrixL().nestedExpression().nonZeros());
    }
    return z;
  }
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(sys.params.cg_tol);
  cg.setMaxIterations(20 * static_cast<int>(rhs.size()));
  cg.compute(sys.Kzz);
  Vec z = cg.solve(rhs);
  if (report) {
    report->method = "cg";
    report->cg_iterations = static_cast<int>(cg.iterations());
  }
  if (cg.info() != Eigen::Success) throw NumericError("conjugate gradient did not converge");
  return z;
}

Mat solve_zz(const LinearizedSystem& sys, const Mat& rhs) {
  Mat out(rhs.rows(), rhs.cols());
  if (!sys.use_cg) {
    out = sys.factor->solve(rhs);
    out += sys.factor->solve(rhs - sys.Kzz * out);
    return out;
  }
  for (int j = 0; j < rhs.cols(); ++j) out.col(j) = solve_zz(sys, Vec(rhs.col(j)), nullptr);
  return out;
}

double dual_norm_zz(const LinearizedSystem& sys, const Vec& r) {
  if (r.size() == 0) return 0;
  return std::sqrt(std::max(0.0, r.dot(solve_zz(sys, r, nullptr))));
}

}  // namespace

LinearizedSystem assemble(const DomainGrid& grid, const SymTensorField& g0, const WeightSystem& ws,
                          const SolverParams& params) {
  LinearizedSystem sys;
  sys.geo = make_geometry(grid, g0);
  sys.ws = ws;
  sys.params = params;
  const Geometry& geo = sys.geo;
  const int N = grid.num_nodes();
  if (grid.n[grid.sigma.axis] < 5) throw AssemblyError("need at least 5 node layers normal to Sigma");

  // u_ν = 0 on Σ lives in the stencils (reflected ghost node), so Σ values are the only
  // boundary unknowns.
  sys.A_Lstar = lstar_matrix(geo, clamped_ops(geo));
  sys.A_L = l_matrix(geo);
  sys.A_B = 2.0 * hdot_matrix(geo);
  sys.M = geo.dmu;
  sys.M_sigma = geo.dsigma;
  sys.W = tensor_weight_matrix(geo, sys.M);
  sys.W_rho = tensor_weight_matrix(geo, sys.M.cwiseProduct(ws.rho));

  for (int nd : grid.sigma_nodes) {
    const Eigen::Matrix3d& gh = geo.curv.ghat_inv[nd];
    sys.C0 = std::max(sys.C0, (gh * geo.curv.h[nd] * gh).cwiseProduct(geo.curv.h[nd]).sum());
  }

  std::vector<std::uint8_t> is_b(N, 0);
  for (int s : grid.sigma_nodes)
    if (!ws.pinned[s]) {
      sys.b_nodes.push_back(s);
      is_b[s] = 1;
    }
  sys.z_of.assign(N, -1);
  sys.b_of.assign(N, -1);
  for (int i = 0; i < sys.nb(); ++i) sys.b_of[sys.b_nodes[i]] = i;
  for (int nd = 0; nd < N; ++nd)
    if (!ws.pinned[nd] && !is_b[nd]) {
      sys.z_of[nd] = static_cast<int>(sys.z_nodes.size());
      sys.z_nodes.push_back(nd);
    }
  sys.Pz = selection(N, sys.z_nodes);
  sys.Pb = selection(N, sys.b_nodes);

  SpMat AtW = SpMat(sys.A_Lstar.transpose()) * sys.W_rho;
  sys.K = AtW * sys.A_Lstar;
  sys.Kzz = SpMat(sys.Pz.transpose()) * sys.K * sys.Pz;
  Vec Minv = sys.M.cwiseInverse();
  sys.A4 = Minv.asDiagonal() * sys.K;

  sys.use_cg = params.force_cg;
  if (!sys.use_cg) {
    sys.factor = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(sys.Kzz);
    if (sys.factor->info() != Eigen::Success) {
      sys.use_cg = true;  // memory or pivot trouble: iterative fallback
    } else {
      const Vec D = sys.factor->vectorD();
      if (D.size() > 0 && !(D.minCoeff() > 0))
        throw AssemblyError(
            "normal matrix is singular after boundary elimination; the constraint u = u_nu = 0 on Sigma "
            "should exclude nontrivial solutions of L*u = 0");
    }
  }
  return sys;
}

SymTensorField rho_Lstar(const LinearizedSystem& sys, const Vec& u) {
  const int N = sys.num_nodes();
  SymTensorField a = SymTensorField::zeros(sys.geo.dim(), N);
  a.flat() = sys.A_Lstar * u;
  for (int p = 0; p < a.comp.cols(); ++p) a.comp.col(p) = a.comp.col(p).cwiseProduct(sys.ws.rho);
  a.support = support_mask(sys.geo.grid);
  return a;
}

Vec solve_dirichlet_zero_dual(const LinearizedSystem& sys, const Vec& rhs_z, SolveReport* report) {
  auto t0 = Clock::now();
  Vec z = solve_zz(sys, rhs_z, report);
  if (report) {
    double nr = rhs_z.norm();
    report->interior_residual = nr > 0 ? (sys.Kzz * z - rhs_z).norm() / nr : 0.0;
    report->wall_seconds = seconds_since(t0);
  }
  return sys.Pz * z;
}

Vec solve_dirichlet_zero(const LinearizedSystem& sys, const Vec& f, SolveReport* report) {
  Vec rhs = sys.Pz.transpose() * sys.M.cwiseProduct(f);
  return solve_dirichlet_zero_dual(sys, rhs, report);
}

void build_boundary_operators(LinearizedSystem& sys) {
  if (sys.boundary_built) return;
  const int nb = sys.nb();
  const Geometry& geo = sys.geo;
  const int N = sys.num_nodes();

  Mat KPb = Mat(sys.K * sys.Pb);
  Mat X = solve_zz(sys, Mat(-(sys.Pz.transpose() * KPb)));
  sys.E = Mat(sys.Pz * X) + Mat(sys.Pb);
  Mat KE = sys.K * sys.E;
  sys.G_D = sys.E.transpose() * KE;
  Vec srho(nb);
  for (int i = 0; i < nb; ++i) srho[i] = sys.M_sigma[sys.b_nodes[i]] * sys.ws.rho[sys.b_nodes[i]];
  sys.K1 = sys.C0 * Mat(srho.asDiagonal());
  sys.G_D += sys.K1;

  // K2 û = M_Σ ⟨ρ L* E û, h⟩_ĝ
  Mat AE = sys.A_Lstar * sys.E;
  sys.K2 = Mat::Zero(nb, nb);
  for (int i = 0; i < nb; ++i) {
    const int s = sys.b_nodes[i];
    SymTensorField hs = SymTensorField::zeros(geo.dim(), 1);
    hs.set(0, geo.curv.h[s]);
    Vec gh = geo.ghat_block[s] * hs.comp.row(0).transpose();
    for (int p = 0; p < geo.ncomp(); ++p)
      if (gh[p] != 0) sys.K2.row(i) += sys.M_sigma[s] * sys.ws.rho[s] * gh[p] * AE.row(p * N + s);
  }
  sys.Bhat = sys.G_D - sys.K2 - sys.K1;

  Eigen::LLT<Mat> llt(sys.G_D);
  if (llt.info() != Eigen::Success) throw NumericError("D-Gram matrix is not positive definite");
  sys.L_D = llt.matrixL();
  Mat T = sys.L_D.triangularView<Eigen::Lower>().solve(sys.Bhat);
  T = sys.L_D.triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
  Eigen::JacobiSVD<Mat> svd(T, Eigen::ComputeFullU | Eigen::ComputeFullV);
  sys.U = svd.matrixU();
  sys.V = svd.matrixV();
  sys.sv = svd.singularValues();
  sys.rank = 0;
  const double smax = nb > 0 ? sys.sv[0] : 0.0;
  for (int i = 0; i < nb; ++i)
    if (sys.sv[i] > sys.params.svd_tol * smax) ++sys.rank;
  sys.boundary_built = true;
}

Vec to_boundary(const LinearizedSystem& sys, const Vec& full) {
  Vec v(sys.nb());
  for (int i = 0; i < sys.nb(); ++i) v[i] = full[sys.b_nodes[i]];
  return v;
}

Vec from_boundary(const LinearizedSystem& sys, const Vec& local) {
  Vec v = Vec::Zero(sys.num_nodes());
  for (int i = 0; i < sys.nb(); ++i) v[sys.b_nodes[i]] = local[i];
  return v;
}

Vec solve_dirichlet_boundary(LinearizedSystem& sys, const Vec& uhat) {
  build_boundary_operators(sys);
  return sys.E * to_boundary(sys, uhat);
}

Vec apply_P(LinearizedSystem& sys, const Vec& uhat) {
  build_boundary_operators(sys);
  return from_boundary(sys, sys.G_D * to_boundary(sys, uhat));
}

Vec apply_Bhat(LinearizedSystem& sys, const Vec& uhat) {
  build_boundary_operators(sys);
  return from_boundary(sys, sys.Bhat * to_boundary(sys, uhat));
}

Vec weak_B(const LinearizedSystem& sys, const SymTensorField& a) {
  Vec v = sys.Pb.transpose() * (sys.A_Lstar.transpose() * (sys.W * a.flat()));
  Vec out = Vec::Zero(sys.num_nodes());
  for (int i = 0; i < sys.nb(); ++i) {
    const int s = sys.b_nodes[i];
    out[s] = v[i] / sys.M_sigma[s] - inner_h(sys.geo, s, a);
  }
  return out;
}

Vec strong_B(const LinearizedSystem& sys, const SymTensorField& a) {
  Vec v = sys.A_B * a.flat();
  Vec out = Vec::Zero(sys.num_nodes());
  for (int s : sys.b_nodes) out[s] = v[s];
  return out;
}

Vec interior_residual(const LinearizedSystem& sys, const SymTensorField& a, const Vec& f) {
  return sys.Pz.transpose() * (sys.A_Lstar.transpose() * (sys.W * a.flat()) - sys.M.cwiseProduct(f));
}

const std::vector<SymTensorField>& complement_basis(LinearizedSystem& sys, int max_candidates, double svd_tol) {
  build_boundary_operators(sys);
  const int nb = sys.nb();
  const double smax = nb > 0 ? sys.sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < nb; ++i)
    if (sys.sv[i] > svd_tol * smax) ++rank;
  sys.rank = rank;
  const int p = nb - rank;
  sys.complement.clear();
  sys.complement_images.resize(nb, 0);
  sys.complement_built = true;
  if (p == 0) return sys.complement;

  const DomainGrid& grid = sys.geo.grid;
  const int n = grid.dim;
  const int k = grid.sigma.axis;
  const double face = grid.sigma.side == 0 ? 0.0 : grid.extents[k];
  Mat null_left = sys.U.rightCols(p);
  Mat accepted(p, 0);
  std::mt19937 rng(sys.params.seed);
  std::uniform_real_distribution<double> unif(0.2, 0.8);
  std::normal_distribution<double> gauss;
  for (int cand = 0; cand < max_candidates && static_cast<int>(sys.complement.size()) < p; ++cand) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (int a = 0; a < n; ++a) c[a] = a == k ? face : unif(rng) * grid.extents[a];
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) m(i, j) = m(j, i) = gauss(rng);
    const double radius = 0.12 * grid.extents[k == 0 ? 1 : 0];
    SymTensorField a = tensor_from_function(grid, [&](const Eigen::Vector3d& x) -> Eigen::Matrix3d {
      return smooth_bump(x, c, radius, n) * m;
    });
    // Remove the interior part: a' = a − ρL*u with u the zero-boundary solve of L(a).
    Vec u = solve_dirichlet_zero_dual(sys, sys.Pz.transpose() * (sys.A_Lstar.transpose() * (sys.W * a.flat())));
    SymTensorField corr = a - rho_Lstar(sys, u);
    corr.support = support_mask(grid);
    Vec img = to_boundary(sys, sys.M_sigma.cwiseProduct(weak_B(sys, corr)));
    Vec y = sys.L_D.triangularView<Eigen::Lower>().solve(img);
    Vec proj = null_left.transpose() * y;
    Vec r = proj;
    for (int j = 0; j < accepted.cols(); ++j) r -= accepted.col(j).dot(r) * accepted.col(j);
    if (r.norm() < 1e-3 * std::max(y.norm(), 1e-300)) continue;
    accepted.conservativeResize(p, accepted.cols() + 1);
    accepted.col(accepted.cols() - 1) = r.normalized();
    sys.complement.push_back(corr);
    sys.complement_images.conservativeResize(nb, sys.complement_images.cols() + 1);
    sys.complement_images.col(sys.complement_images.cols() - 1) = y;
  }
  if (static_cast<int>(sys.complement.size()) < p) {
    std::string msg = "complement basis incomplete: captured " + std::to_string(sys.complement.size()) + " of " +
                      std::to_string(p) + " defect directions after " + std::to_string(max_candidates) +
                      " candidates; rerun with more candidates";
    throw DefectCompletionError(msg);
  }
  return sys.complement;
}

SymTensorField solve_linearized(LinearizedSystem& sys, const Vec& f, const Vec& psi, SolveReport* report) {
  auto t0 = Clock::now();
  build_boundary_operators(sys);
  if (!sys.complement_built) complement_basis(sys, sys.params.max_candidates, sys.params.svd_tol);
  const int nb = sys.nb();
  const int N = sys.num_nodes();

  SolveReport rep;
  Vec u0 = solve_dirichlet_zero(sys, f, &rep);
  SymTensorField a = rho_Lstar(sys, u0);

  const int r = sys.rank;
  const int p = static_cast<int>(sys.complement.size());
  Vec rhs = to_boundary(sys, sys.M_sigma.cwiseProduct(psi - weak_B(sys, a)));
  Vec y = sys.L_D.triangularView<Eigen::Lower>().solve(rhs);
  Mat C(nb, r + p);
  C.leftCols(r) = sys.U.leftCols(r) * sys.sv.head(r).asDiagonal();
  if (p > 0) C.rightCols(p) = sys.complement_images;
  Vec coef = C.completeOrthogonalDecomposition().solve(y);
  Vec yd = sys.V.leftCols(r) * coef.head(r);
  Vec uhat1 = sys.L_D.transpose().triangularView<Eigen::Upper>().solve(yd);
  a += rho_Lstar(sys, sys.E * uhat1);
  for (int i = 0; i < p; ++i) a += coef[r + i] * sys.complement[i];
  a.support = support_mask(sys.geo.grid);

  // Residuals in the dual norms.
  Vec rz = interior_residual(sys, a, f);
  Vec fz = sys.Pz.transpose() * sys.M.cwiseProduct(f);
  Vec az = sys.Pz.transpose() * (sys.A_Lstar.transpose() * (sys.W * a.flat()));
  const double tiny = std::numeric_limits<double>::min();
  rep.interior_residual = dual_norm_zz(sys, rz) / std::max({dual_norm_zz(sys, fz), dual_norm_zz(sys, az), tiny});
  Vec Ba = weak_B(sys, a);
  auto dstar = [&](const Vec& full) {
    return sys.L_D.triangularView<Eigen::Lower>().solve(to_boundary(sys, sys.M_sigma.cwiseProduct(full))).norm();
  };
  rep.boundary_residual = dstar(Ba - psi) / std::max({dstar(psi), dstar(Ba), tiny});

  Vec rfull = Vec::Zero(N);
  for (int i = 0; i < sys.nz(); ++i) rfull[sys.z_nodes[i]] = rz[i] / sys.M[sys.z_nodes[i]];
  const double fsup = std::max((sys.Pz * fz).cwiseQuotient(sys.M).cwiseAbs().maxCoeff(),
                               (sys.Pz * az).cwiseQuotient(sys.M).cwiseAbs().maxCoeff());
  rep.interior_residual_sup = fsup > 0 ? rfull.cwiseAbs().maxCoeff() / fsup : 0.0;
  const double bsup = std::max(to_boundary(sys, psi).cwiseAbs().maxCoeff(), to_boundary(sys, Ba).cwiseAbs().maxCoeff());
  rep.boundary_residual_sup = bsup > 0 ? to_boundary(sys, Ba - psi).cwiseAbs().maxCoeff() / bsup : 0.0;

  rep.sigma_max = nb > 0 ? sys.sv[0] : 0.0;
  rep.sigma_min = nb > 0 ? sys.sv[nb - 1] : 0.0;
  rep.defect_dim = nb - r;
  const double data = dual_norm_zz(sys, fz) + dstar(psi);
  rep.stability_constant = data > 0 ? tensor_norm_L2_rho_inv(sys, a) / data : 0.0;
  rep.flagged = rep.interior_residual > 1e-8 || rep.boundary_residual > 1e-8;
  rep.wall_seconds = seconds_since(t0);
  if (report) *report = rep;
  if (rep.boundary_residual > 1e-6)
    throw DefectCompletionError("boundary equation residual " + std::to_string(rep.boundary_residual) +
                                " above tolerance; rerun complement_basis with more candidates");
  return a;
}

SymTensorField solve_linearized_collocated(LinearizedSystem& sys, const Vec& f, const Vec& psi,
                                           SolveReport* report) {
  auto t0 = Clock::now();
  const int N = sys.num_nodes();
  const int nz = sys.nz();
  if (!sys.collocated_built) {
    std::vector<int> nodes = sys.z_nodes;
    nodes.insert(nodes.end(), sys.b_nodes.begin(), sys.b_nodes.end());
    Vec rho_rep = sys.ws.rho.replicate(sys.geo.ncomp(), 1);
    SpMat A = rho_rep.asDiagonal() * sys.A_Lstar * selection(N, nodes);
    CurvatureJacobian J = curvature_jacobian(sys.geo);
    SpMat rows = SpMat(sys.Pz.transpose()) * J.R * A;
    SpMat brows = 2.0 * SpMat(sys.Pb.transpose()) * J.H * A;
    std::vector<Triplet> t;
    for (int k = 0; k < rows.outerSize(); ++k)
      for (SpMat::InnerIterator it(rows, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < brows.outerSize(); ++k)
      for (SpMat::InnerIterator it(brows, k); it; ++it) t.emplace_back(nz + it.row(), it.col(), it.value());
    sys.collocated.resize(nz + sys.nb(), nz + sys.nb());
    sys.collocated.setFromTriplets(t.begin(), t.end());
    sys.collocated.makeCompressed();
    sys.collocated_factor = std::make_shared<Eigen::SparseLU<SpMat>>();
    sys.collocated_factor->compute(sys.collocated);
    if (sys.collocated_factor->info() != Eigen::Success)
      throw NumericError("collocated system is singular: " + sys.collocated_factor->lastErrorMessage());
    sys.collocated_built = true;
  }
  Vec rhs(nz + sys.nb());
  rhs.head(nz) = sys.Pz.transpose() * f;
  rhs.tail(sys.nb()) = sys.Pb.transpose() * psi;
  Vec x = sys.collocated_factor->solve(rhs);
  x += sys.collocated_factor->solve(rhs - sys.collocated * x);
  Vec u = sys.Pz * x.head(nz) + sys.Pb * x.tail(sys.nb());
  SymTensorField a = rho_Lstar(sys, u);

  if (report) {
    Vec r = sys.collocated * x - rhs;
    const double fs = rhs.head(nz).cwiseAbs().maxCoeff(), ps = rhs.tail(sys.nb()).cwiseAbs().maxCoeff();
    report->method = "collocated_lu";
    report->interior_residual = fs > 0 ? r.head(nz).cwiseAbs().maxCoeff() / fs : 0.0;
    report->boundary_residual = ps > 0 ? r.tail(sys.nb()).cwiseAbs().maxCoeff() / ps : 0.0;
    report->interior_residual_sup = report->interior_residual;
    report->boundary_residual_sup = report->boundary_residual;
    report->wall_seconds = seconds_since(t0);
  }
  return a;
}

double D_norm(LinearizedSystem& sys, const Vec& uhat) {
  if (sys.Kzz.rows() == 0 && sys.nz() == 0) throw OrderingError("D_norm requested before system assembly");
  build_boundary_operators(sys);
  Vec b = to_boundary(sys, uhat);
  return std::sqrt(std::max(0.0, b.dot(sys.G_D * b)));
}

double D_norm_direct(LinearizedSystem& sys, const Vec& uhat) {
  if (sys.Kzz.rows() == 0 && sys.nz() == 0) throw OrderingError("D_norm requested before system assembly");
  build_boundary_operators(sys);
  Vec u = solve_dirichlet_boundary(sys, uhat);
  SymTensorField l = SymTensorField::zeros(sys.geo.dim(), sys.num_nodes());
  l.flat() = sys.A_Lstar * u;
  double s = 0;
  for (int nd = 0; nd < sys.num_nodes(); ++nd) s += sys.M[nd] * sys.ws.rho[nd] * tensor_inner(sys.geo, nd, l, l);
  for (int b : sys.b_nodes) s += sys.C0 * sys.M_sigma[b] * sys.ws.rho[b] * uhat[b] * uhat[b];
  return std::sqrt(s);
}

double Dstar_norm(LinearizedSystem& sys, const Vec& functional) {
  if (sys.Kzz.rows() == 0 && sys.nz() == 0) throw OrderingError("Dstar_norm requested before system assembly");
  build_boundary_operators(sys);
  return sys.L_D.triangularView<Eigen::Lower>().solve(to_boundary(sys, functional)).norm();
}

double tensor_norm_L2_rho_inv(const LinearizedSystem& sys, const SymTensorField& a) {
  double s = 0;
  for (int nd = 0; nd < sys.num_nodes(); ++nd)
    if (sys.ws.rho[nd] > 0) s += sys.M[nd] * tensor_inner(sys.geo, nd, a, a) / sys.ws.rho[nd];
  return std::sqrt(s);
}

double tensor_weighted_sup(const LinearizedSystem& sys, const SymTensorField& a, double r, double s) {
  double best = 0;
  for (int p = 0; p < a.comp.cols(); ++p) best = std::max(best, weighted_sup(sys.ws, a.comp.col(p), r, s));
  return best;
}

double interior_data_norm(const LinearizedSystem& sys, const Vec& f) {
  return dual_norm_zz(sys, sys.Pz.transpose() * sys.M.cwiseProduct(f));
}

SpMat h2_rho_gram(const WeightSystem& ws) {
  const int n = ws.grid.dim;
  Vec w = ws.grid.volume_weight.cwiseProduct(ws.rho);
  SpMat D = SpMat(w.asDiagonal());
  SpMat G = D;
  for (int a = 0; a < n; ++a) G += SpMat(ws.ops.d1[a].transpose()) * D * ws.ops.d1[a];
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) G += SpMat(ws.ops.d2[a][b].transpose()) * D * ws.ops.d2[a][b];
  return G;
}

SpMat phi_boundary_gram(const LinearizedSystem& sys) {
  SpMat Bd = phi_boundary_matrix(sys.geo);
  SpMat Wb = boundary_tensor_weight_matrix(sys.geo, sys.M_sigma.cwiseProduct(sys.ws.rho));
  return SpMat(Bd.transpose()) * Wb * Bd;
}

PoincareConstants poincare_constants(const LinearizedSystem& sys, int kernel_dim) {
  PoincareConstants pc;
  pc.kernel_dim = kernel_dim;
  SpMat G = h2_rho_gram(sys.ws);
  SpMat Gzz = SpMat(sys.Pz.transpose()) * G * sys.Pz;
  EigenPairs e = smallest_eigenpairs(sys.Kzz, Gzz, 1, 0.0, sys.params.seed);
  pc.C_Lstar = 1.0 / std::sqrt(std::max(e.values[0], std::numeric_limits<double>::min()));
  if (kernel_dim > 0) {
    pc.C_Phi = std::numeric_limits<double>::infinity();
    return pc;
  }
  std::vector<int> free_nodes;
  for (int nd = 0; nd < sys.num_nodes(); ++nd)
    if (!sys.ws.pinned[nd]) free_nodes.push_back(nd);
  SpMat S = selection(sys.num_nodes(), free_nodes);
  SpMat A = SpMat(S.transpose()) * (sys.K + phi_boundary_gram(sys)) * S;
  SpMat B = SpMat(S.transpose()) * G * S;
  const double shift = 1e-10 * A.diagonal().mean() / B.diagonal().mean();
  EigenPairs f = smallest_eigenpairs(A, B, 1, shift, sys.params.seed);
  pc.C_Phi = 1.0 / std::sqrt(std::max(f.values[0], std::numeric_limits<double>::min()));
  return pc;
}

}  // namespace deform
