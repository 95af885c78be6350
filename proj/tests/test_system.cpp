#include "deform/fields.hpp"
#include "deform/system.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace deform;

namespace {

struct Fixture {
  DomainGrid grid;
  WeightSystem ws;
  LinearizedSystem sys;
  explicit Fixture(int res, const std::string& kind = "conformal_bump")
      : grid(build_grid(2, {1, 1, 1}, res)), ws(build_weights(grid)) {
    MetricSpec m;
    m.kind = kind;
    sys = assemble(grid, make_metric(grid, m), ws);
  }
};

Vec bump(const DomainGrid& g, Eigen::Vector3d c, double r) {
  return sample(g, [&](const Eigen::Vector3d& x) { return smooth_bump(x, c, r, 2); });
}

}  // namespace

TEST_SUITE("system") {

TEST_CASE("Dirichlet solve recovers a discrete manufactured solution") {
  Fixture F(33);
  auto& sys = F.sys;
  Vec wfull = sample(F.grid, [](const Eigen::Vector3d& x) {
    return x[1] * x[1] * smooth_bump(x, Eigen::Vector3d(0.5, 0.1, 0), 0.3, 2);
  });
  Vec z(sys.nz());
  for (int i = 0; i < sys.nz(); ++i) z[i] = wfull[sys.z_nodes[i]];
  Vec w = sys.Pz * z;
  SolveReport rep;
  Vec u = solve_dirichlet_zero(sys, sys.A4 * w, &rep);
  CHECK((u - w).norm() / w.norm() < 1e-8);
  CHECK(rep.interior_residual < 1e-8);
  // u vanishes on Σ and on pinned nodes
  for (int s : F.grid.sigma_nodes) CHECK(u[s] == 0);
  for (int nd = 0; nd < F.grid.num_nodes(); ++nd)
    if (F.ws.pinned[nd]) CHECK(u[nd] == 0);
  CHECK(solve_dirichlet_zero(sys, Vec::Zero(F.grid.num_nodes())).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("conjugate gradient fallback agrees with the direct factorization") {
  Fixture F(17);
  Vec f = bump(F.grid, {0.5, 0.4, 0}, 0.25);
  Vec u1 = solve_dirichlet_zero(F.sys, f);
  SolverParams p;
  p.force_cg = true;
  p.cg_tol = 1e-12;
  LinearizedSystem cg = assemble(F.grid, F.sys.geo.g, F.ws, p);
  SolveReport rep;
  Vec u2 = solve_dirichlet_zero(cg, f, &rep);
  CHECK(rep.method == "cg");
  CHECK((u1 - u2).norm() <= 1e-6 * u1.norm());
}

TEST_CASE("P is symmetric positive definite and matches the D inner product") {
  Fixture F(25);
  auto& sys = F.sys;
  build_boundary_operators(sys);
  CHECK((sys.G_D - sys.G_D.transpose()).norm() <= 1e-12 * sys.G_D.norm());
  Eigen::SelfAdjointEigenSolver<Mat> es(sys.G_D);
  CHECK(es.eigenvalues()[0] > 0);
  Vec uh = bump(F.grid, {0.5, 0, 0}, 0.3);
  const double p = uh.dot(apply_P(sys, uh));
  CHECK(D_norm(sys, uh) * D_norm(sys, uh) == doctest::Approx(p).epsilon(1e-9));
  CHECK(D_norm_direct(sys, uh) * D_norm_direct(sys, uh) == doctest::Approx(p).epsilon(1e-8));
  // extension keeps the boundary data
  Vec e = solve_dirichlet_boundary(sys, uh);
  for (int s : sys.b_nodes) CHECK(e[s] == doctest::Approx(uh[s]));
}

TEST_CASE("on the flat metric Bhat equals P") {
  Fixture F(17, "flat");
  build_boundary_operators(F.sys);
  CHECK((F.sys.Bhat - F.sys.G_D).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("linearized solve meets both equations") {
  Fixture F(25);
  auto& sys = F.sys;
  build_boundary_operators(sys);
  Vec f = bump(F.grid, {0.4, 0.5, 0}, 0.2);
  Vec psi = sample(F.grid, [](const Eigen::Vector3d& x) {
    return std::cos(3 * x[0]) * smooth_bump(x, Eigen::Vector3d(0.5, 0, 0), 0.35, 2);
  });
  SolveReport rep;
  SymTensorField a = solve_linearized(sys, f, psi, &rep);
  CHECK(rep.interior_residual < 1e-8);
  CHECK(rep.boundary_residual < 1e-8);
  CHECK(std::isfinite(rep.stability_constant));
  // a vanishes outside the support mask
  auto mask = support_mask(F.grid);
  for (int nd = 0; nd < F.grid.num_nodes(); ++nd)
    if (!mask[nd]) CHECK(a.comp.row(nd).cwiseAbs().maxCoeff() == 0);
  // linearity
  SymTensorField a2 = solve_linearized(sys, 2.0 * f, 2.0 * psi);
  CHECK((a2.comp - 2.0 * a.comp).cwiseAbs().maxCoeff() <= 1e-8 * a.comp.cwiseAbs().maxCoeff());
}

TEST_CASE("collocated solve inverts the exact discrete Jacobian") {
  Fixture F(17);
  auto& sys = F.sys;
  Vec f = bump(F.grid, {0.5, 0.4, 0}, 0.25);
  Vec psi = bump(F.grid, {0.5, 0, 0}, 0.3);
  SolveReport rep;
  SymTensorField a = solve_linearized_collocated(sys, f, psi, &rep);
  CHECK(rep.method == "collocated_lu");
  CurvatureJacobian J = curvature_jacobian(sys.geo);
  Vec dR = J.R * a.flat(), dH = J.H * a.flat();
  for (int nd : sys.z_nodes) CHECK(dR[nd] == doctest::Approx(f[nd]).epsilon(1e-8).scale(1));
  for (int nd : sys.b_nodes) CHECK(2 * dH[nd] == doctest::Approx(psi[nd]).epsilon(1e-8).scale(1));
}

TEST_CASE("Poincare constants") {
  Fixture F(17);
  PoincareConstants pc = poincare_constants(F.sys, 0);
  CHECK(pc.C_Lstar > 0);
  CHECK(std::isfinite(pc.C_Lstar));
  CHECK(std::isfinite(pc.C_Phi));
  CHECK(std::isinf(poincare_constants(F.sys, 2).C_Phi));
}

}  // TEST_SUITE
