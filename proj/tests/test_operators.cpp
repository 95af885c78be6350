#include "deform/fields.hpp"
#include "deform/operators.hpp"

#include <doctest.h>

#include <cmath>

using namespace deform;

namespace {

SymTensorField bump_tensor(const DomainGrid& g, Eigen::Vector3d c, double r) {
  return tensor_from_function(g, [&](const Eigen::Vector3d& x) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    m(0, 0) = 1 + x[0];
    m(0, 1) = m(1, 0) = x[1];
    m(1, 1) = 2 - x[0] * x[1];
    return Eigen::Matrix3d(smooth_bump(x, c, r, 2) * m);
  });
}

Vec bump_scalar(const DomainGrid& g, Eigen::Vector3d c, double r) {
  return sample(g, [&](const Eigen::Vector3d& x) { return smooth_bump(x, c, r, 2) * (1 + x[0]); });
}

}  // namespace

TEST_SUITE("operators") {

TEST_CASE("linearization along g0 reproduces the scaling derivative") {
  // d/dt R((1+t) g) = -R, d/dt H((1+t) g) = -H/2
  DomainGrid g = build_grid(2, {1, 1, 1}, 17);
  Geometry geo = make_geometry(g, make_metric(g, MetricSpec{}));
  Vec Lg = apply_L(geo, geo.g), Hg = apply_Hdot(geo, geo.g);
  for (int nd = 0; nd < g.num_nodes(); ++nd) CHECK(Lg[nd] == doctest::Approx(-geo.curv.scalar[nd]).epsilon(1e-9));
  for (int nd : g.sigma_nodes) CHECK(Hg[nd] == doctest::Approx(-0.5 * geo.curv.H[nd]).epsilon(1e-12));
}

TEST_CASE("matrix forms agree with the operators") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 17);
  Geometry geo = make_geometry(g, make_metric(g, MetricSpec{}));
  SymTensorField a = bump_tensor(g, {0.5, 0.2, 0}, 0.4);
  Vec u = bump_scalar(g, {0.5, 0.5, 0}, 0.3);
  Vec L1 = apply_L(geo, a), L2 = l_matrix(geo) * a.flat();
  Vec H1 = apply_Hdot(geo, a), H2 = hdot_matrix(geo) * a.flat();
  SymTensorField S1 = apply_Lstar(geo, u);
  Vec S2 = lstar_matrix(geo) * u;
  for (int nd = 0; nd < g.num_nodes(); ++nd) CHECK(L1[nd] == doctest::Approx(L2[nd]).epsilon(1e-9));
  for (int nd : g.sigma_nodes) CHECK(H1[nd] == doctest::Approx(H2[nd]).epsilon(1e-9));
  CHECK((S1.flat() - S2).cwiseAbs().maxCoeff() < 1e-9 * (1 + S2.cwiseAbs().maxCoeff()));
}

TEST_CASE("L and L* are adjoint for interior supports") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 33);
  Geometry geo = make_geometry(g, make_metric(g, MetricSpec{}));
  SymTensorField a = bump_tensor(g, {0.5, 0.5, 0}, 0.35);
  Vec u = bump_scalar(g, {0.55, 0.5, 0}, 0.3);
  GreensTerms t = greens_terms(geo, a, u);
  CHECK(t.residual() < 1e-12 * std::max(1.0, std::abs(t.lhs)));
}

TEST_CASE("Green's formula residual with boundary terms converges") {
  double r[2];
  int k = 0;
  for (int res : {17, 33}) {
    DomainGrid g = build_grid(2, {1, 1, 1}, res);
    Geometry geo = make_geometry(g, flat_metric(g));
    r[k++] = greens_residual(geo, bump_tensor(g, {0.5, 0, 0}, 0.45), bump_scalar(g, {0.45, 0, 0}, 0.45));
  }
  CHECK(std::log2(r[0] / r[1]) > 1.8);
}

TEST_CASE("exact Jacobian matches central differences of the discrete curvature") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 13);
  MetricField g0 = make_metric(g, MetricSpec{});
  Geometry geo = make_geometry(g, g0);
  CurvatureJacobian J = curvature_jacobian(geo);
  SymTensorField a = bump_tensor(g, {0.4, 0.1, 0}, 0.5);
  const double t = 1e-5;
  CurvatureData cp = curvature(g, geo.ops, g0 + t * a), cm = curvature(g, geo.ops, g0 - t * a);
  Vec dR = J.R * a.flat(), dH = J.H * a.flat();
  for (int nd = 0; nd < g.num_nodes(); ++nd)
    CHECK(dR[nd] == doctest::Approx((cp.scalar[nd] - cm.scalar[nd]) / (2 * t)).epsilon(1e-6).scale(1));
  for (int nd : g.sigma_nodes)
    CHECK(dH[nd] == doctest::Approx((cp.H[nd] - cm.H[nd]) / (2 * t)).epsilon(1e-6).scale(1));
}

TEST_CASE("static potentials of the flat half-space") {
  // u = 1 and u = x solve L*u = 0 with u_ν ĝ = u h on Σ (h = 0)
  DomainGrid g = build_grid(2, {1, 1, 1}, 17);
  Geometry geo = make_geometry(g, flat_metric(g));
  for (int k = 0; k < 2; ++k) {
    Vec u = sample(g, [&](const Eigen::Vector3d& x) { return k == 0 ? 1.0 : x[0]; });
    PhiStarValue v = apply_Phi_star(geo, u);
    CHECK(v.interior.comp.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(v.boundary.comp.cwiseAbs().maxCoeff() < 1e-10);
  }
  // u = y is not one: its normal derivative is nonzero on Σ
  Vec y = sample(g, [](const Eigen::Vector3d& x) { return x[1]; });
  CHECK(apply_Phi_star(geo, y).boundary.comp.cwiseAbs().maxCoeff() > 0.5);
}

TEST_CASE("tensor inner product") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 9);
  Geometry geo = make_geometry(g, make_metric(g, MetricSpec{}));
  SymTensorField a = bump_tensor(g, {0.5, 0.5, 0}, 0.6), b = bump_tensor(g, {0.3, 0.5, 0}, 0.6);
  for (int nd = 0; nd < g.num_nodes(); ++nd) {
    CHECK(tensor_inner(geo, nd, a, b) == doctest::Approx(tensor_inner(geo, nd, b, a)));
    CHECK(tensor_inner(geo, nd, a, a) >= 0);
    // <a, g>_g = tr_g a
    const double tr = (geo.curv.ginv[nd] * a.at(nd)).trace();
    CHECK(tensor_inner(geo, nd, a, geo.g) == doctest::Approx(tr).epsilon(1e-12));
  }
}

}  // TEST_SUITE
