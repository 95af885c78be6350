#include "deform/curvature.hpp"
#include "deform/fields.hpp"

#include <doctest.h>

#include <cmath>

using namespace deform;

namespace {

double max_on(const Vec& v, const std::vector<int>& nodes) {
  double m = 0;
  for (int nd : nodes) m = std::max(m, std::abs(v[nd]));
  return m;
}

std::vector<int> interior_nodes(const DomainGrid& g) {
  std::vector<int> out;
  for (int nd = 0; nd < g.num_nodes(); ++nd)
    if (g.role[nd] == NodeRole::Interior) out.push_back(nd);
  return out;
}

}  // namespace

TEST_SUITE("curvature") {

TEST_CASE("flat metric has no curvature") {
  for (int dim : {2, 3}) {
    DomainGrid g = build_grid(dim, {1, 1, 1}, 9);
    CurvatureData c = curvature(g, flat_metric(g));
    CHECK(c.scalar.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(max_on(c.H, g.sigma_nodes) < 1e-12);
  }
}

TEST_CASE("conformal scalar curvature matches -2 e^{-2w} Δw in 2D") {
  // w = a|x - c|², Δw = 4a
  const double a = 0.3;
  double err[2];
  int k = 0;
  for (int res : {17, 33}) {
    DomainGrid g = build_grid(2, {1, 1, 1}, res);
    Vec w = sample(g, [&](const Eigen::Vector3d& x) { return a * ((x[0] - 0.4) * (x[0] - 0.4) + x[1] * x[1]); });
    CurvatureData c = curvature(g, conformal_metric(g, w));
    double e = 0;
    for (int nd : interior_nodes(g)) e = std::max(e, std::abs(c.scalar[nd] + 8 * a * std::exp(-2 * w[nd])));
    err[k++] = e;
  }
  CHECK(err[1] < 1e-2);
  CHECK(std::log2(err[0] / err[1]) > 1.8);
}

TEST_CASE("round sphere patch has R = 2") {
  MetricSpec s;
  s.kind = "round_sphere";
  s.center = {0.5, 0.0, 0.0};
  DomainGrid g = build_grid(2, {1, 1, 1}, 33);
  CurvatureData c = curvature(g, make_metric(g, s));
  for (int nd : interior_nodes(g)) CHECK(c.scalar[nd] == doctest::Approx(2).epsilon(5e-3));
}

TEST_CASE("mean curvature of Σ for g = e^{2cy} δ is -c") {
  // unit tangent e = ∂x, outward unit normal ν = -∂y at y = 0, D_e e = -c ∂y, h = -<ν, D_e e> = -c
  const double cc = 0.7;
  double err[2];
  int k = 0;
  for (int res : {17, 33}) {
    DomainGrid g = build_grid(2, {1, 1, 1}, res);
    Vec w = sample(g, [&](const Eigen::Vector3d& x) { return cc * x[1]; });
    CurvatureData c = curvature(g, conformal_metric(g, w));
    double e = 0;
    for (int nd : g.sigma_nodes) e = std::max(e, std::abs(c.H[nd] + cc));
    err[k++] = e;
  }
  CHECK(err[1] < 1e-3);
  CHECK(err[0] / err[1] > 3.0);
}

TEST_CASE("mean curvature in 3D sums the principal curvatures") {
  // g = e^{2cz} δ: both tangential directions bend like the 2D case, H = -2c
  const double cc = 0.4;
  DomainGrid g = build_grid(3, {1, 1, 1}, 17);
  Vec w = sample(g, [&](const Eigen::Vector3d& x) { return cc * x[2]; });
  CurvatureData c = curvature(g, conformal_metric(g, w));
  for (int nd : g.sigma_nodes) CHECK(c.H[nd] == doctest::Approx(-2 * cc).epsilon(2e-3));
}

TEST_CASE("scaling identities") {
  // R(λg) = R(g)/λ and H(λg) = H(g)/sqrt(λ), exactly for the discrete formulas
  DomainGrid g = build_grid(2, {1, 1, 1}, 17);
  MetricField g0 = make_metric(g, MetricSpec{});
  CurvatureData c0 = curvature(g, g0), c1 = curvature(g, 2.25 * g0);
  for (int nd = 0; nd < g.num_nodes(); ++nd) CHECK(c1.scalar[nd] == doctest::Approx(c0.scalar[nd] / 2.25).epsilon(1e-12));
  for (int nd : g.sigma_nodes) CHECK(c1.H[nd] == doctest::Approx(c0.H[nd] / 1.5).epsilon(1e-12));
}

TEST_CASE("degenerate metric is rejected") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 9);
  SymTensorField z = SymTensorField::zeros(2, g.num_nodes());
  CHECK_THROWS_AS(curvature(g, z), DegenerateMetric);
}

TEST_CASE("Taylor table flags steps that break positivity") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 17);
  MetricField g0 = flat_metric(g);
  SymTensorField a = -2.0 * SymTensorField(g0);  // g0 + t a = (1 - 2t) δ
  TaylorTable t = taylor_check(g, g0, a, {0.1, 0.75});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].admissible);
  CHECK_FALSE(t.rows[1].admissible);
  CHECK(t.largest_admissible_t == doctest::Approx(0.5).epsilon(1e-9));
  // R and H of a constant multiple of δ vanish: the remainder is zero
  CHECK(t.rows[0].remainder_R < 1e-12);
  CHECK(t.rows[0].remainder_H < 1e-12);
}

}  // TEST_SUITE
