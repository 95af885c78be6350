#include "deform/fields.hpp"
#include "deform/weights.hpp"

#include <doctest.h>

#include <cmath>

using namespace deform;

TEST_SUITE("weights") {

TEST_CASE("profile functions") {
  CHECK(smoothstep5(0) == 0);
  CHECK(smoothstep5(1) == 1);
  CHECK(smoothstep5(-1) == 0);
  CHECK(smoothstep5(2) == 1);
  CHECK(smoothstep5(0.5) == doctest::Approx(0.5));
  CHECK(eta(0.4) == 0);
  CHECK(eta(1.2) == 1);
  const double r0 = 0.3, r1 = 0.15;
  CHECK(rho_tilde(0.1, r0, r1) == doctest::Approx(0.1));
  CHECK(rho_tilde(0.5, r0, r1) == doctest::Approx(1));
  // monotone and C² across the blend
  double prev = 0;
  for (double t = 0.01; t < 0.5; t += 0.001) {
    const double v = rho_tilde(t, r0, r1);
    if (t < r0) CHECK(v > prev);
    else CHECK(v == 1);
    prev = v;
    const double e = 1e-6;
    CHECK(rho_tilde_d1(t, r0, r1) ==
          doctest::Approx((rho_tilde(t + e, r0, r1) - rho_tilde(t - e, r0, r1)) / (2 * e)).epsilon(1e-6).scale(1));
    CHECK(rho_tilde_d2(t, r0, r1) ==
          doctest::Approx((rho_tilde_d1(t + e, r0, r1) - rho_tilde_d1(t - e, r0, r1)) / (2 * e)).epsilon(1e-3).scale(10));
  }
}

TEST_CASE("corner blend has the smooth-boundary diagonal limit") {
  // over Σ (σ < 0) the blend is the distance to Γ, so on the diagonal θ = √2 s
  for (double s : {1e-2, 1e-3, 1e-4}) CHECK(corner_blend_distance(-s, s, 0.1) / (std::sqrt(2.0) * s) == doctest::Approx(1));
  // beyond Γ it is the normal distance
  CHECK(corner_blend_distance(0.5, 0.05, 0.1) == doctest::Approx(0.05));
  CHECK(corner_blend_distance(-0.5, 0.05, 0.1) == doctest::Approx(std::hypot(0.5, 0.05)));
}

TEST_CASE("weights satisfy the node-by-node bounds") {
  for (auto [dim, res] : {std::pair{2, 33}, std::pair{3, 17}}) {
    DomainGrid g = build_grid(dim, {1, 1, 1}, res);
    WeightSystem ws = build_weights(g);
    CHECK(ws.violations.empty());
    CHECK(ws.C1 <= 2.0);
    CHECK(ws.C2 <= 50.0);
    for (int nd = 0; nd < g.num_nodes(); ++nd) {
      if (ws.d[nd] > 0) {
        CHECK(ws.theta[nd] >= (1 - ws.params.eps) * ws.d[nd]);
        CHECK(ws.theta[nd] <= (1 + ws.params.eps) * ws.d[nd]);
      }
      CHECK(ws.rho[nd] >= 0);
      CHECK(ws.rho[nd] <= 1);
      if (ws.theta[nd] < ws.params.r1) CHECK(ws.rho[nd] == doctest::Approx(std::pow(ws.theta[nd], ws.params.N)));
      if (g.role[nd] == NodeRole::SigmaPrime || g.role[nd] == NodeRole::Gamma) CHECK(ws.pinned[nd]);
    }
  }
}

TEST_CASE("analytic gradient of theta matches differences to second order") {
  double err[2];
  int k = 0;
  for (int res : {65, 129}) {
    DomainGrid g = build_grid(2, {1, 1, 1}, res);
    WeightSystem ws = build_weights(g);
    Vec dx = ws.ops.d1[0] * ws.theta;
    double e = 0;
    for (int nd = 0; nd < g.num_nodes(); ++nd)
      if (g.role[nd] == NodeRole::Interior && ws.theta[nd] > 0.1) e = std::max(e, std::abs(dx[nd] - ws.grad_theta(nd, 0)));
    err[k++] = e;
  }
  CHECK(err[0] / err[1] > 3.0);
}

TEST_CASE("invalid parameters are rejected") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 33);
  WeightParams p;
  p.r1 = 0.4;
  CHECK_THROWS_AS(build_weights(g, p), ConfigError);
  p = {};
  p.N = 2;
  CHECK_THROWS_AS(build_weights(g, p), ConfigError);
  p = {};
  p.eps = 0.5;
  CHECK_THROWS_AS(build_weights(g, p), ConfigError);
}

TEST_CASE("violations are reported when the smooth minimum is too soft") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 33);
  WeightParams p;
  p.smooth_min_power = 2;  // (3)^{-1/2} ≈ 0.58 breaks the ±10% band at the corners
  CHECK_THROWS_AS(build_weights(g, p), WeightError);
  WeightSystem ws = build_weights(g, p, true);
  CHECK_FALSE(ws.violations.empty());
}

TEST_CASE("Hardy diagnostic") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 65);
  WeightSystem ws = build_weights(g);
  Vec u = sample(g, [](const Eigen::Vector3d& x) { return smooth_bump(x, Eigen::Vector3d(0.5, 0.6, 0), 0.15, 2); });
  CHECK(hardy_ratio(ws, u) < 1.0);
  auto fam = hardy_corner_family(g);
  REQUIRE(fam.size() >= 4);
  double prev = 0;
  for (const Vec& v : fam) {
    const double q = hardy_ratio(ws, v);
    CHECK(q > prev);
    prev = q;
  }
  CHECK_THROWS_AS(hardy_ratio(ws, Vec::Zero(g.num_nodes())), WeightError);
}

TEST_CASE("weighted norms") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 33);
  WeightSystem ws = build_weights(g);
  Vec u = sample(g, [](const Eigen::Vector3d& x) { return smooth_bump(x, Eigen::Vector3d(0.5, 0.3, 0), 0.15, 2); });
  // support inside {θ > r0} where ρ = 1: weighted and plain L² agree
  CHECK(norm_L2_rho(ws, u) == doctest::Approx(std::sqrt(integrate(g, u.cwiseAbs2()))));
  CHECK(norm_L2_rho_inv(ws, u) == doctest::Approx(norm_L2_rho(ws, u)));
  CHECK(norm_Hk_rho(ws, u, 2) > norm_Hk_rho(ws, u, 1));
  CHECK(norm_Hk_rho(ws, u, 1) > norm_Hk_rho(ws, u, 0));
  CHECK_THROWS(norm_Hk_rho(ws, u, 3));
}

}  // TEST_SUITE
