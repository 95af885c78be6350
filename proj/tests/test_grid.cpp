#include "deform/grid.hpp"

#include <doctest.h>

#include <cmath>

using namespace deform;

TEST_SUITE("grid") {

TEST_CASE("node roles on the unit square") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 9);
  CHECK(g.num_nodes() == 81);
  CHECK(g.sigma.axis == 1);
  CHECK(g.sigma.side == 0);
  // Σ is the open bottom edge, Γ its two endpoints, everything else on the boundary is Σ′
  CHECK(g.sigma_nodes.size() == 7);
  CHECK(g.gamma_nodes.size() == 2);
  CHECK(g.role[g.node(0, 0)] == NodeRole::Gamma);
  CHECK(g.role[g.node(8, 0)] == NodeRole::Gamma);
  CHECK(g.role[g.node(4, 0)] == NodeRole::Sigma);
  CHECK(g.role[g.node(4, 8)] == NodeRole::SigmaPrime);
  CHECK(g.role[g.node(0, 4)] == NodeRole::SigmaPrime);
  CHECK(g.role[g.node(4, 4)] == NodeRole::Interior);
  for (int nd = 0; nd < g.num_nodes(); ++nd) {
    auto ix = g.index(nd);
    CHECK(g.node(ix[0], ix[1], ix[2]) == nd);
  }
  CHECK(g.inward(g.node(3, 0), 2) == g.node(3, 2));
}

TEST_CASE("sigma face selection") {
  SigmaSpec s;
  s.axis = 0;
  s.side = 1;
  DomainGrid g = build_grid(2, {1, 2, 1}, 9, s);
  CHECK(g.outward_sign() == 1);
  for (int nd : g.sigma_nodes) CHECK(g.index(nd)[0] == g.n[0] - 1);
}

TEST_CASE("quadrature") {
  for (int dim : {2, 3}) {
    DomainGrid g = build_grid(dim, {1, 2, 0.5}, 9);
    Vec one = Vec::Ones(g.num_nodes());
    const double vol = dim == 2 ? 2.0 : 1.0;
    CHECK(integrate(g, one) == doctest::Approx(vol).epsilon(1e-13));
    // trapezoid is exact for multilinear integrands
    Vec lin(g.num_nodes());
    for (int nd = 0; nd < g.num_nodes(); ++nd) {
      auto x = g.coords(nd);
      lin[nd] = 1 + x[0] + 3 * x[1] * x[0];
    }
    const double exact = dim == 2 ? 2 + 1 + 3 * 0.5 * 2 : 0.5 * (2 + 1 + 3 * 0.5 * 2);
    CHECK(integrate(g, lin) == doctest::Approx(exact).epsilon(1e-12));
    const double face = dim == 2 ? 1.0 : 2.0;  // Σ is the low face of the last axis
    CHECK(integrate_sigma(g, one) == doctest::Approx(face).epsilon(1e-13));
  }
}

TEST_CASE("collar condition and bad resolutions are rejected") {
  CHECK_THROWS_AS(build_grid(2, {1, 1, 1}, 9, {}, 0.3), ConfigError);
  CHECK_NOTHROW(build_grid(2, {1, 1, 1}, 17, {}, 0.3));
  CHECK_THROWS_AS(build_grid(4, {1, 1, 1}, 17), ConfigError);
  CHECK_THROWS_AS(build_grid(2, {1, 1, 1}, 2), ConfigError);
}

TEST_CASE("difference operators are exact on quadratics") {
  for (bool sbp : {false, true}) {
    DomainGrid g = build_grid(2, {1, 1, 1}, 11);
    DiffOps ops = build_diff_ops(g, sbp);
    Vec q(g.num_nodes());
    for (int nd = 0; nd < g.num_nodes(); ++nd) {
      auto x = g.coords(nd);
      q[nd] = 2 * x[0] * x[0] - x[0] * x[1] + 3 * x[1] * x[1] + x[1];
    }
    Vec dxy = ops.d2[0][1] * q, dyy = ops.d2[1][1] * q;
    if (!sbp) {
      Vec dx = ops.d1[0] * q, dxx = ops.d2[0][0] * q;
      for (int nd = 0; nd < g.num_nodes(); ++nd) {
        auto x = g.coords(nd);
        CHECK(dx[nd] == doctest::Approx(4 * x[0] - x[1]).epsilon(1e-9));
        CHECK(dxx[nd] == doctest::Approx(4).epsilon(1e-9));
      }
    }
    for (int nd = 0; nd < g.num_nodes(); ++nd) {
      auto ix = g.index(nd);
      if (ix[0] == 0 || ix[1] == 0 || ix[0] == 10 || ix[1] == 10) continue;
      CHECK(dxy[nd] == doctest::Approx(-1).epsilon(1e-9));
      CHECK(dyy[nd] == doctest::Approx(6).epsilon(1e-9));
    }
  }
}

TEST_CASE("summation by parts closure") {
  // Σ_w u (D v) + (D u) v = u v |_end - u v |_start along each grid line
  DomainGrid g = build_grid(2, {1, 1, 1}, 13);
  DiffOps ops = build_diff_ops(g, true);
  Vec u(g.num_nodes()), v(g.num_nodes());
  for (int nd = 0; nd < g.num_nodes(); ++nd) {
    auto x = g.coords(nd);
    u[nd] = std::sin(2 * x[0]) + x[1];
    v[nd] = std::cos(x[0] * x[1]) + x[0] * x[0];
  }
  Vec w = g.volume_weight;
  const double lhs = w.dot(u.cwiseProduct(ops.d1[0] * v)) + w.dot((ops.d1[0] * u).cwiseProduct(v));
  double rhs = 0;
  for (int j = 0; j < g.n[1]; ++j) {
    const double wy = g.volume_weight[g.node(1, j)] / g.h[0];  // interior x weight is h_x
    const int a = g.node(0, j), b = g.node(g.n[0] - 1, j);
    rhs += wy * (u[b] * v[b] - u[a] * v[a]);
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("distance to the cut boundary") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 9);
  Vec d = euclidean_distance_to_sigma_prime(g);
  for (int nd = 0; nd < g.num_nodes(); ++nd) {
    auto x = g.coords(nd);
    CHECK(d[nd] == doctest::Approx(std::min({x[0], 1 - x[0], 1 - x[1]})));
  }
}

}  // TEST_SUITE
