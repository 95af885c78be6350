#include "deform/curvature.hpp"
#include "deform/fields.hpp"
#include "deform/picard.hpp"

#include <doctest.h>

#include <cmath>

using namespace deform;

namespace {

struct Setup {
  DomainGrid grid = build_grid(2, {1, 1, 1}, 33);
  WeightSystem ws = build_weights(grid);
  MetricField g0 = make_metric(grid, MetricSpec{});
  LinearizedSystem sys = assemble(grid, g0, ws);

  CurvatureData target(double eps) {
    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    M(0, 0) = 1;
    M(0, 1) = M(1, 0) = 0.3;
    M(1, 1) = 0.5;
    SymTensorField a = SymTensorField::zeros(2, grid.num_nodes());
    for (int nd = 0; nd < grid.num_nodes(); ++nd)
      a.set(nd, eps * ws.rho[nd] * smooth_bump(grid.coords(nd), Eigen::Vector3d(0.5, 0, 0), 0.3, 2) * M);
    return curvature(grid, sys.geo.ops, g0 + a);
  }
};

}  // namespace

TEST_SUITE("picard") {

TEST_CASE("contraction fit recovers a geometric ladder") {
  // r_j = ε^{1 + jδ} with ε = 1e-2, δ = 0.5
  std::vector<double> r;
  for (int j = 0; j < 5; ++j) r.push_back(std::pow(1e-2, 1 + 0.5 * j));
  ContractionFit f = contraction_fit(r);
  REQUIRE(f.sufficient);
  CHECK(f.delta == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f.log_eps == doctest::Approx(std::log(1e-2)).epsilon(1e-12));
  CHECK(f.fit_residual < 1e-10);
  CHECK(f.table.size() == 5);
  CHECK_FALSE(contraction_fit(std::vector<double>{1e-2, 1e-3}).sufficient);
  CHECK_FALSE(contraction_fit(std::vector<double>{1e-2, 1e-3, 2e-3}).sufficient);
}

TEST_CASE("zero data returns immediately") {
  Setup s;
  IterationState st = picard_run(s.sys, s.g0, s.sys.geo.curv.scalar, s.sys.geo.curv.H);
  CHECK(st.reason == Termination::ZeroData);
  CHECK(st.history.empty());
  CHECK(st.g.comp == s.g0.comp);
}

TEST_CASE("manufactured target converges with the support preserved") {
  Setup s;
  CurvatureData t = s.target(1e-2);
  std::vector<int> seen;
  IterationState st = picard_run(s.sys, s.g0, t.scalar, t.H, {},
                                 [&](int j, const MetricField&, const SymTensorField&) { seen.push_back(j); });
  CHECK(st.reason == Termination::Converged);
  CHECK(seen.size() == st.history.size());
  CHECK(st.final_residual.total() <= st.allowance);
  auto mask = support_mask(s.grid);
  for (int nd = 0; nd < s.grid.num_nodes(); ++nd)
    if (!mask[nd]) CHECK((st.g.comp.row(nd).array() == s.g0.comp.row(nd).array()).all());
  for (size_t j = 0; j < st.history.size(); ++j) {
    CHECK(st.history[j].leak == 0);
    CHECK(st.history[j].min_eig > 0);
    if (j > 0) CHECK(st.history[j].residual.total() < st.history[j - 1].residual.total());
  }
}

TEST_CASE("first-step residual scales quadratically in the amplitude") {
  Setup s;
  auto first = [&](double eps) {
    CurvatureData t = s.target(eps);
    PicardParams p;
    p.max_iter = 1;
    IterationState st = picard_run(s.sys, s.g0, t.scalar, t.H, p);
    return st.final_residual.total();
  };
  CHECK(first(1e-2) / first(5e-3) == doctest::Approx(4).epsilon(0.25));
}

TEST_CASE("initial residual above eps_max is a configuration error") {
  Setup s;
  CurvatureData t = s.target(1e-2);
  PicardParams p;
  p.eps_max = 1e-6;
  CHECK_THROWS_AS(picard_run(s.sys, s.g0, t.scalar, t.H, p), ConfigError);
}

TEST_CASE("iteration cap") {
  Setup s;
  CurvatureData t = s.target(1e-1);
  PicardParams p;
  p.max_iter = 2;
  p.eps_max = 1e9;
  IterationState st = picard_run(s.sys, s.g0, t.scalar, t.H, p);
  CHECK(st.reason == Termination::MaxIter);
  CHECK(st.history.size() == 2);
  CHECK(termination_name(st.reason) == "max_iter");
}

}  // TEST_SUITE
