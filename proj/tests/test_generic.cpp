#include "deform/fields.hpp"
#include "deform/generic.hpp"

#include <doctest.h>

using namespace deform;

TEST_SUITE("generic") {

TEST_CASE("flat rectangle has a two-dimensional kernel") {
  MetricSpec m;
  m.kind = "flat";
  KernelReport r = kernel_scan(2, {1, 1, 1}, SigmaSpec{}, m, {33, 49, 65});
  CHECK(r.verdict == KernelVerdict::NonGeneric);
  CHECK(r.kernel_dim == 2);
  REQUIRE(r.basis.size() == 2);
  // the basis spans {1, x} restricted to free nodes: projecting x onto it leaves nothing
  StaticReport st = check_static_properties(r, flat_metric(r.grid));
  CHECK(st.applicable);
  CHECK(st.all_pass());
  for (const auto& c : st.checks)
    if (c.name == "umbilic_sigma") CHECK(c.vacuous);
}

TEST_CASE("default bump metric is generic") {
  KernelReport r = kernel_scan(2, {1, 1, 1}, SigmaSpec{}, MetricSpec{}, {33, 49, 65});
  CHECK(r.verdict == KernelVerdict::Generic);
  CHECK(r.kernel_dim == 0);
  CHECK(r.basis.empty());
  StaticReport st = check_static_properties(r, make_metric(r.grid, MetricSpec{}));
  CHECK_FALSE(st.applicable);
}

TEST_CASE("round sphere patch is static with constant curvature") {
  MetricSpec m;
  m.kind = "round_sphere";
  m.center = {0.5, 0, 0.5};
  KernelReport r = kernel_scan(2, {1, 1, 1}, SigmaSpec{}, m, {33, 49, 65});
  CHECK(r.kernel_dim >= 1);
  StaticReport st = check_static_properties(r, make_metric(r.grid, m));
  for (const auto& c : st.checks) {
    INFO(c.name);
    CHECK(c.pass);
  }
}

TEST_CASE("metric provider form and single level spectrum") {
  DomainGrid g = build_grid(2, {1, 1, 1}, 17, {}, 0.3);
  WeightSystem ws = build_weights(g, {}, true);
  Geometry geo = make_geometry(g, flat_metric(g));
  std::vector<Vec> vecs;
  KernelLevel l = phi_star_spectrum(geo, ws, 4, 1, &vecs);
  CHECK(l.sigma.size() == 4);
  for (int j = 1; j < 4; ++j) CHECK(l.sigma[j] >= l.sigma[j - 1]);
  CHECK(vecs.size() == 4);
  CHECK(verdict_name(KernelVerdict::Generic) != verdict_name(KernelVerdict::NonGeneric));
}

}  // TEST_SUITE
