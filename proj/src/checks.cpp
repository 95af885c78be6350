#include "deform/checks.hpp"

#include "deform/curvature.hpp"
#include "deform/fields.hpp"
#include "deform/generic.hpp"
#include "deform/picard.hpp"
#include "deform/system.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace deform {

CheckRow at_most(std::string name, double value, double bound) {
  return {std::move(name), value, "<=", bound, 0, value <= bound};
}
CheckRow at_least(std::string name, double value, double bound) {
  return {std::move(name), value, ">=", bound, 0, value >= bound};
}
CheckRow equals(std::string name, double value, double target) {
  return {std::move(name), value, "==", target, 0, value == target};
}
CheckRow within(std::string name, double value, double lo, double hi) {
  return {std::move(name), value, "in", lo, hi, value >= lo && value <= hi};
}

bool CriterionResult::pass() const {
  if (rows.empty()) return false;
  for (const CheckRow& r : rows)
    if (!r.pass) return false;
  return true;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int mid_res(int r) { return (3 * r - 1) / 2; }
int fine_res(int r) { return 2 * r - 1; }

DomainGrid unit_grid(int res, int dim = 2) { return build_grid(dim, {1.0, 1.0, 1.0}, res); }

MetricSpec metric_of(const std::string& kind) {
  MetricSpec m;
  m.kind = kind;
  if (kind == "round_sphere") m.center = {0.5, 0.0, 0.5};
  return m;
}

double order(double coarse, double fine, double h_coarse, double h_fine) {
  return std::log(coarse / fine) / std::log(h_coarse / h_fine);
}

// Smooth random tensor: sums of sin·cos modes with seeded phases.
SymTensorField random_tensor(const DomainGrid& grid, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  const int n = grid.dim, nc = num_components(n);
  std::vector<std::array<double, 4>> c(nc);
  for (auto& r : c)
    for (double& v : r) v = U(rng);
  return tensor_from_function(grid, [&](const Eigen::Vector3d& x) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    int p = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++p) {
        double v = c[p][0] * std::sin(M_PI * (x[0] + c[p][1])) * std::cos(M_PI * (x[1] * c[p][2] + c[p][3]));
        if (n == 3) v *= std::cos(M_PI * x[2] * c[p][2]);
        m(i, j) = m(j, i) = v;
      }
    return m;
  });
}

// Separable polynomial pieces: X(x) Y(y) with X, Y compactly supported polynomials.
struct Piece {
  Eigen::VectorXd coef;  // ascending powers
  double lo, hi;
  double operator()(int k, double x) const {
    if (x < lo || x > hi) return 0;
    Eigen::VectorXd c = coef;
    for (int d = 0; d < k; ++d) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(std::max<Eigen::Index>(1, c.size() - 1));
      for (int i = 1; i < c.size(); ++i) e[i - 1] = i * c[i];
      c = e;
    }
    double s = 0;
    for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i) s = s * x + c[i];
    return s;
  }
};

Eigen::VectorXd poly_mul(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(a.size() + b.size() - 1);
  for (int i = 0; i < a.size(); ++i) c.segment(i, b.size()) += a[i] * b;
  return c;
}
Eigen::VectorXd poly_pow(const Eigen::VectorXd& a, int k) {
  Eigen::VectorXd r = Eigen::VectorXd::Ones(1);
  while (k--) r = poly_mul(r, a);
  return r;
}

// u on Σ-adjacent manufactured problem for the flat metric: w = X(x) Y(y), w = w_y = 0 at y = 0.
// Returns w and f = L(ρ L* w) evaluated from exact derivatives of w, θ and ρ̃.
std::pair<Vec, Vec> flat_manufactured(const WeightSystem& ws) {
  const DomainGrid& g = ws.grid;
  const double xa = 0.3, xb = 0.7, yc = 0.4;
  Eigen::VectorXd lx(2), rx(2), y2(3), ry(2);
  lx << -xa, 1;
  rx << xb, -1;
  y2 << 0, 0, 1;
  ry << yc, -1;
  Piece X{poly_pow(poly_mul(lx, rx), 6), xa, xb};
  Piece Y{poly_mul(y2, poly_pow(ry, 6)), 0, yc};
  const double scale = 1.0 / (X(0, 0.5 * (xa + xb)) * Y(0, 0.25 * yc));
  const WeightParams& P = ws.params;
  const int N = g.num_nodes();
  Vec w(N), f(N);
  for (int nd = 0; nd < N; ++nd) {
    const Eigen::Vector3d x = g.coords(nd);
    auto W = [&](int i, int j) { return scale * X(i, x[0]) * Y(j, x[1]); };
    const double t = ws.theta[nd];
    const double r = rho_tilde(t, P.r0, P.r1), r1 = rho_tilde_d1(t, P.r0, P.r1), r2 = rho_tilde_d2(t, P.r0, P.r1);
    const double rho = std::pow(r, P.N);
    Eigen::Vector2d gt = ws.grad_theta.row(nd).head<2>().transpose();
    Eigen::Matrix2d ht = ws.hess_theta[nd].topLeftCorner<2, 2>();
    Eigen::Vector2d Dr = Eigen::Vector2d::Zero();
    Eigen::Matrix2d D2r = Eigen::Matrix2d::Zero();
    if (r > 0) {
      Dr = P.N * std::pow(r, P.N - 1) * r1 * gt;
      D2r = P.N * (P.N - 1) * std::pow(r, P.N - 2) * r1 * r1 * gt * gt.transpose() +
            P.N * std::pow(r, P.N - 1) * (r2 * gt * gt.transpose() + r1 * ht);
    }
    w[nd] = W(0, 0);
    Eigen::Matrix2d H;
    H << W(2, 0), W(1, 1), W(1, 1), W(0, 2);
    const double lap = W(2, 0) + W(0, 2);
    const Eigen::Vector2d grad_lap(W(3, 0) + W(1, 2), W(2, 1) + W(0, 3));
    const double bilap = W(4, 0) + 2 * W(2, 2) + W(0, 4);
    // flat 2D: L*w = Hess w − Δw δ, div L*w = 0, tr L*w = −Δw
    const Eigen::Matrix2d M = H - lap * Eigen::Matrix2d::Identity();
    f[nd] = D2r.cwiseProduct(M).sum() + D2r.trace() * lap + 2 * Dr.dot(grad_lap) + rho * bilap;
  }
  return {w, f};
}

Vec restrict_free(const LinearizedSystem& sys, const Vec& full) {
  Vec z(sys.nz());
  for (int i = 0; i < sys.nz(); ++i) z[i] = full[sys.z_nodes[i]];
  return sys.Pz * z;
}

}  // namespace

// ------------------------------------------------------------------------- 1

CriterionResult check_linearization(int r) {
  CriterionResult c{1, "linearization fidelity", {}, ""};
  const double t = 1e-4;
  const int levels[2] = {r, fine_res(r)};
  double err[2][2][10];
  double h[2];
  for (int l = 0; l < 2; ++l) {
    DomainGrid grid = unit_grid(levels[l]);
    h[l] = grid.h_min();
    MetricField g0 = make_metric(grid, MetricSpec{});
    Geometry geo = make_geometry(grid, g0);
    for (unsigned s = 0; s < 10; ++s) {
      SymTensorField a = random_tensor(grid, 100 + s);
      CurvatureData cp = curvature(grid, geo.ops, g0 + t * a);
      CurvatureData cm = curvature(grid, geo.ops, g0 - t * a);
      Vec La = apply_L(geo, a), Ha = apply_Hdot(geo, a);
      double eL = 0, eH = 0;
      for (int nd = 0; nd < grid.num_nodes(); ++nd)
        if (grid.role[nd] == NodeRole::Interior || grid.role[nd] == NodeRole::Sigma)
          eL = std::max(eL, std::abs(La[nd] - (cp.scalar[nd] - cm.scalar[nd]) / (2 * t)));
      for (int nd : grid.sigma_nodes) eH = std::max(eH, std::abs(Ha[nd] - (cp.H[nd] - cm.H[nd]) / (2 * t)));
      err[l][0][s] = eL;
      err[l][1][s] = eH;
    }
  }
  const char* names[2] = {"L", "Hdot"};
  for (int q = 0; q < 2; ++q) {
    double rmin = kInf, rmax = 0, omin = kInf, cmin = kInf, cmax = 0;
    for (int s = 0; s < 10; ++s) {
      const double ratio = err[0][q][s] / err[1][q][s];
      rmin = std::min(rmin, ratio);
      rmax = std::max(rmax, ratio);
      omin = std::min(omin, order(err[0][q][s], err[1][q][s], h[0], h[1]));
      // constant of err <= C (h² + t²) fitted per level; it must not drift under refinement
      const double cc = err[0][q][s] / (h[0] * h[0] + t * t), cf = err[1][q][s] / (h[1] * h[1] + t * t);
      cmin = std::min(cmin, cf / cc);
      cmax = std::max(cmax, cf / cc);
    }
    c.rows.push_back(within(std::string("min error ratio ") + names[q], rmin, 3.0, 5.0));
    c.rows.push_back(within(std::string("max error ratio ") + names[q], rmax, 3.0, 5.0));
    c.rows.push_back(at_least(std::string("min order ") + names[q], omin, 1.8));
    c.rows.push_back(within(std::string("fitted C fine/coarse, min ") + names[q], cmin, 0.75, 1.25));
    c.rows.push_back(within(std::string("fitted C fine/coarse, max ") + names[q], cmax, 0.75, 1.25));
  }
  c.note = "10 seeded tensors, default bump metric, t = 1e-4, resolutions " + std::to_string(levels[0]) + "/" +
           std::to_string(levels[1]);
  return c;
}

// ------------------------------------------------------------------------- 2

CriterionResult check_greens_formula(int r) {
  CriterionResult c{2, "Green's formula", {}, ""};
  auto measure = [](int res, const std::string& kind, double* rel) {
    DomainGrid grid = unit_grid(res);
    Geometry geo = make_geometry(grid, make_metric(grid, metric_of(kind)));
    SymTensorField a = tensor_from_function(grid, [](const Eigen::Vector3d& x) {
      const double b = smooth_bump(x, Eigen::Vector3d(0.5, 0, 0), 0.45, 2);
      Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
      m(0, 0) = 1 + x[0];
      m(0, 1) = m(1, 0) = x[1];
      m(1, 1) = 2 - x[0] * x[1];
      return Eigen::Matrix3d(b * m);
    });
    Vec u = sample(grid, [](const Eigen::Vector3d& x) {
      return smooth_bump(x, Eigen::Vector3d(0.45, 0, 0), 0.45, 2) * (1 + x[0]);
    });
    GreensTerms gt = greens_terms(geo, a, u);
    if (rel) *rel = gt.residual() / std::max({std::abs(gt.lhs), std::abs(gt.rhs), 1.0});
    return gt.residual();
  };
  const int rc = r, rf = fine_res(r);
  const double hc = 1.0 / (rc - 1), hf = 1.0 / (rf - 1);
  double rel = 0;
  const double ec = measure(rc, "flat", nullptr), ef = measure(rf, "flat", &rel);
  c.rows.push_back(at_least("order (flat)", order(ec, ef, hc, hf), 1.8));
  c.rows.push_back(at_most("relative residual at fine level (flat)", rel, 1e-4));
  const double bc = measure(rc, "conformal_bump", nullptr), bf = measure(rf, "conformal_bump", nullptr);
  c.rows.push_back(at_least("order (default bump metric)", order(bc, bf, hc, hf), 1.8));
  c.note = "pair supported across Σ; the relative bound is asserted on the flat metric";
  return c;
}

// ------------------------------------------------------------------------- 3

CriterionResult check_weight_construction(int r) {
  CriterionResult c{3, "weight construction", {}, ""};
  auto add = [&](int dim, int res) {
    DomainGrid grid = unit_grid(res, dim);
    WeightSystem ws = build_weights(grid, {}, true);
    const std::string tag = " (dim " + std::to_string(dim) + ", res " + std::to_string(res) + ")";
    double band = 0;
    const double collar = 4 * ws.params.r0;
    for (int nd = 0; nd < grid.num_nodes(); ++nd)
      if (ws.d[nd] > 0 && ws.d[nd] < collar) band = std::max(band, std::abs(ws.theta[nd] / ws.d[nd] - 1));
    c.rows.push_back(at_most("max |theta/d - 1|" + tag, band, ws.params.eps));
    c.rows.push_back(at_most("C1" + tag, ws.C1, 2.0));
    c.rows.push_back(at_most("C2" + tag, ws.C2, 50.0));
    c.rows.push_back(equals("violations" + tag, static_cast<double>(ws.violations.size()), 0));
  };
  add(2, fine_res(r));
  add(3, 25);
  return c;
}

// ------------------------------------------------------------------------- 4

CriterionResult check_dirichlet_solver(int r) {
  CriterionResult c{4, "Dirichlet solver", {}, ""};
  {
    DomainGrid grid = unit_grid(r);
    WeightSystem ws = build_weights(grid);
    LinearizedSystem sys = assemble(grid, make_metric(grid, MetricSpec{}), ws);
    Vec w = restrict_free(sys, sample(grid, [](const Eigen::Vector3d& x) {
      return x[1] * x[1] * smooth_bump(x, Eigen::Vector3d(0.5, 0.1, 0), 0.3, 2);
    }));
    Vec u = solve_dirichlet_zero(sys, sys.A4 * w);
    c.rows.push_back(at_most("discrete manufactured relative error", (u - w).norm() / w.norm(), 1e-8));
    Vec z = solve_dirichlet_zero(sys, Vec::Zero(grid.num_nodes()));
    c.rows.push_back(equals("max |u| for f = 0", z.cwiseAbs().maxCoeff(), 0));
  }
  const int levels[2] = {r, fine_res(r)};
  double err[2], h[2];
  for (int l = 0; l < 2; ++l) {
    DomainGrid grid = unit_grid(levels[l]);
    WeightSystem ws = build_weights(grid);
    LinearizedSystem sys = assemble(grid, flat_metric(grid), ws);
    auto [w, f] = flat_manufactured(ws);
    Vec u = solve_dirichlet_zero(sys, f);
    err[l] = norm_Hk_rho(ws, u - w, 1) / norm_Hk_rho(ws, w, 1);
    h[l] = grid.h_min();
  }
  c.rows.push_back(at_least("H1 order, continuum manufactured solution (flat)", order(err[0], err[1], h[0], h[1]), 1.5));
  c.note = "continuum solution w = X(x)Y(y) with w = w_y = 0 on Σ, f = L(ρL*w) from exact derivatives";
  return c;
}

// ------------------------------------------------------------------------- 5

CriterionResult check_generic_detection(int r) {
  CriterionResult c{5, "generic detection", {}, ""};
  const std::vector<int> res{r, mid_res(r), fine_res(r)};
  KernelReport flat = kernel_scan(2, {1.0, 1.0, 1.0}, SigmaSpec{}, metric_of("flat"), res);
  c.rows.push_back(equals("kernel dimension (flat)", flat.kernel_dim, 2));
  // refinement orders and gap recomputed from the raw spectra
  double omin = kInf, lo = kInf, hi = 0;
  for (size_t l = 0; l + 1 < flat.levels.size(); ++l) {
    const KernelLevel &a = flat.levels[l], &b = flat.levels[l + 1];
    for (int j = 0; j < 2; ++j) omin = std::min(omin, order(a.sigma[j], b.sigma[j], a.h, b.h));
  }
  for (const KernelLevel& l : flat.levels) {
    lo = std::min(lo, l.sigma[2]);
    hi = std::max(hi, l.sigma[2]);
  }
  c.rows.push_back(at_least("min order of the two trailing values (flat)", omin, 1.0));
  c.rows.push_back(at_most("relative spread of the third value (flat)", hi / lo - 1, 0.25));
  KernelReport bump = kernel_scan(2, {1.0, 1.0, 1.0}, SigmaSpec{}, MetricSpec{}, res);
  c.rows.push_back(equals("kernel dimension (default bump)", bump.kernel_dim, 0));
  return c;
}

// ------------------------------------------------------------------------- 6

CriterionResult check_static_consequences(int r) {
  CriterionResult c{6, "static-potential consequences", {}, ""};
  const std::vector<int> res{r, mid_res(r), fine_res(r)};
  for (const std::string kind : {"flat", "round_sphere"}) {
    const MetricSpec spec = metric_of(kind);
    KernelReport kr = kernel_scan(2, {1.0, 1.0, 1.0}, SigmaSpec{}, spec, res);
    c.rows.push_back(at_least("kernel dimension (" + kind + ")", kr.kernel_dim, 1));
    StaticReport st = check_static_properties(kr, make_metric(kr.grid, spec));
    for (const StaticCheck& s : st.checks)
      if (s.name == "constant_R" || s.name == "locally_constant_H")
        c.rows.push_back(at_most(s.name + " deviation (" + kind + ")", s.deviation, s.tolerance));
  }
  c.note = "tolerance 10 h^2 max(1, sup|.|) at the finest level";
  return c;
}

// ------------------------------------------------------------------------- 7

CriterionResult check_fredholm_structure(int r) {
  CriterionResult c{7, "Fredholm structure", {}, ""};
  {
    DomainGrid grid = unit_grid(r);
    WeightSystem ws = build_weights(grid);
    LinearizedSystem sys = assemble(grid, make_metric(grid, MetricSpec{}), ws);
    build_boundary_operators(sys);
    const double asym = (sys.G_D - sys.G_D.transpose()).norm() / sys.G_D.norm();
    c.rows.push_back(at_most("P relative asymmetry", asym, 1e-12));
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sys.G_D + sys.G_D.transpose()), Eigen::EigenvaluesOnly);
    c.rows.push_back(at_least("P smallest eigenvalue / largest", es.eigenvalues()[0] / es.eigenvalues().maxCoeff(), 1e-12));
  }
  {
    DomainGrid grid = unit_grid(r);
    WeightSystem ws = build_weights(grid);
    LinearizedSystem sys = assemble(grid, flat_metric(grid), ws);
    build_boundary_operators(sys);
    c.rows.push_back(equals("max |Bhat - P| (flat)", (sys.Bhat - sys.G_D).cwiseAbs().maxCoeff(), 0));
  }
  const int levels[2] = {r, fine_res(r)};
  double rel[2], h[2];
  for (int l = 0; l < 2; ++l) {
    DomainGrid grid = unit_grid(levels[l]);
    WeightSystem ws = build_weights(grid);
    LinearizedSystem sys = assemble(grid, make_metric(grid, MetricSpec{}), ws);
    build_boundary_operators(sys);
    Vec uh = sample(grid, [](const Eigen::Vector3d& x) { return smooth_bump(x, Eigen::Vector3d(0.5, 0, 0), 0.3, 2); });
    Vec bh = apply_Bhat(sys, uh);
    Vec direct = strong_B(sys, rho_Lstar(sys, solve_dirichlet_boundary(sys, uh)));
    double d = 0, m = 0;
    for (int s : sys.b_nodes) {
      d = std::max(d, std::abs(bh[s] / sys.M_sigma[s] - direct[s]));
      m = std::max(m, std::abs(direct[s]));
    }
    rel[l] = d / m;
    h[l] = grid.h_min();
  }
  c.rows.push_back(at_least("Bhat vs direct B(rho L* E u) order", order(rel[0], rel[1], h[0], h[1]), 0.8));
  c.rows.push_back(at_most("Bhat vs direct relative gap (fine)", rel[1], 1.0));
  return c;
}

// ------------------------------------------------------------------------- 8

CriterionResult check_linearized_solve(int r) {
  CriterionResult c{8, "linearized solve", {}, ""};
  const int levels[2] = {r, mid_res(r)};
  double stab[2][5], b2[2][5], res_int = 0, res_bdy = 0;
  for (int l = 0; l < 2; ++l) {
    DomainGrid grid = unit_grid(levels[l]);
    WeightSystem ws = build_weights(grid);
    LinearizedSystem sys = assemble(grid, make_metric(grid, MetricSpec{}), ws);
    build_boundary_operators(sys);
    for (int s = 0; s < 5; ++s) {
      std::mt19937 rng(500 + s);
      std::uniform_real_distribution<double> U(0, 1);
      const Eigen::Vector3d cf(0.3 + 0.4 * U(rng), 0.3 + 0.4 * U(rng), 0);
      const double phase = 6 * U(rng), freq = 1 + 3 * U(rng);
      Vec f = sample(grid, [&](const Eigen::Vector3d& x) { return smooth_bump(x, cf, 0.2, 2); });
      Vec psi = sample(grid, [&](const Eigen::Vector3d& x) {
        return std::cos(freq * x[0] + phase) * smooth_bump(x, Eigen::Vector3d(0.5, 0, 0), 0.35, 2);
      });
      SolveReport rep;
      SymTensorField a = solve_linearized(sys, f, psi, &rep);
      res_int = std::max(res_int, rep.interior_residual);
      res_bdy = std::max(res_bdy, rep.boundary_residual);
      stab[l][s] = rep.stability_constant;
      b2[l][s] = tensor_weighted_sup(sys, a, 2 + 0.5 * grid.dim, -0.5);
    }
  }
  double dstab = 0, rb2 = 0;
  bool finite = true;
  for (int s = 0; s < 5; ++s) {
    dstab = std::max(dstab, std::abs(stab[1][s] / stab[0][s] - 1));
    rb2 = std::max(rb2, std::max(b2[1][s] / b2[0][s], b2[0][s] / b2[1][s]));
    finite = finite && std::isfinite(b2[0][s]) && std::isfinite(b2[1][s]);
  }
  c.rows.push_back(at_most("max interior residual (relative, dual norm)", res_int, 1e-8));
  c.rows.push_back(at_most("max boundary residual (relative, D* norm)", res_bdy, 1e-8));
  c.rows.push_back(at_most("max relative change of stability constant", dstab, 0.3));
  c.rows.push_back(equals("weighted sup norms finite", finite ? 1 : 0, 1));
  c.rows.push_back(at_most("max ratio of weighted sup norms", rb2, 2.0));
  c.note = "5 seeded (f, psi) pairs, resolutions " + std::to_string(levels[0]) + "/" + std::to_string(levels[1]);
  return c;
}

// ------------------------------------------------------------------------- 9

CriterionResult check_picard(int r) {
  CriterionResult c{9, "Picard iteration", {}, ""};
  DomainGrid grid = unit_grid(r);
  WeightSystem ws = build_weights(grid);
  MetricField g0 = make_metric(grid, MetricSpec{});
  LinearizedSystem sys = assemble(grid, g0, ws);
  const double h = grid.h_min();
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  M(0, 0) = 1;
  M(0, 1) = M(1, 0) = 0.3;
  M(1, 1) = 0.5;
  auto manufactured = [&](double eps) {
    SymTensorField a = SymTensorField::zeros(2, grid.num_nodes());
    for (int nd = 0; nd < grid.num_nodes(); ++nd)
      a.set(nd, eps * ws.rho[nd] * smooth_bump(grid.coords(nd), Eigen::Vector3d(0.5, 0, 0), 0.3, 2) * M);
    return curvature(grid, sys.geo.ops, g0 + a);
  };
  PicardParams pp;
  auto first_step = [&](const IterationState& st) {
    return st.history.size() > 1 ? st.history[1].residual.total() : st.final_residual.total();
  };

  const double eps = 1e-2;
  CurvatureData t1 = manufactured(eps), t2 = manufactured(eps / 2);
  IterationState s1 = picard_run(sys, g0, t1.scalar, t1.H, pp);
  IterationState s2 = picard_run(sys, g0, t2.scalar, t2.H, pp);

  c.rows.push_back(equals("converged", s1.reason == Termination::Converged || s1.reason == Termination::Floor, 1));
  bool monotone = true;
  std::vector<double> seq;
  for (const StepRecord& rec : s1.history) seq.push_back(rec.residual.total());
  seq.push_back(s1.final_residual.total());
  for (size_t j = 1; j < seq.size(); ++j) monotone = monotone && seq[j] < seq[j - 1];
  c.rows.push_back(equals("residuals strictly decreasing", monotone, 1));
  c.rows.push_back(within("first-step residual ratio eps vs eps/2", first_step(s1) / first_step(s2), 3.0, 5.0));

  const auto mask = support_mask(grid);
  long changed = 0;
  for (int nd = 0; nd < grid.num_nodes(); ++nd)
    if (!mask[nd])
      for (int p = 0; p < s1.g.comp.cols(); ++p) changed += s1.g.comp(nd, p) != g0.comp(nd, p);
  c.rows.push_back(equals("entries of g - g0 changed outside the support mask", static_cast<double>(changed), 0));

  CurvatureData cf = curvature(grid, sys.geo.ops, s1.g);
  double eR = 0, eH = 0;
  for (int nd : sys.z_nodes) eR = std::max(eR, std::abs(cf.scalar[nd] - t1.scalar[nd]));
  for (int nd : sys.b_nodes) eH = std::max(eH, std::abs(cf.H[nd] - t1.H[nd]));
  const double allowance = std::max(pp.tol, h * h);
  c.rows.push_back(at_most("max |R(g) - R'| over free nodes", eR, allowance));
  c.rows.push_back(at_most("max |H(g) - H'| on Σ", eH, allowance));
  c.note = "eps = 1e-2, " + std::to_string(s1.history.size()) + " steps";
  return c;
}

// ------------------------------------------------------------------------ 10

CriterionResult check_hardy(int r) {
  CriterionResult c{10, "Hardy diagnostic", {}, ""};
  double worst = 0;
  for (int res : {r, mid_res(r), fine_res(r)}) {
    DomainGrid grid = unit_grid(res);
    WeightSystem ws = build_weights(grid);
    Vec u = sample(grid, [](const Eigen::Vector3d& x) { return smooth_bump(x, Eigen::Vector3d(0.5, 0.6, 0), 0.15, 2); });
    worst = std::max(worst, hardy_ratio(ws, u));
  }
  const double bound = 1.0 / (WeightParams{}.r0 * WeightParams{}.r0);
  c.rows.push_back(at_most("interior ratio, max over refinement", worst, bound));
  DomainGrid grid = unit_grid(fine_res(r));
  WeightSystem ws = build_weights(grid);
  std::vector<Vec> fam = hardy_corner_family(grid);
  bool increasing = true;
  double prev = -kInf;
  for (const Vec& u : fam) {
    const double q = hardy_ratio(ws, u);
    increasing = increasing && q > prev;
    prev = q;
  }
  c.rows.push_back(at_least("corner family members", static_cast<double>(fam.size()), 4));
  c.rows.push_back(equals("corner family ratio strictly increasing", increasing, 1));
  return c;
}

// ----------------------------------------------------------------- auxiliary

CriterionResult check_a4_support(int r) {
  CriterionResult c{0, "A4 stencil footprint", {}, ""};
  DomainGrid grid = unit_grid(r);
  WeightSystem ws = build_weights(grid);
  LinearizedSystem sys = assemble(grid, flat_metric(grid), ws);
  SpMat At = sys.A4.transpose();
  long worst = 0;
  for (int nd = 0; nd < grid.num_nodes(); ++nd) {
    auto ix = grid.index(nd);
    if (ix[0] < 3 || ix[1] < 3 || ix[0] > r - 4 || ix[1] > r - 4 || sys.z_of[nd] < 0) continue;
    long count = 0;
    for (SpMat::InnerIterator it(At, nd); it; ++it) count += it.value() != 0;
    worst = std::max(worst, count);
  }
  c.rows.push_back(at_most("max nonzeros per interior row (flat)", static_cast<double>(worst), 13));
  return c;
}

std::vector<CriterionResult> run_suite(const std::string& suite, int r) {
  if (r < 9 || r % 2 == 0) throw ConfigError("verify resolution must be odd and at least 9");
  std::vector<CriterionResult> out;
  const bool all = suite == "all";
  if (all || suite == "operators") {
    out.push_back(check_linearization(r));
    out.push_back(check_greens_formula(r));
    out.push_back(check_a4_support(r));
  }
  if (all || suite == "weights") {
    out.push_back(check_weight_construction(r));
    out.push_back(check_hardy(r));
  }
  if (all || suite == "solver") {
    out.push_back(check_dirichlet_solver(r));
    out.push_back(check_fredholm_structure(r));
    out.push_back(check_linearized_solve(r));
  }
  if (all || suite == "generic") {
    out.push_back(check_generic_detection(r));
    out.push_back(check_static_consequences(r));
  }
  if (all || suite == "iteration") out.push_back(check_picard(r));
  if (out.empty()) throw ConfigError("unknown suite '" + suite + "' (operators|weights|solver|generic|iteration|all)");
  return out;
}

void print_results(std::ostream& os, const std::vector<CriterionResult>& results, bool rows) {
  for (const CriterionResult& c : results) {
    os << (c.pass() ? "PASS" : "FAIL") << "  ";
    if (c.id > 0) os << "criterion " << std::setw(2) << c.id << "  ";
    else os << "auxiliary     ";
    os << c.title << "\n";
    if (!rows) continue;
    for (const CheckRow& r : c.rows) {
      char buf[256];
      if (r.relation == "in")
        std::snprintf(buf, sizeof buf, "      [%s] %-56s %.4g in [%.4g, %.4g]", r.pass ? "ok" : "!!", r.name.c_str(),
                      r.value, r.lo, r.hi);
      else
        std::snprintf(buf, sizeof buf, "      [%s] %-56s %.4g %s %.4g", r.pass ? "ok" : "!!", r.name.c_str(), r.value,
                      r.relation.c_str(), r.lo);
      os << buf << "\n";
    }
    if (!c.note.empty()) os << "      " << c.note << "\n";
  }
}

}  // namespace deform
