#include "deform/generic.hpp"

#include "deform/eigs.hpp"
#include "deform/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deform {

std::string verdict_name(KernelVerdict v) {
  switch (v) {
    case KernelVerdict::Generic: return "generic";
    case KernelVerdict::NonGeneric: return "non-generic";
    default: return "indeterminate";
  }
}

KernelLevel phi_star_spectrum(const Geometry& geo, const WeightSystem& ws, int count, unsigned seed,
                              std::vector<Vec>* vectors) {
  const int N = geo.num_nodes();
  std::vector<int> free_nodes;
  for (int nd = 0; nd < N; ++nd)
    if (!ws.pinned[nd]) free_nodes.push_back(nd);
  std::vector<Triplet> t;
  for (int i = 0; i < static_cast<int>(free_nodes.size()); ++i) t.emplace_back(free_nodes[i], i, 1.0);
  SpMat S(N, static_cast<int>(free_nodes.size()));
  S.setFromTriplets(t.begin(), t.end());

  SpMat A = lstar_matrix(geo, geo.sbp_ops) * S;
  SpMat Bd = phi_boundary_matrix(geo) * S;
  Vec w = geo.dmu.cwiseProduct(ws.rho);
  SpMat W = tensor_weight_matrix(geo, w);
  SpMat Wb = boundary_tensor_weight_matrix(geo, geo.dsigma.cwiseProduct(ws.rho));
  SpMat K = SpMat(A.transpose()) * W * A + SpMat(Bd.transpose()) * Wb * Bd;
  Vec mass = S.transpose() * w;
  SpMat M = SpMat(mass.asDiagonal());
  const double shift = 1e-8 * K.diagonal().mean() / mass.mean();
  EigenPairs e = smallest_eigenpairs(K, M, count, shift, seed);

  KernelLevel lvl;
  lvl.resolution = geo.grid.resolution;
  lvl.h = geo.grid.h_min();
  lvl.converged = e.converged;
  lvl.sigma.resize(e.values.size());
  // σ from the norms of the image, which keeps relative accuracy for near-null vectors
  for (int j = 0; j < e.values.size(); ++j) {
    Vec x = e.vectors.col(j);
    Vec a = A * x, b = Bd * x;
    double num = a.dot(W * a) + b.dot(Wb * b);
    lvl.sigma[j] = std::sqrt(std::max(0.0, num / x.dot(mass.asDiagonal() * x)));
  }
  std::vector<int> order(lvl.sigma.size());
  for (int j = 0; j < static_cast<int>(order.size()); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return lvl.sigma[a] < lvl.sigma[b]; });
  Vec sorted(lvl.sigma.size());
  for (int j = 0; j < sorted.size(); ++j) sorted[j] = lvl.sigma[order[j]];
  lvl.sigma = sorted;
  if (vectors) {
    vectors->clear();
    for (int j : order) vectors->push_back(S * e.vectors.col(j));
  }
  return lvl;
}

KernelReport kernel_scan(int dim, const std::array<double, 3>& extents, SigmaSpec sigma,
                         const MetricProvider& metric, const std::vector<int>& resolutions,
                         const WeightParams& weights, const KernelScanParams& params) {
  if (resolutions.size() < 2) throw ConfigError("kernel scan needs at least two resolutions");
  std::vector<int> res = resolutions;
  std::sort(res.begin(), res.end());
  const int count = std::max(params.num_values, dim + 3);

  KernelReport rep;
  std::vector<Vec> vecs;
  Vec dmu;
  for (size_t l = 0; l < res.size(); ++l) {
    DomainGrid grid = build_grid(dim, extents, res[l], sigma, weights.r0);
    WeightSystem ws = build_weights(grid, weights, true);
    Geometry geo = make_geometry(grid, metric(grid));
    const bool finest = l + 1 == res.size();
    rep.levels.push_back(phi_star_spectrum(geo, ws, count, params.seed, finest ? &vecs : nullptr));
    if (finest) {
      rep.grid = grid;
      rep.weights = weights;
      dmu = geo.dmu;
    }
  }

  auto order = [&](int j, size_t l) {
    const KernelLevel& c = rep.levels[l];
    const KernelLevel& f = rep.levels[l + 1];
    const double next = f.sigma[std::min<int>(j + 1, f.sigma.size() - 1)];
    if (f.sigma[j] <= params.roundoff * next) return std::numeric_limits<double>::infinity();
    return std::log(c.sigma[j] / f.sigma[j]) / std::log(c.h / f.h);
  };

  rep.verdict = KernelVerdict::Indeterminate;
  for (int d = 0; d <= std::min(dim + 1, count - 1); ++d) {
    std::vector<double> orders(d, std::numeric_limits<double>::infinity());
    bool shrink = true;
    for (int j = 0; j < d; ++j)
      for (size_t l = 0; l + 1 < rep.levels.size(); ++l) {
        orders[j] = std::min(orders[j], order(j, l));
        if (order(j, l) < params.min_order) shrink = false;
      }
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const KernelLevel& lvl : rep.levels) {
      lo = std::min(lo, lvl.sigma[d]);
      hi = std::max(hi, lvl.sigma[d]);
    }
    const double spread = lo > 0 ? hi / lo - 1 : std::numeric_limits<double>::infinity();
    if (shrink && spread <= params.gap_tolerance) {
      rep.kernel_dim = d;
      rep.kernel_orders = orders;
      rep.gap_spread = spread;
      rep.verdict = d == 0 ? KernelVerdict::Generic : KernelVerdict::NonGeneric;
      break;
    }
  }
  if (rep.verdict == KernelVerdict::Indeterminate) {
    rep.kernel_dim = -1;
    rep.note = "no clean gap: no count of trailing singular values shrinks at order >= " +
               std::to_string(params.min_order) + " while the next stays within " +
               std::to_string(params.gap_tolerance) + " relative spread";
    return rep;
  }

  // L²(dμ)-orthonormal basis at the finest level
  for (int j = 0; j < rep.kernel_dim; ++j) {
    Vec v = vecs[j];
    for (const Vec& b : rep.basis) v -= b.dot(dmu.asDiagonal() * v) * b;
    v /= std::sqrt(v.dot(dmu.asDiagonal() * v));
    rep.basis.push_back(v);
  }
  return rep;
}

KernelReport kernel_scan(int dim, const std::array<double, 3>& extents, SigmaSpec sigma, const MetricSpec& metric,
                         const std::vector<int>& resolutions, const WeightParams& weights,
                         const KernelScanParams& params) {
  return kernel_scan(
      dim, extents, sigma, [&](const DomainGrid& g) -> SymTensorField { return make_metric(g, metric); },
      resolutions, weights, params);
}

bool StaticReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const StaticCheck& c) { return c.pass; });
}

StaticReport check_static_properties(const KernelReport& report, const SymTensorField& g0) {
  StaticReport out;
  if (report.kernel_dim < 1) return out;
  out.applicable = true;
  const DomainGrid& grid = report.grid;
  const int n = grid.dim;
  const double h = grid.h_min();
  Geometry geo = make_geometry(grid, g0);
  const CurvatureData& cv = geo.curv;
  const auto mask = support_mask(grid);

  auto oscillation = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair{0.0, 0.0};
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return std::pair{*hi - *lo, std::max(std::abs(*lo), std::abs(*hi))};
  };

  std::vector<double> R, H;
  for (int nd = 0; nd < grid.num_nodes(); ++nd)
    if (mask[nd]) R.push_back(cv.scalar[nd]);
  for (int s : grid.sigma_nodes) H.push_back(cv.H[s]);
  {
    auto [osc, sup] = oscillation(R);
    StaticCheck c{"constant_R", osc, 10 * h * h * std::max(1.0, sup)};
    c.pass = c.deviation <= c.tolerance;
    out.checks.push_back(c);
  }
  {
    auto [osc, sup] = oscillation(H);
    StaticCheck c{"locally_constant_H", osc, 10 * h * h * std::max(1.0, sup)};
    c.pass = c.deviation <= c.tolerance;
    out.checks.push_back(c);
  }
  {
    StaticCheck c{"umbilic_sigma"};
    if (n < 3) {
      c.vacuous = true;
    } else {
      double dev = 0, sup = 0;
      const int k = grid.sigma.axis;
      for (int s : grid.sigma_nodes) {
        Eigen::Matrix3d gt = g0.at(s);
        gt.row(k).setZero();
        gt.col(k).setZero();
        Eigen::Matrix3d T = cv.h[s] - cv.H[s] / (n - 1) * gt;
        const Eigen::Matrix3d& gi = cv.ghat_inv[s];
        dev = std::max(dev, std::sqrt(std::max(0.0, (gi * T * gi).cwiseProduct(T).sum())));
        sup = std::max(sup, std::sqrt(std::max(0.0, (gi * cv.h[s] * gi).cwiseProduct(cv.h[s]).sum())));
      }
      c.deviation = dev;
      c.tolerance = 10 * h * h * std::max(1.0, sup);
      c.pass = dev <= c.tolerance;
    }
    out.checks.push_back(c);
  }

  // u_{iν} − u R_{iν} on Σ, away from the pinned collar where the basis is cut off.
  WeightSystem ws = build_weights(grid, report.weights, true);
  const double r0 = report.weights.r0;
  for (size_t b = 0; b < report.basis.size(); ++b) {
    const Vec& u = report.basis[b];
    std::array<Vec, 3> du;
    std::array<std::array<Vec, 3>, 3> ddu;
    for (int a = 0; a < n; ++a) du[a] = geo.ops.d1[a] * u;
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < n; ++c) ddu[a][c] = geo.ops.d2[a][c] * u;
    double dev = 0, scale = 0;
    for (int s : grid.sigma_nodes) {
      if (ws.theta[s] < r0) continue;
      Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double v = ddu[i][j][s];
          for (int k = 0; k < n; ++k) v -= cv.Gamma(s, k, i, j) * du[k][s];
          hess(i, j) = v;
        }
      const Eigen::Matrix3d ric = cv.ricci.at(s);
      Eigen::Vector3d r = (hess - u[s] * ric) * cv.nu[s];
      for (int i = 0; i < n; ++i)
        if (i != grid.sigma.axis) dev = std::max(dev, std::abs(r[i]));
      scale = std::max(scale, std::abs(u[s]) * std::max(1.0, ric.norm()));
    }
    StaticCheck c{"static_potential_ode_" + std::to_string(b), dev, h * std::max(1.0, scale)};
    c.pass = dev <= c.tolerance;
    out.checks.push_back(c);
  }
  return out;
}

}  // namespace deform
