#include "deform/weights.hpp"

#include "deform/fields.hpp"

#include <cmath>
#include <sstream>

namespace deform {

double smoothstep5(double s) {
  if (s <= 0) return 0;
  if (s >= 1) return 1;
  return s * s * s * (10 + s * (-15 + 6 * s));
}

namespace {

double smoothstep5_d1(double s) {
  if (s <= 0 || s >= 1) return 0;
  return 30 * s * s * (1 - s) * (1 - s);
}

double smoothstep5_d2(double s) {
  if (s <= 0 || s >= 1) return 0;
  return 60 * s * (1 - s) * (1 - 2 * s);
}

double bump1(double x, double c, double r) {
  double q = (x - c) / r;
  q *= q;
  return q >= 1 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - q));
}

}  // namespace

double eta(double t) { return smoothstep5((t - 0.5) / 0.5); }

double rho_tilde(double t, double r0, double r1) {
  if (t <= r1) return t;
  if (t >= r0) return 1.0;
  const double L = r0 - r1;
  const double s = (t - r1) / L;
  const double S = smoothstep5(s);
  return (1 - S) * (r1 + L * s) + S;
}

double rho_tilde_d1(double t, double r0, double r1) {
  if (t <= r1) return 1.0;
  if (t >= r0) return 0.0;
  const double L = r0 - r1;
  const double s = (t - r1) / L;
  const double S = smoothstep5(s), S1 = smoothstep5_d1(s);
  return (-S1 * (r1 + L * s) + (1 - S) * L + S1) / L;
}

double rho_tilde_d2(double t, double r0, double r1) {
  if (t <= r1 || t >= r0) return 0.0;
  const double L = r0 - r1;
  const double s = (t - r1) / L;
  const double S1 = smoothstep5_d1(s), S2 = smoothstep5_d2(s);
  return (S2 * (1 - r1 - L * s) - 2 * S1 * L) / (L * L);
}

double corner_blend_distance(double sigma, double tau, double eps) {
  const double r = std::sqrt(sigma * sigma + tau * tau);
  if (r == 0) return 0;
  const double e = eta(-sigma / (eps * r));
  return e * r + (1 - e) * std::abs(tau);
}

WeightSystem build_weights(const DomainGrid& grid, const WeightParams& params, bool allow_violations) {
  const WeightParams& P = params;
  if (!(P.r1 > 0 && P.r1 < P.r0)) throw ConfigError("weights: need 0 < r1 < r0");
  if (!(P.eps > 0 && P.eps <= 0.2)) throw ConfigError("weights: need 0 < epsilon <= 0.2");
  if (P.N < 4) throw ConfigError("weights: need N >= 4");
  if (P.theta_cut_factor < 0) throw ConfigError("weights: theta_cut_factor must be >= 0");

  WeightSystem ws;
  ws.params = P;
  ws.grid = grid;
  ws.ops = build_diff_ops(grid);
  const int n = grid.dim;
  const int N = grid.num_nodes();
  ws.p = P.smooth_min_power > 0 ? P.smooth_min_power : (n == 2 ? 12.0 : 16.0);
  ws.theta_cut = P.theta_cut_factor * grid.h_min();

  const Mat df = sigma_prime_face_distances(grid);
  const auto normals = sigma_prime_face_normals(grid);
  const double p = ws.p;
  const double cap = 4 * P.r0;

  ws.d = df.rowwise().minCoeff();
  ws.theta.resize(N);
  ws.grad_theta = Mat::Zero(N, n);
  ws.hess_theta.assign(N, Eigen::Matrix3d::Zero());
  ws.rho.resize(N);
  ws.phi.resize(N);
  ws.pinned.assign(N, 0);

  for (int nd = 0; nd < N; ++nd) {
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
    double t;
    int zero_face = -1;
    for (int f = 0; f < df.cols(); ++f)
      if (df(nd, f) <= 0) zero_face = f;
    if (zero_face >= 0) {
      t = 0;
      grad = normals[zero_face];
    } else {
      // smooth minimum (Σ d_f^{-p})^{-1/p}, factored by the nearest face for stability
      const double dmin = ws.d[nd];
      double sum = 0;
      for (int f = 0; f < df.cols(); ++f) sum += std::pow(dmin / df(nd, f), p);
      t = dmin * std::pow(sum, -1.0 / p);
      std::vector<double> w(df.cols());
      for (int f = 0; f < df.cols(); ++f) {
        w[f] = std::pow(t / df(nd, f), p + 1);
        grad += w[f] * normals[f];
      }
      for (int f = 0; f < df.cols(); ++f)
        hess += (p + 1) * w[f] * normals[f] * (grad / t - normals[f] / df(nd, f)).transpose();
      hess = (0.5 * (hess + hess.transpose())).eval();
    }
    if (t > cap) {
      const double th = std::tanh((t - cap) / P.r0);
      const double c1 = 1 - th * th;
      const double c2 = -2 * th * c1 / P.r0;
      hess = (c1 * hess + c2 * grad * grad.transpose()).eval();
      grad *= c1;
      t = cap + P.r0 * th;
    }
    ws.theta[nd] = t;
    ws.grad_theta.row(nd) = grad.head(n).transpose();
    ws.hess_theta[nd] = hess;
    ws.rho[nd] = std::pow(rho_tilde(t, P.r0, P.r1), P.N);
    ws.phi[nd] = 0.5 * t;
    ws.pinned[nd] = grid.role[nd] == NodeRole::SigmaPrime || grid.role[nd] == NodeRole::Gamma || t < ws.theta_cut;
  }

  // Node-by-node invariants.
  auto violate = [&](const char* check, int nd, double value, double bound) {
    ws.violations.push_back({check, nd, value, bound});
  };
  const double tol = 1e-12;
  const double h = grid.h_min();
  for (int nd = 0; nd < N; ++nd) {
    const double t = ws.theta[nd];
    const double dd = ws.d[nd];
    if (dd < cap) {
      if (t < (1 - P.eps) * dd - tol) violate("theta >= (1-eps) d", nd, t, (1 - P.eps) * dd);
      if (t > (1 + P.eps) * dd + tol) violate("theta <= (1+eps) d", nd, t, (1 + P.eps) * dd);
    }
    if (t > P.r0 && std::abs(ws.rho[nd] - 1) > tol) violate("rho = 1 beyond r0", nd, ws.rho[nd], 1);
    if (t < P.r1 && std::abs(ws.rho[nd] - std::pow(t, P.N)) > tol * std::pow(t, P.N))
      violate("rho = theta^N below r1", nd, ws.rho[nd], std::pow(t, P.N));
    if (t < cap && std::abs(ws.phi[nd] - 0.5 * t) > tol) violate("phi = theta/2", nd, ws.phi[nd], 0.5 * t);
    const bool boundary_prime = grid.role[nd] == NodeRole::SigmaPrime || grid.role[nd] == NodeRole::Gamma;
    if (!boundary_prime && !(ws.phi[nd] > 0 && ws.phi[nd] < 1)) violate("0 < phi < 1", nd, ws.phi[nd], 1);

    if (t > 2 * h && t < P.r0) {
      const double g1 = ws.grad_theta.row(nd).norm();
      const double c1 = std::max(g1, 1.0 / g1);
      const double c2 = t * ws.hess_theta[nd].topLeftCorner(n, n).norm();
      ws.C1 = std::max(ws.C1, c1);
      ws.C2 = std::max(ws.C2, c2);
      if (c1 > 2.0) violate("C1^-1 <= |D theta| <= C1, C1 = 2", nd, c1, 2.0);
      if (c2 > 50.0) violate("theta |D^2 theta| <= C2, C2 = 50", nd, c2, 50.0);
    }
    if (t > 0) {
      // |φ^k ρ^{-1} D^k ρ| for k = 1, 2
      const double rt = rho_tilde(t, P.r0, P.r1);
      const double r1d = rho_tilde_d1(t, P.r0, P.r1) / rt;
      const double r2d = rho_tilde_d2(t, P.r0, P.r1) / rt;
      Eigen::VectorXd gt = ws.grad_theta.row(nd).transpose();
      Eigen::MatrixXd ht = ws.hess_theta[nd].topLeftCorner(n, n);
      const double phi = ws.phi[nd];
      const double k1 = phi * P.N * r1d * gt.norm();
      Eigen::MatrixXd d2 = P.N * (P.N - 1) * r1d * r1d * gt * gt.transpose() +
                           P.N * (r2d * gt * gt.transpose() + r1d * ht);
      const double k2 = phi * phi * d2.norm();
      ws.C_rho = std::max({ws.C_rho, k1, k2});
    }
  }
  if (ws.C_rho > 1e3) violate("|phi^k rho^-1 D^k rho| <= 1e3", -1, ws.C_rho, 1e3);

  if (!ws.violations.empty() && !allow_violations) {
    std::ostringstream os;
    os << "weight construction failed (" << ws.violations.size() << " violations)";
    int shown = 0;
    for (const auto& v : ws.violations) {
      if (shown++ == 5) break;
      os << "; " << v.check << ": value " << v.value << " bound " << v.bound;
      if (v.node >= 0) {
        Eigen::Vector3d x = grid.coords(v.node);
        os << " at (" << x[0] << ", " << x[1];
        if (n == 3) os << ", " << x[2];
        os << ")";
      }
    }
    os << ". Try a smaller epsilon or a larger r0.";
    throw WeightError(os.str());
  }
  return ws;
}

double norm_L2_rho(const WeightSystem& ws, const Vec& u) {
  return std::sqrt(ws.grid.volume_weight.dot(ws.rho.cwiseProduct(u.cwiseAbs2())));
}

double norm_L2_rho_inv(const WeightSystem& ws, const Vec& u) {
  double s = 0;
  for (int nd = 0; nd < u.size(); ++nd)
    if (!ws.pinned[nd]) s += ws.grid.volume_weight[nd] * u[nd] * u[nd] / ws.rho[nd];
  return std::sqrt(s);
}

double norm_Hk_rho(const WeightSystem& ws, const Vec& u, int k) {
  if (k < 0 || k > 2) throw std::invalid_argument("norm_Hk_rho: k must be 0, 1 or 2");
  const int n = ws.grid.dim;
  Vec dens = u.cwiseAbs2();
  if (k >= 1)
    for (int a = 0; a < n; ++a) dens += (ws.ops.d1[a] * u).cwiseAbs2();
  if (k >= 2)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) dens += (ws.ops.d2[a][b] * u).cwiseAbs2();
  return std::sqrt(ws.grid.volume_weight.dot(ws.rho.cwiseProduct(dens)));
}

double weighted_sup(const WeightSystem& ws, const Vec& u, double r, double s) {
  const int n = ws.grid.dim;
  Vec g2 = Vec::Zero(u.size()), h2 = Vec::Zero(u.size());
  for (int a = 0; a < n; ++a) g2 += (ws.ops.d1[a] * u).cwiseAbs2();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) h2 += (ws.ops.d2[a][b] * u).cwiseAbs2();
  double best = 0;
  for (int nd = 0; nd < u.size(); ++nd) {
    if (ws.pinned[nd]) continue;
    const double phi = ws.phi[nd];
    const double v = std::abs(u[nd]) + phi * std::sqrt(g2[nd]) + phi * phi * std::sqrt(h2[nd]);
    best = std::max(best, std::pow(phi, r) * std::pow(ws.rho[nd], s) * v);
  }
  return best;
}

double hardy_ratio(const WeightSystem& ws, const Vec& u) {
  const int N = ws.grid.num_nodes();
  double num = 0;
  Vec v(N);
  for (int nd = 0; nd < N; ++nd) {
    v[nd] = u[nd] * std::sqrt(ws.rho[nd]);
    if (ws.theta[nd] > 0) num += ws.grid.volume_weight[nd] * u[nd] * u[nd] * ws.rho[nd] / (ws.theta[nd] * ws.theta[nd]);
  }
  Vec dens = v.cwiseAbs2();
  for (int a = 0; a < ws.grid.dim; ++a) dens += (ws.ops.d1[a] * v).cwiseAbs2();
  const double den = ws.grid.volume_weight.dot(dens);
  if (!(den > 0)) throw WeightError("hardy ratio undefined: zero denominator");
  return num / den;
}

std::vector<Vec> hardy_corner_family(const DomainGrid& grid, int max_members) {
  // (t(1-t))^3 across the box, (1-t^2)^3 away from Σ: C² and resolvable on a few cells.
  auto across = [](double t) { return t <= 0 || t >= 1 ? 0.0 : std::pow(t * (1 - t), 3); };
  auto away = [](double t) { return std::abs(t) >= 1 ? 0.0 : std::pow(1 - t * t, 3); };
  const int k_axis = grid.sigma.axis;
  const int x_axis = k_axis == 0 ? 1 : 0;
  const double L = grid.extents[x_axis];
  const double h = grid.h_min();
  const double face = grid.sigma.side == 0 ? 0.0 : grid.extents[k_axis];
  std::vector<Vec> out;
  for (int k = 0; k < max_members; ++k) {
    const double s = 0.14 * L / std::pow(1.25, k);
    const double delta = 0.5 * s / std::pow(1.25, k);
    if (s < 3 * h) break;
    out.push_back(sample(grid, [&](const Eigen::Vector3d& x) {
      double v = across((x[x_axis] - delta) / s) * away((x[k_axis] - face) / s);
      for (int a = 0; a < grid.dim; ++a)
        if (a != x_axis && a != k_axis) v *= away((x[a] - 0.5 * grid.extents[a]) / s);
      return v;
    }));
  }
  return out;
}

}  // namespace deform
