#include "deform/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace deform {

double DomainGrid::h_min() const {
  double m = h[0];
  for (int a = 1; a < dim; ++a) m = std::min(m, h[a]);
  return m;
}

bool DomainGrid::on_sigma_face(int nd) const {
  auto ix = index(nd);
  return ix[sigma.axis] == (sigma.side == 0 ? 0 : n[sigma.axis] - 1);
}

int DomainGrid::inward(int nd, int layers) const {
  auto ix = index(nd);
  ix[sigma.axis] += (sigma.side == 0 ? layers : -layers);
  return node(ix[0], ix[1], ix[2]);
}

std::string role_name(NodeRole r) {
  switch (r) {
    case NodeRole::Interior: return "interior";
    case NodeRole::Sigma: return "sigma";
    case NodeRole::SigmaPrime: return "sigma_prime";
    case NodeRole::Gamma: return "gamma";
  }
  return "?";
}

DomainGrid build_grid(int dim, const std::array<double, 3>& extents, int resolution,
                      SigmaSpec sigma, double r0) {
  if (dim != 2 && dim != 3) throw ConfigError("dim must be 2 or 3");
  if (resolution < 9) throw ConfigError("resolution must be >= 9 nodes per axis");
  if (sigma.axis < 0) sigma.axis = dim - 1;
  if (sigma.axis >= dim || (sigma.side != 0 && sigma.side != 1))
    throw ConfigError("sigma face out of range");

  DomainGrid g;
  g.dim = dim;
  g.resolution = resolution;
  g.sigma = sigma;
  for (int a = 0; a < dim; ++a) {
    if (!(extents[a] > 0)) throw ConfigError("extents must be positive");
    g.extents[a] = extents[a];
    g.n[a] = resolution;
    g.h[a] = extents[a] / (resolution - 1);
  }
  if (r0 > 0) {
    double hmax = *std::max_element(g.h.begin(), g.h.begin() + dim);
    if (r0 < 4 * hmax) {
      std::ostringstream os;
      os << "weight collar does not fit the grid: need r0 >= 4h (r0 = " << r0
         << ", 4h = " << 4 * hmax << ")";
      throw ConfigError(os.str());
    }
  }

  const int N = g.num_nodes();
  g.role.assign(N, NodeRole::Interior);
  g.volume_weight.resize(N);
  g.surface_weight = Vec::Zero(N);
  const int k = sigma.axis;
  const int face_index = sigma.side == 0 ? 0 : g.n[k] - 1;

  for (int nd = 0; nd < N; ++nd) {
    auto ix = g.index(nd);
    bool boundary = false;
    bool rim = false;  // on the boundary of some axis other than k
    double w = 1.0;
    double ws = 1.0;
    for (int a = 0; a < dim; ++a) {
      bool end = ix[a] == 0 || ix[a] == g.n[a] - 1;
      boundary = boundary || end;
      w *= end ? 0.5 * g.h[a] : g.h[a];
      if (a != k) {
        rim = rim || end;
        ws *= end ? 0.5 * g.h[a] : g.h[a];
      }
    }
    g.volume_weight[nd] = w;
    if (!boundary) continue;
    if (ix[k] == face_index) {
      g.surface_weight[nd] = ws;
      if (rim) {
        g.role[nd] = NodeRole::Gamma;
        g.gamma_nodes.push_back(nd);
      } else {
        g.role[nd] = NodeRole::Sigma;
        g.sigma_nodes.push_back(nd);
      }
    } else {
      g.role[nd] = NodeRole::SigmaPrime;
    }
  }
  return g;
}

Stencil1D StencilSet::first(int i) const {
  Stencil1D s;
  s.size = 3;
  const double c = 1.0 / (2.0 * h);
  if ((i == 0 || i == n - 1) && sbp) {
    s.size = 2;
    s.offset = {0, i == 0 ? 1 : -1, 0, 0};
    s.weight = {i == 0 ? -2 * c : 2 * c, i == 0 ? 2 * c : -2 * c, 0, 0};
  } else if (i == 0) {
    s.offset = {0, 1, 2, 0};
    s.weight = {-3 * c, 4 * c, -c, 0};
  } else if (i == n - 1) {
    s.offset = {0, -1, -2, 0};
    s.weight = {3 * c, -4 * c, c, 0};
  } else {
    s.offset = {-1, 1, 0, 0};
    s.weight = {-c, c, 0, 0};
    s.size = 2;
  }
  return s;
}

Stencil1D StencilSet::second(int i) const {
  Stencil1D s;
  const double c = 1.0 / (h * h);
  if ((i == 0 || i == n - 1) && sbp) {
    int d = i == 0 ? 1 : -1;
    s.size = 3;
    s.offset = {0, d, 2 * d, 0};
    s.weight = {c, -2 * c, c, 0};
  } else if (i == 0 || i == n - 1) {
    int d = i == 0 ? 1 : -1;
    s.size = 4;
    s.offset = {0, d, 2 * d, 3 * d};
    s.weight = {2 * c, -5 * c, 4 * c, -c};
  } else {
    s.size = 3;
    s.offset = {-1, 0, 1, 0};
    s.weight = {c, -2 * c, c, 0};
  }
  return s;
}

namespace {

SpMat axis_matrix(const DomainGrid& grid, int a, bool second, bool sbp = false) {
  StencilSet st{grid.n[a], grid.h[a], sbp};
  const int N = grid.num_nodes();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(N) * 4);
  for (int nd = 0; nd < N; ++nd) {
    auto ix = grid.index(nd);
    Stencil1D s = second ? st.second(ix[a]) : st.first(ix[a]);
    for (int q = 0; q < s.size; ++q) {
      auto jx = ix;
      jx[a] += s.offset[q];
      trip.emplace_back(nd, grid.node(jx[0], jx[1], jx[2]), s.weight[q]);
    }
  }
  SpMat m(N, N);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

}  // namespace

DiffOps build_diff_ops(const DomainGrid& grid, bool sbp) {
  DiffOps ops;
  ops.dim = grid.dim;
  for (int a = 0; a < grid.dim; ++a) ops.d1[a] = axis_matrix(grid, a, false, sbp);
  for (int a = 0; a < grid.dim; ++a) {
    ops.d2[a][a] = axis_matrix(grid, a, true, sbp);
    for (int b = 0; b < a; ++b) {
      ops.d2[a][b] = ops.d1[a] * ops.d1[b];
      ops.d2[b][a] = ops.d2[a][b];
    }
  }
  return ops;
}

Mat sigma_prime_face_distances(const DomainGrid& grid) {
  const int N = grid.num_nodes();
  const int faces = 2 * grid.dim - 1;
  Mat d(N, faces);
  for (int nd = 0; nd < N; ++nd) {
    Eigen::Vector3d x = grid.coords(nd);
    int f = 0;
    for (int a = 0; a < grid.dim; ++a) {
      for (int side = 0; side < 2; ++side) {
        if (a == grid.sigma.axis && side == grid.sigma.side) continue;
        d(nd, f++) = side == 0 ? x[a] : grid.extents[a] - x[a];
      }
    }
  }
  return d.cwiseMax(0.0);
}

std::vector<Eigen::Vector3d> sigma_prime_face_normals(const DomainGrid& grid) {
  std::vector<Eigen::Vector3d> out;
  for (int a = 0; a < grid.dim; ++a) {
    for (int side = 0; side < 2; ++side) {
      if (a == grid.sigma.axis && side == grid.sigma.side) continue;
      Eigen::Vector3d v = Eigen::Vector3d::Zero();
      v[a] = side == 0 ? 1.0 : -1.0;
      out.push_back(v);
    }
  }
  return out;
}

Vec euclidean_distance_to_sigma_prime(const DomainGrid& grid) {
  return sigma_prime_face_distances(grid).rowwise().minCoeff();
}

}  // namespace deform
