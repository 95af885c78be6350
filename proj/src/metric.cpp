#include "deform/fields.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace deform {

double smooth_bump(const Eigen::Vector3d& x, const Eigen::Vector3d& c, double radius, int dim) {
  double r2 = (x - c).head(dim).squaredNorm() / (radius * radius);
  if (r2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - r2));
}

double gaussian(const Eigen::Vector3d& x, const Eigen::Vector3d& c, double s, int dim) {
  return std::exp(-(x - c).head(dim).squaredNorm() / (2 * s * s));
}

MetricField flat_metric(const DomainGrid& grid) {
  SymTensorField g = SymTensorField::zeros(grid.dim, grid.num_nodes());
  for (int i = 0; i < grid.dim; ++i) g.comp.col(comp_index(i, i, grid.dim)).setOnes();
  return MetricField(std::move(g));
}

MetricField conformal_metric(const DomainGrid& grid, const Vec& w) {
  SymTensorField g = SymTensorField::zeros(grid.dim, grid.num_nodes());
  Vec f = (2.0 * w).array().exp();
  for (int i = 0; i < grid.dim; ++i) g.comp.col(comp_index(i, i, grid.dim)) = f;
  return MetricField(std::move(g));
}

MetricField make_metric(const DomainGrid& grid, const MetricSpec& spec) {
  Eigen::Vector3d c(spec.center[0], spec.center[1], spec.center[2]);
  if (spec.kind == "flat") return flat_metric(grid);
  if (spec.kind == "conformal_bump") {
    Vec w = sample(grid, [&](const Eigen::Vector3d& x) {
      return spec.amplitude * gaussian(x, c, spec.width, grid.dim);
    });
    return conformal_metric(grid, w);
  }
  if (spec.kind == "round_sphere") {
    // Unit round sphere in stereographic coordinates centred at c.
    Vec w = sample(grid, [&](const Eigen::Vector3d& x) {
      return std::log(2.0 / (1.0 + (x - c).head(grid.dim).squaredNorm()));
    });
    return conformal_metric(grid, w);
  }
  if (spec.kind == "file") return MetricField(read_tensor_csv(spec.path, grid));
  throw ConfigError("unknown metric kind '" + spec.kind + "'");
}

std::vector<std::uint8_t> support_mask(const DomainGrid& grid) {
  std::vector<std::uint8_t> m(grid.num_nodes(), 0);
  for (int nd = 0; nd < grid.num_nodes(); ++nd)
    m[nd] = grid.role[nd] == NodeRole::Interior || grid.role[nd] == NodeRole::Sigma;
  return m;
}

double min_eigenvalue(const SymTensorField& g, int* node) {
  double best = std::numeric_limits<double>::infinity();
  for (int nd = 0; nd < g.num_nodes(); ++nd) {
    Eigen::MatrixXd s = g.at(nd).topLeftCorner(g.dim, g.dim);
    double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s, Eigen::EigenvaluesOnly)
                    .eigenvalues()[0];
    if (lo < best) {
      best = lo;
      if (node) *node = nd;
    }
  }
  return best;
}

namespace {

void write_coords(std::ostream& os, const DomainGrid& grid, int nd) {
  Eigen::Vector3d x = grid.coords(nd);
  for (int a = 0; a < grid.dim; ++a) os << x[a] << ',';
}

std::string coord_header(const DomainGrid& grid) {
  static const char* names[] = {"x", "y", "z"};
  std::string s = "#";
  for (int a = 0; a < grid.dim; ++a) s += std::string(names[a]) + ",";
  return s;
}

}  // namespace

void write_scalar_csv(const std::string& path, const DomainGrid& grid, const Vec& v) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << coord_header(grid) << "value\n" << std::setprecision(17);
  for (int nd = 0; nd < grid.num_nodes(); ++nd) {
    write_coords(os, grid, nd);
    os << v[nd] << '\n';
  }
}

void write_tensor_csv(const std::string& path, const DomainGrid& grid, const SymTensorField& t) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << coord_header(grid);
  for (int i = 0; i < grid.dim; ++i)
    for (int j = i; j < grid.dim; ++j)
      os << 'g' << i + 1 << j + 1 << (i == grid.dim - 1 && j == grid.dim - 1 ? "\n" : ",");
  os << std::setprecision(17);
  for (int nd = 0; nd < grid.num_nodes(); ++nd) {
    write_coords(os, grid, nd);
    for (int p = 0; p < t.comp.cols(); ++p) os << t.comp(nd, p) << (p + 1 < t.comp.cols() ? "," : "\n");
  }
}

SymTensorField read_tensor_csv(const std::string& path, const DomainGrid& grid) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read metric file " + path);
  SymTensorField t = SymTensorField::zeros(grid.dim, grid.num_nodes());
  const int nc = num_components(grid.dim);
  std::string line;
  int nd = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (nd >= grid.num_nodes()) throw ConfigError("metric file has more rows than grid nodes");
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != grid.dim + nc)
      throw ConfigError("metric file row has wrong column count");
    Eigen::Vector3d x = grid.coords(nd);
    for (int a = 0; a < grid.dim; ++a)
      if (std::abs(vals[a] - x[a]) > 1e-9) throw ConfigError("metric file node coordinates do not match grid");
    for (int p = 0; p < nc; ++p) t.comp(nd, p) = vals[grid.dim + p];
    ++nd;
  }
  if (nd != grid.num_nodes()) throw ConfigError("metric file has fewer rows than grid nodes");
  return t;
}

}  // namespace deform
