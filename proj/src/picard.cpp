#include "deform/picard.hpp"

#include "deform/curvature.hpp"
#include "deform/fields.hpp"

#include <cmath>
#include <limits>

namespace deform {

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::ZeroData: return "zero_data";
    case Termination::Floor: return "discretization_floor";
    case Termination::MaxIter: return "max_iter";
    case Termination::SpdLoss: return "spd_loss";
    case Termination::Divergence: return "divergence";
    default: return "none";
  }
}

ResidualNorms residual_norms(const LinearizedSystem& sys, const Vec& dR, const Vec& dH) {
  ResidualNorms r;
  const double half_n = 0.5 * sys.geo.dim();
  for (int nd : sys.z_nodes) {
    const double rho = sys.ws.rho[nd];
    r.R_L2 += sys.M[nd] * dR[nd] * dR[nd] / rho;
    r.R_sup = std::max(r.R_sup, std::pow(sys.ws.phi[nd], half_n) / std::sqrt(rho) * std::abs(dR[nd]));
  }
  for (int nd : sys.b_nodes) {
    r.H_L2 += sys.M_sigma[nd] * sys.ws.rho[nd] * dH[nd] * dH[nd];
    r.H_sup = std::max(r.H_sup, std::abs(dH[nd]));
  }
  r.R_L2 = std::sqrt(r.R_L2);
  r.H_L2 = std::sqrt(r.H_L2);
  return r;
}

IterationState picard_run(LinearizedSystem& sys, const MetricField& g0, const Vec& R_target, const Vec& H_target,
                          const PicardParams& params, const StepCallback& on_step) {
  const DomainGrid& grid = sys.geo.grid;
  const int N = grid.num_nodes();
  const auto mask = support_mask(grid);
  const double h = grid.h_min();

  IterationState st;
  st.g = g0;
  st.g.provenance = Provenance::Iterate;
  st.a = SymTensorField::zeros(grid.dim, N);
  st.allowance = params.tol + params.floor_factor * h * h;

  auto residual = [&](const SymTensorField& g, Vec& dR, Vec& dH) {
    CurvatureData cv = curvature(grid, sys.geo.ops, g);
    dR = R_target - cv.scalar;
    dH = Vec::Zero(N);
    for (int s : grid.sigma_nodes) dH[s] = H_target[s] - cv.H[s];
    return residual_norms(sys, dR, dH);
  };

  Vec dR, dH;
  ResidualNorms prev;
  for (int j = 0;; ++j) {
    st.step = j;
    ResidualNorms res = residual(st.g, dR, dH);
    st.final_residual = res;
    if (j == 0) {
      if (res.sup_total() > params.eps_max)
        throw ConfigError("initial residual " + std::to_string(res.sup_total()) + " exceeds eps_max " +
                          std::to_string(params.eps_max));
      if (res.total() == 0 && res.sup_total() == 0) {
        st.reason = Termination::ZeroData;
        return st;
      }
    }
    if (res.total() <= st.allowance && res.sup_total() <= st.allowance) {
      st.reason = Termination::Converged;
      return st;
    }
    if (j > 0 && res.total() > prev.total()) {
      const double floor = params.floor_factor * h * h;
      if (prev.total() <= params.tol + floor && floor > 0) {
        st.reason = Termination::Floor;
        st.message = "residual stalled at the discretization floor";
        return st;
      }
      st.reason = Termination::Divergence;
      st.message = "residual grew from " + std::to_string(prev.total()) + " to " + std::to_string(res.total()) +
                   " at step " + std::to_string(j);
      throw DivergenceError(st.message, st);
    }
    if (j == params.max_iter) {
      st.reason = Termination::MaxIter;
      return st;
    }
    prev = res;

    StepRecord rec;
    rec.step = j;
    rec.residual = res;
    SolveReport rep;
    SymTensorField a = solve_linearized_collocated(sys, dR, 2.0 * dH, &rep);
    rec.solve_interior = rep.interior_residual;
    rec.solve_boundary = rep.boundary_residual;
    for (int nd = 0; nd < N; ++nd) {
      const double m = a.comp.row(nd).cwiseAbs().maxCoeff();
      if (!mask[nd]) {
        rec.leak = std::max(rec.leak, m);
        a.comp.row(nd).setZero();
      }
      rec.a_sup = std::max(rec.a_sup, m);
    }
    a.support = mask;
    MetricField next(st.g + a, Provenance::Iterate);
    rec.min_eig = min_eigenvalue(next);
    st.history.push_back(rec);
    if (!(rec.min_eig > 0)) {
      st.reason = Termination::SpdLoss;
      st.message = "step " + std::to_string(j) + " rejected: metric loses positive definiteness";
      return st;
    }
    st.g = std::move(next);
    st.a = std::move(a);
    if (on_step) on_step(j, st.g, st.a);
  }
}

ContractionFit contraction_fit(const std::vector<double>& r) {
  ContractionFit fit;
  if (r.size() < 3) {
    fit.note = "insufficient data: fewer than 3 steps";
    return fit;
  }
  for (size_t j = 1; j < r.size(); ++j)
    if (!(r[j] < r[j - 1]) || !(r[j] > 0)) {
      fit.note = "insufficient data: residuals not strictly decreasing";
      return fit;
    }
  // log r_j = L + j (δ L)
  const int m = static_cast<int>(r.size());
  Mat X(m, 2);
  Vec y(m);
  for (int j = 0; j < m; ++j) {
    X(j, 0) = 1;
    X(j, 1) = j;
    y[j] = std::log(r[j]);
  }
  Vec c = X.colPivHouseholderQr().solve(y);
  fit.sufficient = true;
  fit.log_eps = c[0];
  fit.delta = c[1] / c[0];
  fit.fit_residual = (X * c - y).norm();
  for (int j = 0; j < m; ++j)
    fit.table.push_back({j, r[j], std::exp((1 + j * fit.delta) * fit.log_eps)});
  return fit;
}

ContractionFit contraction_fit(const IterationState& state) {
  std::vector<double> r;
  for (const StepRecord& s : state.history) r.push_back(s.residual.total());
  r.push_back(state.final_residual.total());
  return contraction_fit(r);
}

}  // namespace deform
