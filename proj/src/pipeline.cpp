#include "deform/pipeline.hpp"

#include "deform/checks.hpp"
#include "deform/curvature.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace deform {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json jnum(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json jvec(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(jnum(v[i]));
  return a;
}

json config_json(const RunConfig& c) {
  const size_t n = static_cast<size_t>(c.dim);
  auto arr = [n](const std::array<double, 3>& a) { return std::vector<double>(a.begin(), a.begin() + n); };
  json j;
  j["domain"] = {{"dim", c.dim},
                 {"extents", arr(c.extents)},
                 {"resolution", c.resolution},
                 {"sigma", c.sigma_face.empty() ? std::string(1, static_cast<char>('x' + c.dim - 1)) + "-" : c.sigma_face},
                 {"scan_resolutions", scan_resolutions(c)}};
  j["metric"] = {{"kind", c.metric.kind},
                 {"amplitude", c.metric.amplitude},
                 {"center", arr(c.metric.center)},
                 {"width", c.metric.width},
                 {"path", c.metric.path}};
  j["weights"] = {{"epsilon", c.weights.eps},
                  {"r0", c.weights.r0},
                  {"r1", c.weights.r1},
                  {"N", c.weights.N},
                  {"smooth_min_power", c.weights.smooth_min_power}};
  auto bump = [&](const BumpSpec& b) {
    return json{{"amplitude", b.amplitude}, {"center", arr(b.center)}, {"width", b.width}};
  };
  j["targets"] = {{"kind", c.targets.kind}, {"dR", bump(c.targets.dR)}, {"dH", bump(c.targets.dH)}};
  j["solver"] = {{"theta_cut_factor", c.weights.theta_cut_factor},
                 {"svd_tol", c.solver.svd_tol},
                 {"max_candidates", c.solver.max_candidates},
                 {"cg_tol", c.solver.cg_tol},
                 {"force_cg", c.solver.force_cg}};
  j["iteration"] = {{"tol", c.iteration.tol},
                    {"max_iter", c.iteration.max_iter},
                    {"eps_max", c.iteration.eps_max},
                    {"floor_factor", c.iteration.floor_factor}};
  j["output"] = {{"directory", c.output.directory}, {"per_step_dumps", c.output.per_step_dumps}, {"seed", c.output.seed}};
  return j;
}

json kernel_json(const KernelReport& r, const StaticReport* st) {
  json j;
  j["verdict"] = verdict_name(r.verdict);
  j["kernel_dim"] = r.kernel_dim;
  j["kernel_orders"] = json::array();
  for (double o : r.kernel_orders) j["kernel_orders"].push_back(jnum(o));
  j["gap_spread"] = jnum(r.gap_spread);
  j["note"] = r.note;
  j["levels"] = json::array();
  for (const KernelLevel& l : r.levels)
    j["levels"].push_back({{"resolution", l.resolution}, {"h", l.h}, {"converged", l.converged}, {"sigma", jvec(l.sigma)}});
  if (st) {
    json s;
    s["applicable"] = st->applicable;
    s["checks"] = json::array();
    for (const StaticCheck& c : st->checks)
      s["checks"].push_back({{"name", c.name},
                             {"deviation", jnum(c.deviation)},
                             {"tolerance", jnum(c.tolerance)},
                             {"pass", c.pass},
                             {"vacuous", c.vacuous}});
    j["static_properties"] = s;
  }
  return j;
}

json residual_json(const ResidualNorms& r) {
  return {{"R_L2", r.R_L2}, {"H_L2", r.H_L2}, {"R_sup", r.R_sup}, {"H_sup", r.H_sup}};
}

json solve_json(const SolveReport& r) {
  return {{"method", r.method},
          {"interior_residual", jnum(r.interior_residual)},
          {"boundary_residual", jnum(r.boundary_residual)},
          {"interior_residual_sup", jnum(r.interior_residual_sup)},
          {"boundary_residual_sup", jnum(r.boundary_residual_sup)},
          {"sigma_min", jnum(r.sigma_min)},
          {"sigma_max", jnum(r.sigma_max)},
          {"defect_dim", r.defect_dim},
          {"stability_constant", jnum(r.stability_constant)},
          {"flagged", r.flagged}};
}

json iteration_json(const IterationState& st) {
  json j;
  j["reason"] = termination_name(st.reason);
  j["message"] = st.message;
  j["steps"] = st.history.size();
  j["allowance"] = st.allowance;
  j["history"] = json::array();
  for (const StepRecord& r : st.history)
    j["history"].push_back({{"step", r.step},
                            {"residual", residual_json(r.residual)},
                            {"a_sup", r.a_sup},
                            {"leak_outside_support", r.leak},
                            {"min_eigenvalue", r.min_eig},
                            {"solve_interior_residual", r.solve_interior},
                            {"solve_boundary_residual", r.solve_boundary}});
  j["final_residual"] = residual_json(st.final_residual);
  ContractionFit fit = contraction_fit(st);
  json f;
  f["sufficient"] = fit.sufficient;
  f["note"] = fit.note;
  if (fit.sufficient) {
    f["delta_hat"] = fit.delta;
    f["log_eps"] = fit.log_eps;
    f["fit_residual"] = fit.fit_residual;
    f["table"] = json::array();
    for (const LadderRow& r : fit.table)
      f["table"].push_back({{"step", r.step}, {"residual", r.residual}, {"predicted", r.predicted}});
  }
  j["contraction_fit"] = f;
  return j;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  os << j.dump(2) << "\n";
}

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec sigma_values(const DomainGrid& grid, const Vec& v) {
  Vec out = Vec::Zero(grid.num_nodes());
  for (int s : grid.sigma_nodes) out[s] = v[s];
  return out;
}

}  // namespace

std::vector<int> scan_resolutions(const RunConfig& cfg) {
  if (!cfg.scan_resolutions.empty()) return cfg.scan_resolutions;
  const int m = cfg.resolution - 1;
  if (cfg.metric.kind == "file") {
    if (m % 2 != 0) throw ConfigError("domain.resolution must be odd for a file metric (injection coarsening)");
    return {m / 2 + 1, cfg.resolution};
  }
  if (cfg.dim == 3) return {cfg.resolution, cfg.resolution + m / 2};
  return {cfg.resolution, cfg.resolution + m / 2, 2 * m + 1};
}

MetricProvider metric_provider(const RunConfig& cfg) {
  if (cfg.metric.kind != "file")
    return [spec = cfg.metric](const DomainGrid& g) -> SymTensorField { return make_metric(g, spec); };
  DomainGrid fine = build_grid(cfg.dim, cfg.extents, cfg.resolution, cfg.sigma());
  auto data = std::make_shared<SymTensorField>(read_tensor_csv(cfg.metric.path, fine));
  return [fine, data](const DomainGrid& g) -> SymTensorField {
    if ((fine.resolution - 1) % (g.resolution - 1) != 0)
      throw ConfigError("file metric at resolution " + std::to_string(fine.resolution) +
                        " cannot be injected onto resolution " + std::to_string(g.resolution));
    const int k = (fine.resolution - 1) / (g.resolution - 1);
    SymTensorField out = SymTensorField::zeros(g.dim, g.num_nodes());
    for (int nd = 0; nd < g.num_nodes(); ++nd) {
      auto ix = g.index(nd);
      out.comp.row(nd) = data->comp.row(fine.node(k * ix[0], k * ix[1], k * ix[2]));
    }
    return out;
  };
}

Targets make_targets(const RunConfig& cfg, const DomainGrid& grid, const WeightSystem& ws, const SymTensorField& g0) {
  const int n = grid.dim;
  CurvatureData c0 = curvature(grid, g0);
  Targets t{c0.scalar, sigma_values(grid, c0.H)};
  const TargetSpec& ts = cfg.targets;
  auto center = [&](const BumpSpec& b) { return Eigen::Vector3d(b.center[0], b.center[1], b.center[2]); };
  if (ts.kind == "bumps") {
    const auto mask = support_mask(grid);
    Vec dR = sample(grid, [&](const Eigen::Vector3d& x) { return smooth_bump(x, center(ts.dR), ts.dR.width, n); });
    Vec dH = sample(grid, [&](const Eigen::Vector3d& x) { return smooth_bump(x, center(ts.dH), ts.dH.width, n); });
    for (int nd = 0; nd < grid.num_nodes(); ++nd)
      if (mask[nd]) t.R[nd] += ts.dR.amplitude * dR[nd];
    for (int s : grid.sigma_nodes) t.H[s] += ts.dH.amplitude * dH[s];
  } else if (ts.kind == "manufactured") {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    m(0, 0) = 1;
    m(0, 1) = m(1, 0) = 0.3;
    m(1, 1) = 0.5;
    if (n == 3) {
      m(2, 2) = 0.7;
      m(0, 2) = m(2, 0) = 0.1;
    }
    SymTensorField a = SymTensorField::zeros(n, grid.num_nodes());
    for (int nd = 0; nd < grid.num_nodes(); ++nd)
      a.set(nd, ts.dR.amplitude * ws.rho[nd] * smooth_bump(grid.coords(nd), center(ts.dR), ts.dR.width, n) * m);
    CurvatureData c1 = curvature(grid, g0 + a);
    t.R = c1.scalar;
    t.H = sigma_values(grid, c1.H);
  }
  return t;
}

RunOutcome run(const std::string& config_path, const RunOptions& opts) {
  RunConfig cfg;
  try {
    cfg = parse_config_file(config_path);
  } catch (const ConfigError& e) {
    RunOutcome out{kExitConfig, "config_error", ""};
    fs::path dir = opts.out_dir.empty() ? fs::path(OutputSpec{}.directory) : fs::path(opts.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!ec) {
      json s;
      s["schema"] = 1;
      s["status"] = {{"exit_code", kExitConfig}, {"reason", "config_error"}, {"message", e.what()}};
      write_json(dir / "summary.json", s);
      out.summary_path = (dir / "summary.json").string();
    }
    std::cerr << "configuration error: " << e.what() << "\n";
    return out;
  }
  return run(cfg, opts);
}

RunOutcome run(const RunConfig& cfg_in, const RunOptions& opts) {
  auto t_start = std::chrono::steady_clock::now();
  RunConfig cfg = cfg_in;
  if (!opts.out_dir.empty()) cfg.output.directory = opts.out_dir;
  if (opts.resolution > 0) cfg.resolution = opts.resolution;

  const fs::path dir = cfg.output.directory;
  const fs::path fields = dir / "fields";
  fs::create_directories(fields);
  RunOutcome out;
  out.summary_path = (dir / "summary.json").string();

  json s;
  s["schema"] = 1;
  s["status"] = json::object();
  json timing;
  auto finish = [&](int code, const std::string& reason, const std::string& message) {
    out.exit_code = code;
    out.reason = reason;
    s["status"] = {{"exit_code", code}, {"reason", reason}, {"message", message}};
    timing["total_seconds"] = seconds(t_start);
    s["timing"] = timing;
    write_json(out.summary_path, s);
    return out;
  };

  try {
    validate(cfg);
    s["config"] = config_json(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    DomainGrid grid = build_grid(cfg.dim, cfg.extents, cfg.resolution, cfg.sigma(), cfg.weights.r0);
    WeightSystem ws = build_weights(grid, cfg.weights);
    MetricProvider provider = metric_provider(cfg);
    MetricField g0(provider(grid));
    CurvatureData c0 = curvature(grid, g0);
    s["grid"] = {{"dim", grid.dim},
                 {"resolution", grid.resolution},
                 {"n", std::vector<int>(grid.n.begin(), grid.n.end())},
                 {"h", grid.h_min()},
                 {"num_nodes", grid.num_nodes()},
                 {"sigma_axis", grid.sigma.axis},
                 {"sigma_side", grid.sigma.side}};
    s["weights"] = {{"p", ws.p},
                    {"theta_cut", ws.theta_cut},
                    {"C1", ws.C1},
                    {"C2", ws.C2},
                    {"C_rho", ws.C_rho},
                    {"violations", ws.violations.size()}};
    write_scalar_csv((fields / "distance.csv").string(), grid, ws.d);
    write_scalar_csv((fields / "theta.csv").string(), grid, ws.theta);
    write_scalar_csv((fields / "rho.csv").string(), grid, ws.rho);
    write_scalar_csv((fields / "phi.csv").string(), grid, ws.phi);
    write_scalar_csv((fields / "R_initial.csv").string(), grid, c0.scalar);
    write_scalar_csv((fields / "H_initial.csv").string(), grid, sigma_values(grid, c0.H));
    write_tensor_csv((fields / "metric_initial.csv").string(), grid, g0);
    timing["setup_seconds"] = seconds(t0);

    // generic check
    const auto t1 = std::chrono::steady_clock::now();
    KernelScanParams kp;
    kp.seed = cfg.output.seed;
    KernelReport kr = kernel_scan(cfg.dim, cfg.extents, cfg.sigma(), provider, scan_resolutions(cfg), cfg.weights, kp);
    StaticReport st;
    if (kr.kernel_dim >= 1) st = check_static_properties(kr, provider(kr.grid));
    s["kernel"] = kernel_json(kr, kr.kernel_dim >= 1 ? &st : nullptr);
    for (size_t b = 0; b < kr.basis.size(); ++b)
      write_scalar_csv((fields / ("kernel_basis_" + std::to_string(b) + ".csv")).string(), kr.grid, kr.basis[b]);
    timing["kernel_scan_seconds"] = seconds(t1);
    if (kr.verdict == KernelVerdict::NonGeneric)
      return finish(kExitNonGeneric, "non_generic",
                    "base metric has a " + std::to_string(kr.kernel_dim) + "-dimensional space of static potentials");
    if (kr.verdict == KernelVerdict::Indeterminate) return finish(kExitNonGeneric, "generic_check_indeterminate", kr.note);

    // linear system at g0
    const auto t2 = std::chrono::steady_clock::now();
    LinearizedSystem sys = assemble(grid, g0, ws, cfg.solver);
    build_boundary_operators(sys);
    PoincareConstants pc = poincare_constants(sys, kr.kernel_dim);
    s["solver"] = {{"interior_unknowns", sys.nz()},
                   {"sigma_unknowns", sys.nb()},
                   {"C0", sys.C0},
                   {"bhat_sigma_max", sys.nb() ? sys.sv[0] : 0.0},
                   {"bhat_sigma_min", sys.nb() ? sys.sv[sys.nb() - 1] : 0.0},
                   {"bhat_rank", sys.rank},
                   {"C_Lstar", jnum(pc.C_Lstar)},
                   {"C_Phi", jnum(pc.C_Phi)}};
    timing["assemble_seconds"] = seconds(t2);

    Targets tg = make_targets(cfg, grid, ws, g0);
    write_scalar_csv((fields / "R_target.csv").string(), grid, tg.R);
    write_scalar_csv((fields / "H_target.csv").string(), grid, tg.H);

    // the weak-form solve of the initial data, for its stability report
    const auto t3 = std::chrono::steady_clock::now();
    json solves = json::array();
    {
      Vec dR = tg.R - c0.scalar;
      Vec dH = tg.H - sigma_values(grid, c0.H);
      SolveReport rep;
      try {
        solve_linearized(sys, dR, 2.0 * dH, &rep);
        json r = solve_json(rep);
        r["stage"] = "weak_initial";
        solves.push_back(r);
      } catch (const DefectCompletionError& e) {
        solves.push_back({{"stage", "weak_initial"}, {"error", e.what()}});
      }
    }

    StepCallback dump;
    if (cfg.output.per_step_dumps)
      dump = [&](int j, const MetricField& g, const SymTensorField& a) {
        write_tensor_csv((fields / ("step_" + std::to_string(j) + "_metric.csv")).string(), grid, g);
        write_tensor_csv((fields / ("step_" + std::to_string(j) + "_a.csv")).string(), grid, a);
      };
    IterationState it;
    int code = kExitOk;
    std::string reason, message;
    try {
      it = picard_run(sys, g0, tg.R, tg.H, cfg.iteration, dump);
    } catch (const DivergenceError& e) {
      it = e.state;
    }
    timing["iteration_seconds"] = seconds(t3);
    s["solve_reports"] = solves;
    s["iteration"] = iteration_json(it);
    switch (it.reason) {
      case Termination::Converged:
      case Termination::ZeroData:
      case Termination::Floor: break;
      default: code = kExitDiverged;
    }
    reason = termination_name(it.reason);
    message = it.message;

    CurvatureData c1 = curvature(grid, it.g);
    double outside = 0;
    const auto mask = support_mask(grid);
    for (int nd = 0; nd < grid.num_nodes(); ++nd)
      if (!mask[nd]) outside = std::max(outside, (it.g.comp.row(nd) - g0.comp.row(nd)).cwiseAbs().maxCoeff());
    s["final"] = {{"max_metric_change_outside_support", outside}, {"min_eigenvalue", min_eigenvalue(it.g)}};
    write_scalar_csv((fields / "R_final.csv").string(), grid, c1.scalar);
    write_scalar_csv((fields / "H_final.csv").string(), grid, sigma_values(grid, c1.H));
    write_tensor_csv((fields / "metric_final.csv").string(), grid, it.g);
    write_tensor_csv((fields / "a_final.csv").string(), grid, it.a);
    write_tensor_csv((fields / "a_total.csv").string(), grid, it.g - g0);
    return finish(code, reason, message);
  } catch (const ConfigError& e) {
    return finish(kExitConfig, "config_error", e.what());
  } catch (const WeightError& e) {
    return finish(kExitConfig, "weight_violation", e.what());
  } catch (const DegenerateMetric& e) {
    return finish(kExitConfig, "degenerate_metric", e.what());
  } catch (const StencilError& e) {
    return finish(kExitConfig, "stencil_error", e.what());
  } catch (const AssemblyError& e) {
    return finish(kExitDiverged, "assembly_error", e.what());
  } catch (const NumericError& e) {
    return finish(kExitDiverged, "numeric_error", e.what());
  }
}

int verify(const std::string& suite, std::ostream& os, int resolution) {
  std::vector<CriterionResult> results = run_suite(suite, resolution);
  print_results(os, results);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.pass();
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------- plot data

namespace {

json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("missing run artifact " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + p.string() + ": " + e.what());
  }
}

// Last column of a field CSV, in node order.
std::vector<double> read_values(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("missing run artifact " + p.string());
  std::vector<double> v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    v.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  }
  return v;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  os.precision(17);
  return os;
}

}  // namespace

void export_plot_data(const std::string& run_dir) {
  const fs::path dir = run_dir;
  const fs::path plots = dir / "plots";
  json s = read_json(dir / "summary.json");
  if (!s.contains("grid")) throw IoError("summary.json in " + run_dir + " has no grid section (run failed early)");
  fs::create_directories(plots);

  if (s.contains("iteration")) {
    auto os = open_out(plots / "residual_vs_step.csv");
    os << "# step,R_L2,H_L2,R_sup,H_sup\n";
    int last = 0;
    for (const auto& r : s["iteration"]["history"]) {
      const auto& q = r["residual"];
      os << r["step"].get<int>() << ',' << q["R_L2"].get<double>() << ',' << q["H_L2"].get<double>() << ','
         << q["R_sup"].get<double>() << ',' << q["H_sup"].get<double>() << '\n';
      last = r["step"].get<int>() + 1;
    }
    const auto& q = s["iteration"]["final_residual"];
    os << last << ',' << q["R_L2"].get<double>() << ',' << q["H_L2"].get<double>() << ',' << q["R_sup"].get<double>()
       << ',' << q["H_sup"].get<double>() << '\n';
  }
  if (s.contains("kernel")) {
    auto os = open_out(plots / "sigma_spectrum.csv");
    os << "# resolution,h,index,sigma\n";
    for (const auto& l : s["kernel"]["levels"]) {
      int i = 0;
      for (const auto& v : l["sigma"])
        os << l["resolution"].get<int>() << ',' << l["h"].get<double>() << ',' << i++ << ','
           << (v.is_number() ? v.get<double>() : std::nan("")) << '\n';
    }
  }

  const auto& g = s["grid"];
  const int dim = g["dim"].get<int>();
  const auto n = g["n"].get<std::vector<int>>();
  const int k = g["sigma_axis"].get<int>();
  const int side = g["sigma_side"].get<int>();
  const double h = g["h"].get<double>();
  const auto theta = read_values(dir / "fields" / "theta.csv");
  const auto rho = read_values(dir / "fields" / "rho.csv");
  const auto d = read_values(dir / "fields" / "distance.csv");
  auto node = [&](std::array<int, 3> ix) { return ix[0] + n[0] * (ix[1] + n[1] * ix[2]); };
  const int t = k == 0 ? 1 : 0;  // first tangential axis
  std::array<int, 3> base{0, 0, 0};
  for (int a = 0; a < dim; ++a) base[a] = n[a] / 2;

  {
    auto os = open_out(plots / "theta_cross_section.csv");
    os << "# s,distance,theta,rho\n";
    for (int i = 0; i < n[k]; ++i) {
      std::array<int, 3> ix = base;
      ix[k] = side == 0 ? i : n[k] - 1 - i;
      const int nd = node(ix);
      os << i * h << ',' << d[nd] << ',' << theta[nd] << ',' << rho[nd] << '\n';
    }
  }
  {
    // diagonal from the corner of Σ at the low end of the first tangential axis
    auto os = open_out(plots / "theta_diagonal.csv");
    os << "# s,distance,theta,rho\n";
    for (int i = 0; i < std::min(n[k], n[t]); ++i) {
      std::array<int, 3> ix = base;
      ix[t] = i;
      ix[k] = side == 0 ? i : n[k] - 1 - i;
      const int nd = node(ix);
      os << i * h * std::sqrt(2.0) << ',' << d[nd] << ',' << theta[nd] << ',' << rho[nd] << '\n';
    }
  }
}

}  // namespace deform
