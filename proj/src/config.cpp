#include "deform/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace deform {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"domain", {"dim", "extents", "resolution", "sigma", "scan_resolutions"}},
      {"metric", {"kind", "amplitude", "center", "width", "path"}},
      {"weights", {"epsilon", "r0", "r1", "N", "smooth_min_power"}},
      {"targets", {"kind", "dR_amplitude", "dR_center", "dR_width", "dH_amplitude", "dH_center", "dH_width"}},
      {"solver", {"theta_cut_factor", "svd_tol", "max_candidates", "cg_tol", "force_cg"}},
      {"iteration", {"tol", "max_iter", "eps_max", "floor_factor"}},
      {"output", {"directory", "per_step_dumps", "seed"}},
  };
  return s;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string key_name(const std::string& sec, const std::string& key) { return sec + "." + key; }

double to_double(const std::string& name, const std::string& text) {
  const std::string t = trim(text);
  double v = 0;
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError(name + ": expected a number, got '" + text + "'");
  return v;
}

long to_int(const std::string& name, const std::string& text) {
  const std::string t = trim(text);
  long v = 0;
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError(name + ": expected an integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& name, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(name + ": expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::string t = text;
  for (char& c : t)
    if (c == ',') c = ' ';
  std::istringstream is(t);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

// Sets the leading entries; the count is checked against dim once the whole file is read.
int to_array(const std::string& name, const std::string& text, std::array<double, 3>& out) {
  auto items = split_list(text);
  if (items.empty() || items.size() > 3) throw ConfigError(name + ": expected 1 to 3 numbers");
  for (size_t i = 0; i < items.size(); ++i) out[i] = to_double(name, items[i]);
  return static_cast<int>(items.size());
}

template <typename T>
std::string join(const T& v, size_t n) {
  std::string s;
  for (size_t i = 0; i < n; ++i) {
    if (i) s += ", ";
    if constexpr (std::is_same_v<std::decay_t<decltype(v[i])>, double>)
      s += fmt(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

void check_range(bool ok, const std::string& name, const std::string& what) {
  if (!ok) throw ConfigError(name + " " + what);
}

// entries given per list-valued key during one parse
thread_local std::map<std::string, int> g_counts;

}  // namespace

SigmaSpec RunConfig::sigma() const {
  SigmaSpec s;
  if (sigma_face.empty()) return s;
  s.axis = sigma_face[0] - 'x';
  s.side = sigma_face[1] == '+' ? 1 : 0;
  return s;
}

RunConfig parse_config_string(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  const auto& sch = schema();
  for (const auto& [sec, body] : tree) {
    auto it = sch.find(sec);
    if (it == sch.end()) {
      if (body.empty()) throw ConfigError("unknown key '" + sec + "' outside any section");
      throw ConfigError("unknown section [" + sec + "]");
    }
    for (const auto& kv : body)
      if (!it->second.count(kv.first)) throw ConfigError("unknown key '" + key_name(sec, kv.first) + "'");
  }

  RunConfig c;
  g_counts.clear();
  auto get = [&](const std::string& sec, const std::string& key, auto&& apply) {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(sec + "/" + key, '/'))) {
      const std::string name = key_name(sec, key);
      apply(name, *v);
    }
  };
  auto num = [](double& dst) { return [&dst](const std::string& n, const std::string& v) { dst = to_double(n, v); }; };
  auto arr = [](std::array<double, 3>& dst) {
    return [&dst](const std::string& n, const std::string& v) { g_counts[n] = to_array(n, v, dst); };
  };

  get("domain", "dim", [&](auto& n, auto& v) { c.dim = static_cast<int>(to_int(n, v)); });
  get("domain", "extents", arr(c.extents));
  get("domain", "resolution", [&](auto& n, auto& v) { c.resolution = static_cast<int>(to_int(n, v)); });
  get("domain", "sigma", [&](auto&, auto& v) { c.sigma_face = trim(v); });
  get("domain", "scan_resolutions", [&](auto& n, auto& v) {
    for (const auto& w : split_list(v)) c.scan_resolutions.push_back(static_cast<int>(to_int(n, w)));
  });

  get("metric", "kind", [&](auto&, auto& v) { c.metric.kind = trim(v); });
  get("metric", "amplitude", num(c.metric.amplitude));
  get("metric", "center", arr(c.metric.center));
  get("metric", "width", num(c.metric.width));
  get("metric", "path", [&](auto&, auto& v) { c.metric.path = trim(v); });

  get("weights", "epsilon", num(c.weights.eps));
  get("weights", "r0", num(c.weights.r0));
  get("weights", "r1", num(c.weights.r1));
  get("weights", "N", num(c.weights.N));
  get("weights", "smooth_min_power", num(c.weights.smooth_min_power));

  get("targets", "kind", [&](auto&, auto& v) { c.targets.kind = trim(v); });
  get("targets", "dR_amplitude", num(c.targets.dR.amplitude));
  get("targets", "dR_center", arr(c.targets.dR.center));
  get("targets", "dR_width", num(c.targets.dR.width));
  get("targets", "dH_amplitude", num(c.targets.dH.amplitude));
  get("targets", "dH_center", arr(c.targets.dH.center));
  get("targets", "dH_width", num(c.targets.dH.width));

  get("solver", "theta_cut_factor", num(c.weights.theta_cut_factor));
  get("solver", "svd_tol", num(c.solver.svd_tol));
  get("solver", "max_candidates", [&](auto& n, auto& v) { c.solver.max_candidates = static_cast<int>(to_int(n, v)); });
  get("solver", "cg_tol", num(c.solver.cg_tol));
  get("solver", "force_cg", [&](auto& n, auto& v) { c.solver.force_cg = to_bool(n, v); });

  get("iteration", "tol", num(c.iteration.tol));
  get("iteration", "max_iter", [&](auto& n, auto& v) { c.iteration.max_iter = static_cast<int>(to_int(n, v)); });
  get("iteration", "eps_max", num(c.iteration.eps_max));
  get("iteration", "floor_factor", num(c.iteration.floor_factor));

  get("output", "directory", [&](auto&, auto& v) { c.output.directory = trim(v); });
  get("output", "per_step_dumps", [&](auto& n, auto& v) { c.output.per_step_dumps = to_bool(n, v); });
  get("output", "seed", [&](auto& n, auto& v) {
    long s = to_int(n, v);
    check_range(s >= 0, n, "must be >= 0");
    c.output.seed = static_cast<unsigned>(s);
  });
  c.solver.seed = c.output.seed;

  for (const auto& [name, count] : g_counts)
    if (count != c.dim) throw ConfigError(name + ": expected " + std::to_string(c.dim) + " entries, got " +
                                          std::to_string(count));
  validate(c);
  return c;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

void validate(const RunConfig& c) {
  check_range(c.dim == 2 || c.dim == 3, "domain.dim", "must be 2 or 3");
  for (int a = 0; a < c.dim; ++a) check_range(c.extents[a] > 0, "domain.extents", "must be positive");
  check_range(c.resolution >= 9, "domain.resolution", "must be >= 9");
  check_range(c.dim == 2 ? c.resolution <= 257 : c.resolution <= 41, "domain.resolution", "is above the desk-scale limit");
  if (!c.sigma_face.empty()) {
    const std::string& f = c.sigma_face;
    bool ok = f.size() == 2 && f[0] >= 'x' && f[0] < 'x' + c.dim && (f[1] == '-' || f[1] == '+');
    check_range(ok, "domain.sigma", "must name a face such as y- or x+");
  }
  for (int r : c.scan_resolutions) check_range(r >= 9, "domain.scan_resolutions", "entries must be >= 9");
  check_range(c.scan_resolutions.empty() || c.scan_resolutions.size() >= 2, "domain.scan_resolutions",
              "needs at least two entries");

  static const std::set<std::string> kinds = {"flat", "conformal_bump", "round_sphere", "file"};
  check_range(kinds.count(c.metric.kind) > 0, "metric.kind", "must be one of flat, conformal_bump, round_sphere, file");
  check_range(c.metric.kind != "file" || !c.metric.path.empty(), "metric.path", "is required for kind = file");
  check_range(std::abs(c.metric.amplitude) <= 2, "metric.amplitude", "must lie in [-2, 2]");
  check_range(c.metric.width > 0, "metric.width", "must be positive");

  check_range(c.weights.eps > 0 && c.weights.eps < 1, "weights.epsilon", "must lie in (0, 1)");
  check_range(c.weights.r1 > 0, "weights.r1", "must be positive");
  check_range(c.weights.r0 > c.weights.r1, "weights.r0", "must exceed weights.r1");
  check_range(c.weights.N >= 2, "weights.N", "must be >= 2");
  check_range(c.weights.smooth_min_power == 0 || c.weights.smooth_min_power >= 2, "weights.smooth_min_power",
              "must be 0 (automatic) or >= 2");

  static const std::set<std::string> tk = {"none", "bumps", "manufactured"};
  check_range(tk.count(c.targets.kind) > 0, "targets.kind", "must be one of none, bumps, manufactured");
  check_range(c.targets.dR.width > 0, "targets.dR_width", "must be positive");
  check_range(c.targets.dH.width > 0, "targets.dH_width", "must be positive");
  check_range(std::abs(c.targets.dR.amplitude) <= 10, "targets.dR_amplitude", "must lie in [-10, 10]");
  check_range(std::abs(c.targets.dH.amplitude) <= 10, "targets.dH_amplitude", "must lie in [-10, 10]");

  check_range(c.weights.theta_cut_factor >= 0, "solver.theta_cut_factor", "must be >= 0");
  check_range(c.solver.svd_tol > 0 && c.solver.svd_tol < 1, "solver.svd_tol", "must lie in (0, 1)");
  check_range(c.solver.max_candidates >= 1, "solver.max_candidates", "must be >= 1");
  check_range(c.solver.cg_tol > 0 && c.solver.cg_tol < 1, "solver.cg_tol", "must lie in (0, 1)");

  check_range(c.iteration.tol > 0, "iteration.tol", "must be positive");
  check_range(c.iteration.max_iter >= 0, "iteration.max_iter", "must be >= 0");
  check_range(c.iteration.eps_max > 0, "iteration.eps_max", "must be positive");
  check_range(c.iteration.floor_factor >= 0, "iteration.floor_factor", "must be >= 0");

  check_range(!c.output.directory.empty(), "output.directory", "must not be empty");
}

std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  const size_t n = static_cast<size_t>(c.dim);
  os << "[domain]\n"
     << "dim = " << c.dim << "\n"
     << "extents = " << join(c.extents, n) << "\n"
     << "resolution = " << c.resolution << "\n";
  if (!c.sigma_face.empty()) os << "sigma = " << c.sigma_face << "\n";
  if (!c.scan_resolutions.empty()) os << "scan_resolutions = " << join(c.scan_resolutions, c.scan_resolutions.size()) << "\n";
  os << "\n[metric]\n"
     << "kind = " << c.metric.kind << "\n"
     << "amplitude = " << fmt(c.metric.amplitude) << "\n"
     << "center = " << join(c.metric.center, n) << "\n"
     << "width = " << fmt(c.metric.width) << "\n";
  if (!c.metric.path.empty()) os << "path = " << c.metric.path << "\n";
  os << "\n[weights]\n"
     << "epsilon = " << fmt(c.weights.eps) << "\n"
     << "r0 = " << fmt(c.weights.r0) << "\n"
     << "r1 = " << fmt(c.weights.r1) << "\n"
     << "N = " << fmt(c.weights.N) << "\n"
     << "smooth_min_power = " << fmt(c.weights.smooth_min_power) << "\n"
     << "\n[targets]\n"
     << "kind = " << c.targets.kind << "\n"
     << "dR_amplitude = " << fmt(c.targets.dR.amplitude) << "\n"
     << "dR_center = " << join(c.targets.dR.center, n) << "\n"
     << "dR_width = " << fmt(c.targets.dR.width) << "\n"
     << "dH_amplitude = " << fmt(c.targets.dH.amplitude) << "\n"
     << "dH_center = " << join(c.targets.dH.center, n) << "\n"
     << "dH_width = " << fmt(c.targets.dH.width) << "\n"
     << "\n[solver]\n"
     << "theta_cut_factor = " << fmt(c.weights.theta_cut_factor) << "\n"
     << "svd_tol = " << fmt(c.solver.svd_tol) << "\n"
     << "max_candidates = " << c.solver.max_candidates << "\n"
     << "cg_tol = " << fmt(c.solver.cg_tol) << "\n"
     << "force_cg = " << (c.solver.force_cg ? "true" : "false") << "\n"
     << "\n[iteration]\n"
     << "tol = " << fmt(c.iteration.tol) << "\n"
     << "max_iter = " << c.iteration.max_iter << "\n"
     << "eps_max = " << fmt(c.iteration.eps_max) << "\n"
     << "floor_factor = " << fmt(c.iteration.floor_factor) << "\n"
     << "\n[output]\n"
     << "directory = " << c.output.directory << "\n"
     << "per_step_dumps = " << (c.output.per_step_dumps ? "true" : "false") << "\n"
     << "seed = " << c.output.seed << "\n";
  return os.str();
}

}  // namespace deform
