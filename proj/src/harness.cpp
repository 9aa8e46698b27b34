#include "bbcert/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace bbcert {
namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& ptr, const std::string& what) {
  throw ContractError("certificate JSON " + ptr + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) schema_error(ptr, "expected object");
  auto it = j.find(key);
  if (it == j.end()) schema_error(ptr + "/" + key, "missing");
  return *it;
}

json to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const RowVec& v) { return to_json(Vec(v.transpose())); }

json to_json(const Mat& M) {
  json a = json::array();
  for (int i = 0; i < M.rows(); ++i) a.push_back(to_json(Vec(M.row(i).transpose())));
  return a;
}

Vec vec_of(const json& j, const std::string& ptr) {
  if (!j.is_array()) schema_error(ptr, "expected array");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) schema_error(ptr + "/" + std::to_string(i), "expected number");
    v(i) = j[i].get<double>();
  }
  return v;
}

Mat mat_of(const json& j, const std::string& ptr, int cols) {
  if (!j.is_array()) schema_error(ptr, "expected array of arrays");
  Mat M(j.size(), cols);
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string pi = ptr + "/" + std::to_string(i);
    const Vec row = vec_of(j[i], pi);
    if (row.size() != cols) schema_error(pi, "expected " + std::to_string(cols) + " entries");
    M.row(i) = row.transpose();
  }
  return M;
}

json form_json(const QuadForm& q) { return {{"Q", to_json(q.Q)}, {"R", to_json(q.R)}, {"S", q.S}}; }

QuadForm form_of(const json& j, const std::string& ptr, int d) {
  QuadForm q = QuadForm::zero(d);
  q.Q = mat_of(field(j, "Q", ptr), ptr + "/Q", d);
  if (q.Q.rows() != d) schema_error(ptr + "/Q", "expected a square matrix");
  const Vec R = vec_of(field(j, "R", ptr), ptr + "/R");
  if (R.size() != d) schema_error(ptr + "/R", "wrong length");
  q.R = R.transpose();
  const json& S = field(j, "S", ptr);
  if (!S.is_number()) schema_error(ptr + "/S", "expected number");
  q.S = S.get<double>();
  return q;
}

json map_json(const AffineMap& x) { return {{"F", to_json(x.F)}, {"g", to_json(x.g)}}; }

AffineMap map_of(const json& j, const std::string& ptr, int d) {
  AffineMap x;
  x.F = mat_of(field(j, "F", ptr), ptr + "/F", d);
  x.g = vec_of(field(j, "g", ptr), ptr + "/g");
  if (x.g.size() != x.F.rows()) schema_error(ptr + "/g", "length differs from F");
  return x;
}

json poly_json(const Polyhedron& P) { return {{"At", to_json(P.At)}, {"bt", to_json(P.bt)}}; }

Polyhedron poly_of(const json& j, const std::string& ptr, int d) {
  Polyhedron P;
  P.At = mat_of(field(j, "At", ptr), ptr + "/At", d);
  P.bt = vec_of(field(j, "bt", ptr), ptr + "/bt");
  if (P.bt.size() != P.At.rows()) schema_error(ptr + "/bt", "length differs from At");
  return P;
}

json set_json(const RegionSet& s) {
  json j = poly_json(s.poly);
  json quads = json::array();
  for (const QuadCut& q : s.quads) quads.push_back({{"Q", to_json(q.Q)}, {"R", to_json(q.R)}, {"S", q.S}});
  j["quads"] = quads;
  return j;
}

RegionSet set_of(const json& j, const std::string& ptr, int d) {
  RegionSet s(poly_of(j, ptr, d));
  if (auto it = j.find("quads"); it != j.end()) {
    if (!it->is_array()) schema_error(ptr + "/quads", "expected array");
    for (size_t i = 0; i < it->size(); ++i) {
      const QuadForm q = form_of((*it)[i], ptr + "/quads/" + std::to_string(i), d);
      s.quads.push_back(QuadCut::from_form(q));
    }
  }
  return s;
}

template <typename E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<NodeRule> kNodeRules[] = {{NodeRule::df, "df"}, {NodeRule::brf, "brf"}, {NodeRule::bf, "bf"}};
constexpr Names<BranchRule> kBranchRules[] = {{BranchRule::fb, "fb"}, {BranchRule::mib, "mib"}};
constexpr Names<Heuristic> kHeuristics[] = {
    {Heuristic::none, "none"}, {Heuristic::lb, "lb"}, {Heuristic::rins, "rins"}};
constexpr Names<ChildOrder> kOrders[] = {{ChildOrder::zero_first, "zero_first"}, {ChildOrder::one_first, "one_first"}};
constexpr Names<CertMode> kModes[] = {{CertMode::exact, "exact"}, {CertMode::conservative, "conservative"}};
constexpr Names<ApproxKind> kApprox[] = {
    {ApproxKind::atomic, "atomic"}, {ApproxKind::under, "under"}, {ApproxKind::mccormick, "mccormick"}};

template <typename E, size_t N>
const char* name_of(const Names<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <typename E, size_t N>
E value_of(const Names<E> (&table)[N], const json& j, const std::string& ptr) {
  if (j.is_string())
    for (const auto& e : table)
      if (j.get<std::string>() == e.name) return e.value;
  schema_error(ptr, "unknown value");
}

json config_json(const CertConfig& c) {
  const SolverConfig& s = c.solver;
  json j;
  j["node_rule"] = name_of(kNodeRules, s.node_rule);
  j["branch_rule"] = name_of(kBranchRules, s.branch_rule);
  j["heuristic"] = name_of(kHeuristics, s.heuristic);
  j["warm_start"] = s.warm_start;
  j["child_order"] = name_of(kOrders, s.order);
  j["eps"] = s.use_eps ? form_json(s.eps) : json(nullptr);
  j["eps_r"] = s.eps_r;
  j["t0"] = s.t0 ? json(*s.t0) : json(nullptr);
  j["m0"] = s.m0 ? json(*s.m0) : json(nullptr);
  j["r_n0"] = s.r_n0;
  j["rins_r"] = s.rins_r;
  j["eps_cutoff"] = s.eps_cutoff;
  j["node_limit"] = s.node_limit ? json(*s.node_limit) : json(nullptr);
  j["mode"] = name_of(kModes, c.mode);
  j["approx"] = name_of(kApprox, c.approx);
  j["loop_all_upper"] = c.loop_all_upper;
  j["quadratic_regions"] = c.quadratic_regions;
  j["max_regions"] = c.max_regions;
  return j;
}

std::optional<int> optional_int(const json& j, const std::string& key, const std::string& ptr) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) schema_error(ptr + "/" + key, "expected integer");
  return it->get<int>();
}

CertConfig config_of(const json& j, const std::string& ptr, int d) {
  CertConfig c;
  SolverConfig& s = c.solver;
  s.node_rule = value_of(kNodeRules, field(j, "node_rule", ptr), ptr + "/node_rule");
  s.branch_rule = value_of(kBranchRules, field(j, "branch_rule", ptr), ptr + "/branch_rule");
  s.heuristic = value_of(kHeuristics, field(j, "heuristic", ptr), ptr + "/heuristic");
  s.warm_start = j.value("warm_start", false);
  if (j.contains("child_order")) s.order = value_of(kOrders, j["child_order"], ptr + "/child_order");
  if (auto it = j.find("eps"); it != j.end() && !it->is_null()) {
    s.use_eps = true;
    s.eps = form_of(*it, ptr + "/eps", d);
  }
  s.eps_r = j.value("eps_r", 0.0);
  s.t0 = optional_int(j, "t0", ptr);
  s.m0 = optional_int(j, "m0", ptr);
  s.r_n0 = j.value("r_n0", s.r_n0);
  s.rins_r = j.value("rins_r", s.rins_r);
  s.eps_cutoff = j.value("eps_cutoff", s.eps_cutoff);
  s.node_limit = optional_int(j, "node_limit", ptr);
  if (j.contains("mode")) c.mode = value_of(kModes, j["mode"], ptr + "/mode");
  if (j.contains("approx")) c.approx = value_of(kApprox, j["approx"], ptr + "/approx");
  c.loop_all_upper = j.value("loop_all_upper", false);
  c.quadratic_regions = j.value("quadratic_regions", false);
  c.max_regions = j.value("max_regions", c.max_regions);
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A point of the region to sample as its "center": the polyhedral Chebyshev center, when it also
// satisfies the quadratic cuts.
std::optional<Ball> region_center(const RegionSet& s) {
  Ball b;
  try {
    b = chebyshev_center(s.poly);
  } catch (const SolverError&) {
    return std::nullopt;
  }
  for (const QuadCut& q : s.quads)
    if (q.eval(b.center) > 0) return std::nullopt;
  return b;
}

double pct(double num, double den) { return 100.0 * num / std::max(den, 1.0); }

}  // namespace

std::string config_to_json_text(const CertConfig& config) { return config_json(config).dump(); }

std::string certificate_to_json_text(const Certificate& cert, const CertConfig& config) {
  json j;
  j["conservative"] = cert.conservative;
  j["n_theta"] = cert.n_theta;
  j["domain"] = poly_json(cert.domain);
  j["config"] = config_json(config);
  json regions = json::array();
  for (const CertifiedRegion& r : cert.regions) {
    json e;
    e["set"] = set_json(r.set);
    e["kappa"] = {{"iterations", r.kappa.iterations}, {"nodes", r.kappa.nodes}};
    if (cert.conservative) {
      json ups = json::array();
      for (const UpperBound& u : r.upper) ups.push_back({{"J", form_json(u.J)}, {"x", map_json(u.x)}});
      e["upper"] = nullptr;
      e["xbar"] = nullptr;
      e["upper_set"] = ups;
    } else if (r.upper.empty()) {
      e["upper"] = nullptr;
      e["xbar"] = nullptr;
    } else {
      e["upper"] = form_json(r.upper.front().J);
      e["xbar"] = map_json(r.upper.front().x);
    }
    regions.push_back(e);
  }
  j["regions"] = regions;
  return j.dump();
}

CertificateFile certificate_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ContractError(std::string("certificate JSON: ") + e.what());
  }
  CertificateFile f;
  Certificate& c = f.cert;
  const json& nt = field(j, "n_theta", "");
  if (!nt.is_number_integer() || nt.get<int>() < 1) schema_error("/n_theta", "expected positive integer");
  c.n_theta = nt.get<int>();
  c.conservative = j.value("conservative", false);
  const int d = c.n_theta;
  c.domain = poly_of(field(j, "domain", ""), "/domain", d);
  if (j.contains("config")) f.config = config_of(j["config"], "/config", d);
  const json& regions = field(j, "regions", "");
  if (!regions.is_array()) schema_error("/regions", "expected array");
  for (size_t i = 0; i < regions.size(); ++i) {
    const std::string ptr = "/regions/" + std::to_string(i);
    const json& e = regions[i];
    CertifiedRegion r;
    r.set = set_of(field(e, "set", ptr), ptr + "/set", d);
    const json& k = field(e, "kappa", ptr);
    const json& it = field(k, "iterations", ptr + "/kappa");
    const json& nd = field(k, "nodes", ptr + "/kappa");
    if (!it.is_number_integer()) schema_error(ptr + "/kappa/iterations", "expected integer");
    if (!nd.is_number_integer()) schema_error(ptr + "/kappa/nodes", "expected integer");
    r.kappa = {it.get<long>(), nd.get<long>()};
    if (auto ups = e.find("upper_set"); ups != e.end()) {
      if (!ups->is_array()) schema_error(ptr + "/upper_set", "expected array");
      for (size_t u = 0; u < ups->size(); ++u) {
        const std::string pu = ptr + "/upper_set/" + std::to_string(u);
        r.upper.push_back({form_of(field((*ups)[u], "J", pu), pu + "/J", d), map_of(field((*ups)[u], "x", pu), pu + "/x", d)});
      }
    } else {
      const json& up = field(e, "upper", ptr);
      const json& xb = field(e, "xbar", ptr);
      if (up.is_null() != xb.is_null()) schema_error(ptr, "upper and xbar must both be set or both be null");
      if (!up.is_null()) r.upper.push_back({form_of(up, ptr + "/upper", d), map_of(xb, ptr + "/xbar", d)});
    }
    c.regions.push_back(std::move(r));
  }
  return f;
}

void save_certificate(const Certificate& cert, const CertConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path);
  out << certificate_to_json_text(cert, config) << '\n';
}

CertificateFile load_certificate(const std::string& path) { return certificate_from_json_text(read_file(path)); }

namespace {

// Largest violation of the set's normalized rows and quadratic cuts at θ; <= 0 inside.
double residual(const RegionSet& set, const Vec& theta) {
  double worst = -std::numeric_limits<double>::infinity();
  const Polyhedron& P = set.poly;
  for (int i = 0; i < P.rows(); ++i) {
    const double nrm = P.At.row(i).norm();
    worst = std::max(worst, nrm == 0.0 ? -P.bt(i) : (P.At.row(i).dot(theta) - P.bt(i)) / nrm);
  }
  for (const QuadCut& q : set.quads) worst = std::max(worst, q.eval(theta));
  return worst;
}

}  // namespace

int lookup(const Certificate& cert, const Vec& theta, std::vector<int>* also) {
  if (theta.size() != cert.n_theta) throw ContractError("lookup: parameter has the wrong dimension");
  if (!cert.domain.contains(theta, kLookupTol)) throw ContractError("lookup: parameter outside the certified domain");
  // Near a shared facet several regions pass the tolerance; the one actually containing θ must win,
  // otherwise a point a few 1e-9 inside a neighbour reports the wrong counts.
  constexpr double kTie = 1e-12;
  std::vector<std::pair<int, double>> hits;
  for (int i = 0; i < static_cast<int>(cert.regions.size()); ++i) {
    const double r = residual(cert.regions[i].set, theta);
    if (r > kLookupTol) continue;
    hits.emplace_back(i, r);
    // Deep inside: no other region of a partition can do better (overlaps are caught by validation).
    if (!also && r <= -kLookupTol) break;
  }
  int first = -1;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [i, r] : hits) {
    if (r < best - kTie) {
      first = i;
      best = r;
    }
  }
  if (also) {
    for (const auto& [i, r] : hits)
      if (i != first) also->push_back(i);
  }
  if (first < 0) throw SolverError("coverage gap");
  return first;
}

std::vector<Vec> lattice_points(const Polyhedron& domain, const GridSpec& grid) {
  const int d = domain.dim();
  if (static_cast<int>(grid.counts.size()) != d) throw ContractError("grid: one count per parameter expected");
  for (int c : grid.counts)
    if (c < 1) throw ContractError("grid: counts must be positive");
  const auto box = bounding_box(domain);
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec t(d);
    for (int k = 0; k < d; ++k) {
      const double lo = box[k].first + grid.inset, hi = box[k].second - grid.inset;
      const int n = grid.counts[k];
      t(k) = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * idx[k] / (n - 1);
    }
    if (domain.contains(t)) out.push_back(t);
    int k = 0;
    while (k < d && ++idx[k] == grid.counts[k]) idx[k++] = 0;
    if (k == d) break;
  }
  return out;
}

ValidationReport validate_grid(const MpProblem& problem, const Certificate& cert, const GridSpec& grid,
                               const SolverConfig& config) {
  ValidationReport rep;
  rep.conservative = cert.conservative;
  std::vector<Vec> points = lattice_points(cert.domain, grid);
  const size_t lattice_size = points.size();
  if (grid.centers) {
    for (const CertifiedRegion& r : cert.regions) {
      const auto b = region_center(r.set);
      if (!b) continue;
      points.push_back(b->center);
      // Regions have disjoint interiors, so a center strictly inside a second region is an overlap.
      if (b->radius >= tol::kKeepRadius) {
        int hits = 0;
        for (const CertifiedRegion& o : cert.regions) hits += o.set.contains(b->center, -1e-9) ? 1 : 0;
        if (hits != 1) ++rep.center_overlaps;
      }
    }
  }
  rep.centers = static_cast<long>(points.size() - lattice_size);

  BnbSolver solver(problem, config);
  for (const Vec& t : points) {
    ++rep.samples;
    const OnlineOutcome on = solver.solve(t);
    rep.worst_online.iterations = std::max(rep.worst_online.iterations, on.kappa_tot.iterations);
    rep.worst_online.nodes = std::max(rep.worst_online.nodes, on.kappa_tot.nodes);
    int id = -1;
    try {
      id = lookup(cert, t);
    } catch (const SolverError&) {
      ++rep.coverage_misses;
      rep.violations.push_back({t, {}, on.kappa_tot, "coverage", -1});
      continue;
    }
    const CertifiedRegion& r = cert.regions[id];
    rep.worst_certified.iterations = std::max(rep.worst_certified.iterations, r.kappa.iterations);
    rep.worst_certified.nodes = std::max(rep.worst_certified.nodes, r.kappa.nodes);
    if (r.kappa == on.kappa_tot) ++rep.exact_matches;
    const Kappa& c = r.kappa;
    const Kappa& o = on.kappa_tot;
    const bool bad_it = cert.conservative ? c.iterations < o.iterations : c.iterations != o.iterations;
    const bool bad_nd = cert.conservative ? c.nodes < o.nodes : c.nodes != o.nodes;
    if (bad_it) rep.violations.push_back({t, c, o, "iterations", id});
    if (bad_nd) rep.violations.push_back({t, c, o, "nodes", id});
    if (cert.conservative && !bad_it) {
      rep.max_overestimate_pct =
          std::max(rep.max_overestimate_pct, pct(double(c.iterations - o.iterations), double(o.iterations)));
    }
    const double Jc = r.J_at(t);
    if (std::isinf(Jc) != std::isinf(on.J_bar) ||
        (!std::isinf(Jc) && std::abs(Jc - on.J_bar) > 1e-6 * std::max(1.0, std::abs(Jc)))) {
      rep.violations.push_back({t, c, o, "objective", id});
    }
  }
  if (cert.conservative) {
    rep.worst_case_overestimate_pct =
        pct(double(rep.worst_certified.iterations - rep.worst_online.iterations), double(rep.worst_online.iterations));
  }
  return rep;
}

std::string report_to_json_text(const ValidationReport& r) {
  json j;
  j["conservative"] = r.conservative;
  j["samples"] = r.samples;
  j["centers"] = r.centers;
  j["exact_matches"] = r.exact_matches;
  j["coverage_misses"] = r.coverage_misses;
  j["center_overlaps"] = r.center_overlaps;
  j["max_overestimate_pct"] = r.max_overestimate_pct;
  j["worst_case_overestimate_pct"] = r.worst_case_overestimate_pct;
  j["worst_certified"] = {{"iterations", r.worst_certified.iterations}, {"nodes", r.worst_certified.nodes}};
  j["worst_online"] = {{"iterations", r.worst_online.iterations}, {"nodes", r.worst_online.nodes}};
  j["passed"] = r.passed();
  json v = json::array();
  for (const Violation& x : r.violations) {
    v.push_back({{"theta", to_json(x.theta)},
                 {"kind", x.kind},
                 {"region", x.region},
                 {"certified", {{"iterations", x.certified.iterations}, {"nodes", x.certified.nodes}}},
                 {"online", {{"iterations", x.online.iterations}, {"nodes", x.online.nodes}}}});
  }
  j["violations"] = v;
  return j.dump(1);
}

void print_summary(const ValidationReport& r, std::ostream& out) {
  auto line = [&](const std::string& k, const std::string& v) { out << "  " << std::left << std::setw(28) << k << v << '\n'; };
  out << (r.conservative ? "conservative" : "exact") << " certificate validation\n";
  line("samples", std::to_string(r.samples) + " (" + std::to_string(r.centers) + " region centers)");
  line("exact kappa matches", std::to_string(r.exact_matches));
  line("violations", std::to_string(r.violations.size()));
  line("coverage misses", std::to_string(r.coverage_misses));
  line("center overlaps", std::to_string(r.center_overlaps));
  line("worst-case kappa certified", std::to_string(r.worst_certified.iterations) + " it / " +
                                         std::to_string(r.worst_certified.nodes) + " nodes");
  line("worst-case kappa online", std::to_string(r.worst_online.iterations) + " it / " +
                                      std::to_string(r.worst_online.nodes) + " nodes");
  if (r.conservative) {
    std::ostringstream a, b;
    a << std::fixed << std::setprecision(2) << r.max_overestimate_pct << " %";
    b << std::fixed << std::setprecision(2) << r.worst_case_overestimate_pct << " %";
    line("max pointwise overestimate", a.str());
    line("worst-case overestimate", b.str());
  }
  const size_t shown = std::min<size_t>(r.violations.size(), 10);
  for (size_t i = 0; i < shown; ++i) {
    const Violation& v = r.violations[i];
    out << "  ! " << v.kind << " at [" << v.theta.transpose() << "] region " << v.region << ": certified "
        << v.certified.iterations << "/" << v.certified.nodes << ", online " << v.online.iterations << "/"
        << v.online.nodes << '\n';
  }
  out << (r.passed() ? "PASS" : "FAIL") << '\n';
}

void emit_region_map(const Certificate& cert, int axis_i, int axis_j, int resolution, std::ostream& out) {
  if (resolution < 1) throw ContractError("map: resolution must be positive");
  const int d = cert.n_theta;
  const auto box = bounding_box(cert.domain);
  const Vec base = chebyshev_center(cert.domain).center;
  auto coord = [&](int axis, int k) {
    return box[axis].first + (k + 0.5) * (box[axis].second - box[axis].first) / resolution;
  };
  out << std::setprecision(17);
  // Writes "coords,iterations,nodes,region" for a cell inside the domain.
  auto emit = [&](const Vec& t, std::initializer_list<int> axes) {
    if (!cert.domain.contains(t)) return;
    for (int a : axes) out << t(a) << ',';
    int id = -1;
    try {
      id = lookup(cert, t);
    } catch (const SolverError&) {
    }
    if (id < 0) {
      out << ",,-1\n";
    } else {
      out << cert.regions[id].kappa.iterations << ',' << cert.regions[id].kappa.nodes << ',' << id << '\n';
    }
  };
  if (d < 2) {
    out << "theta,iterations,nodes,region\n";
    for (int a = 0; a < resolution; ++a) {
      Vec t = base;
      t(0) = coord(0, a);
      emit(t, {0});
    }
    return;
  }
  if (axis_i < 0 || axis_j < 0 || axis_i >= d || axis_j >= d || axis_i == axis_j) {
    throw ContractError("map: axes must be two distinct parameter indices");
  }
  out << "theta_" << axis_i << ",theta_" << axis_j << ",iterations,nodes,region\n";
  for (int a = 0; a < resolution; ++a) {
    for (int b = 0; b < resolution; ++b) {
      Vec t = base;
      t(axis_i) = coord(axis_i, a);
      t(axis_j) = coord(axis_j, b);
      emit(t, {axis_i, axis_j});
    }
  }
}

}  // namespace bbcert
