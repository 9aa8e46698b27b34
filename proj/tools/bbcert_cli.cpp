// Command-line front end: solve, certify, validate, generate, map.

#include "bbcert/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace bbcert;

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ContractError("not a number: '" + item + "'");
    }
  }
  return out;
}

struct RuleOptions {
  std::string node = "df";
  std::string branch = "fb";
  std::string heuristic = "none";
  std::string order = "zero_first";
  bool warm_start = false;
  std::string eps;  // "s" (constant) or "r_1,...,r_d,s"
  double eps_r = 0.0;
  int tcut = -1;
  int mcut = -1;
  int node_limit = -1;

  void attach(CLI::App* app) {
    app->add_option("--node-rule", node, "node selection")->check(CLI::IsMember({"df", "brf", "bf"}));
    app->add_option("--branch-rule", branch, "branching rule")->check(CLI::IsMember({"fb", "mib"}));
    app->add_option("--heuristic", heuristic, "improvement heuristic")->check(CLI::IsMember({"none", "lb", "rins"}));
    app->add_option("--child-order", order, "child insertion order")->check(CLI::IsMember({"zero_first", "one_first"}));
    app->add_flag("--warm-start", warm_start, "MIQP: warm-start children from the parent working set");
    app->add_option("--eps", eps, "absolute dominance slack: s, or r_1,...,r_d,s for an affine slack");
    app->add_option("--eps-r", eps_r, "relative dominance slack");
    app->add_option("--tcut", tcut, "maximum number of branchings")->check(CLI::NonNegativeNumber);
    app->add_option("--mcut", mcut, "maximum pending-list length")->check(CLI::NonNegativeNumber);
    app->add_option("--node-limit", node_limit, "node budget")->check(CLI::PositiveNumber);
  }

  SolverConfig build(int n_theta) const {
    SolverConfig c;
    c.node_rule = node == "df" ? NodeRule::df : node == "brf" ? NodeRule::brf : NodeRule::bf;
    c.branch_rule = branch == "fb" ? BranchRule::fb : BranchRule::mib;
    c.heuristic = heuristic == "none" ? Heuristic::none : heuristic == "lb" ? Heuristic::lb : Heuristic::rins;
    c.order = order == "zero_first" ? ChildOrder::zero_first : ChildOrder::one_first;
    c.warm_start = warm_start;
    if (!eps.empty() || eps_r != 0.0) {
      c.use_eps = true;
      c.eps = QuadForm::zero(n_theta);
      const std::vector<double> v = eps.empty() ? std::vector<double>{0.0} : parse_list(eps);
      if (v.size() == 1) {
        c.eps.S = v[0];
      } else if (static_cast<int>(v.size()) == n_theta + 1) {
        for (int k = 0; k < n_theta; ++k) c.eps.R(k) = v[k];
        c.eps.S = v.back();
      } else {
        throw ContractError("--eps expects 1 or n_theta+1 values");
      }
      c.eps_r = eps_r;
    }
    if (tcut >= 0) c.t0 = tcut;
    if (mcut >= 0) c.m0 = mcut;
    if (node_limit > 0) c.node_limit = node_limit;
    return c;
  }
};

std::vector<int> parse_grid(const std::string& text, int n_theta) {
  std::vector<int> counts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, 'x');) counts.push_back(std::stoi(item));
  if (counts.size() == 1) counts.assign(n_theta, counts[0]);
  if (static_cast<int>(counts.size()) != n_theta) throw ContractError("--grid needs one count per parameter");
  return counts;
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path);
  out << text << '\n';
}

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branch-and-bound MILP/MIQP solver and complexity certifier"};
  app.require_subcommand(1);

  std::string problem_path, theta_text, out_path, cert_path, report_path, grid_text = "100x100";
  RuleOptions rules;

  auto* solve = app.add_subcommand("solve", "solve one instance at a fixed parameter");
  solve->add_option("--problem", problem_path, "problem JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("--theta", theta_text, "comma-separated parameter")->required();
  rules.attach(solve);

  std::string mode = "exact", approx = "atomic";
  bool quad_regions = false, loop_all = false;
  int max_regions = 5000000;
  auto* certify = app.add_subcommand("certify", "certify iteration and node counts over the parameter set");
  certify->add_option("--problem", problem_path, "problem JSON")->required()->check(CLI::ExistingFile);
  certify->add_option("--mode", mode, "exact or conservative (MIQP)")->check(CLI::IsMember({"exact", "conservative"}));
  certify->add_option("--approx", approx, "conservative bound")->check(CLI::IsMember({"atomic", "under", "mccormick"}));
  certify->add_flag("--quad-regions", quad_regions, "exact MIQP: allow quadratic region boundaries (n_theta <= 3)");
  certify->add_flag("--loop-all-upper", loop_all, "conservative: test every collected upper bound");
  certify->add_option("--max-regions", max_regions, "region budget")->check(CLI::PositiveNumber);
  certify->add_option("--out", out_path, "certificate JSON (default: stdout)");
  rules.attach(certify);

  bool no_centers = false, config_echo = false;
  auto* validate = app.add_subcommand("validate", "replay the online solver on a grid against a certificate");
  validate->add_option("--problem", problem_path, "problem JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--certificate", cert_path, "certificate JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--grid", grid_text, "per-axis counts, e.g. 100x100");
  validate->add_flag("--no-centers", no_centers, "skip the region Chebyshev centers");
  validate->add_option("--report", report_path, "write the JSON report here");
  validate->add_flag("--config-echo", config_echo, "print the replayed configuration");

  std::string kind = "milp";
  int nb = 4, nc = 4, m = 8, ntheta = 2;
  std::uint64_t seed = 1;
  auto* generate = app.add_subcommand("generate", "write a random instance");
  generate->add_option("--kind", kind, "milp or miqp")->check(CLI::IsMember({"milp", "miqp"}));
  generate->add_option("--nb", nb, "binary variables");
  generate->add_option("--nc", nc, "continuous variables");
  generate->add_option("--m", m, "constraints");
  generate->add_option("--ntheta", ntheta, "parameters");
  generate->add_option("--seed", seed, "random seed");
  generate->add_option("--out", out_path, "problem JSON (default: stdout)");

  std::string axes_text = "0,1";
  int res = 100;
  auto* map = app.add_subcommand("map", "rasterize a certificate to CSV");
  map->add_option("--certificate", cert_path, "certificate JSON")->required()->check(CLI::ExistingFile);
  map->add_option("--axes", axes_text, "two parameter indices, e.g. 0,1");
  map->add_option("--res", res, "cells per axis")->check(CLI::PositiveNumber);
  map->add_option("--out", out_path, "CSV file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      const MpProblem p = load_problem(problem_path);
      const std::vector<double> t = parse_list(theta_text);
      if (static_cast<int>(t.size()) != p.n_theta()) throw ContractError("--theta has the wrong dimension");
      const Vec theta = Eigen::Map<const Vec>(t.data(), t.size());
      const OnlineOutcome out = bnb_solve(p, theta, rules.build(p.n_theta()));
      nlohmann::json j;
      j["feasible"] = out.x_bar.has_value();
      j["J"] = out.x_bar ? nlohmann::json(out.J_bar) : nlohmann::json(nullptr);
      j["x"] = out.x_bar ? vec_json(*out.x_bar) : nlohmann::json(nullptr);
      j["kappa"] = {{"iterations", out.kappa_tot.iterations}, {"nodes", out.kappa_tot.nodes}};
      std::cout << j.dump(1) << '\n';
      return 0;
    }
    if (*certify) {
      const MpProblem p = load_problem(problem_path);
      CertConfig cfg;
      cfg.solver = rules.build(p.n_theta());
      cfg.mode = mode == "exact" ? CertMode::exact : CertMode::conservative;
      cfg.approx = approx == "atomic" ? ApproxKind::atomic : approx == "under" ? ApproxKind::under : ApproxKind::mccormick;
      cfg.quadratic_regions = quad_regions;
      cfg.loop_all_upper = loop_all;
      cfg.max_regions = max_regions;
      const Certificate cert = bnb_cert(p, cfg);
      write_or_print(out_path, certificate_to_json_text(cert, cfg));
      long worst_it = 0, worst_nd = 0;
      for (const CertifiedRegion& r : cert.regions) {
        worst_it = std::max(worst_it, r.kappa.iterations);
        worst_nd = std::max(worst_nd, r.kappa.nodes);
      }
      std::cerr << cert.regions.size() << " regions, worst-case " << worst_it << " iterations / " << worst_nd
                << " nodes\n";
      return 0;
    }
    if (*validate) {
      const MpProblem p = load_problem(problem_path);
      const CertificateFile f = load_certificate(cert_path);
      if (f.cert.n_theta != p.n_theta()) throw ContractError("certificate and problem differ in n_theta");
      if (config_echo) std::cout << "config " << config_to_json_text(f.config) << '\n';
      GridSpec grid{parse_grid(grid_text, p.n_theta()), 1e-6, !no_centers};
      const ValidationReport rep = validate_grid(p, f.cert, grid, f.config.solver);
      print_summary(rep, std::cout);
      if (!report_path.empty()) write_or_print(report_path, report_to_json_text(rep));
      return rep.passed() ? 0 : 1;
    }
    if (*generate) {
      const MpProblem p =
          random_instance(kind == "milp" ? ProblemKind::milp : ProblemKind::miqp, nb, nc, m, ntheta, seed);
      write_or_print(out_path, problem_to_json_text(p));
      return 0;
    }
    if (*map) {
      const CertificateFile f = load_certificate(cert_path);
      const std::vector<double> ax = parse_list(axes_text);
      const int ai = ax.size() > 0 ? static_cast<int>(ax[0]) : 0;
      const int aj = ax.size() > 1 ? static_cast<int>(ax[1]) : 1;
      std::ostringstream csv;
      emit_region_map(f.cert, ai, aj, res, csv);
      std::string text = csv.str();
      if (!text.empty() && text.back() == '\n') text.pop_back();
      write_or_print(out_path, text);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
