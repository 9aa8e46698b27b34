#include "bbcert/bnb_online.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace bbcert {

void SolverConfig::validate(const MpProblem& problem) const {
  if (rins_r < 0.0 || rins_r > 1.0) throw ContractError("RINS fraction r must lie in [0,1]");
  if (r_n0 < 1) throw ContractError("LB neighborhood r_n0 must be >= 1");
  if (!(eps_cutoff > 0.0)) throw ContractError("cut-off slack must be > 0");
  if (heuristic != Heuristic::none && problem.is_qp()) {
    throw ContractError("LB and RINS heuristics are restricted to MILPs");
  }
  if (use_eps) {
    if (eps.dim() != problem.n_theta() || !eps.is_affine(0.0)) throw ContractError("eps(θ) must be affine in θ");
  }
  if (t0 && *t0 < 0) throw ContractError("T0 must be >= 0");
  if (m0 && *m0 < 0) throw ContractError("M0 must be >= 0");
  if (node_limit && *node_limit < 1) throw ContractError("node limit must be >= 1");
}

IndexList branch_candidates(const MpProblem& problem, const Fixing& fix, const IndexList& active_set) {
  IndexList out;
  auto fixed = [&](int s) {
    return std::binary_search(fix.B0.begin(), fix.B0.end(), s) || std::binary_search(fix.B1.begin(), fix.B1.end(), s);
  };
  for (int s = 0; s < problem.n_b; ++s) {
    if (fixed(s)) continue;
    const bool at_bound = std::binary_search(active_set.begin(), active_set.end(), lower_box_row(problem, s)) ||
                          std::binary_search(active_set.begin(), active_set.end(), upper_box_row(problem, s));
    if (!at_bound) out.push_back(s);
  }
  return out;
}

int branch_index(const Vec& x_candidates, const IndexList& slots, BranchRule rule) {
  if (slots.empty() || x_candidates.size() != static_cast<int>(slots.size())) {
    throw ContractError("branch_index: empty or inconsistent candidate set");
  }
  if (rule == BranchRule::fb) return slots[0];
  auto score = [](double x) { return x - 0.5 <= 0.0 ? x : 1.0 - x; };
  int best = 0;
  double s_best = score(x_candidates(0));
  for (int i = 1; i < x_candidates.size(); ++i) {
    const double s = score(x_candidates(i));
    if (s_best - s + tol::kTie <= 0.0) {
      best = i;
      s_best = s;
    }
  }
  return slots[best];
}

double node_priority(const Node& node, NodeRule rule) {
  switch (rule) {
    case NodeRule::df:
      return 1.0 / (node.level() + 1);
    case NodeRule::brf:
      return node.level() + 1;
    case NodeRule::bf:
      return node.parent_bound;
  }
  return 0.0;
}

void sort_insert(std::deque<Node>& T, Node child0, Node child1, NodeRule rule, ChildOrder order) {
  const double rho = node_priority(child0, rule);
  size_t pos = T.size();
  for (size_t i = 0; i < T.size(); ++i) {
    if (rho - node_priority(T[i], rule) - tol::kTie <= 0.0) {
      pos = i;
      break;
    }
  }
  if (order == ChildOrder::one_first) std::swap(child0, child1);
  T.insert(T.begin() + pos, {std::move(child0), std::move(child1)});
}

void cut_step(SearchState& state, const MpProblem& problem, const RelaxResult& relax, const Node& node,
              const SolverConfig& config, const Vec& theta, const HeuristicHook& heuristic) {
  if (relax.status != RelaxStatus::optimal) return;
  if (state.J_bar < kInf) {
    double gap = (1.0 + config.eps_r) * relax.J - state.J_bar;
    if (config.use_eps) gap += config.eps.eval(theta);
    if (-gap - tol::kDominance <= 0.0) return;
  }
  const IndexList cand = branch_candidates(problem, node.fix, relax.active_set);
  if (cand.empty()) {
    state.J_bar = relax.J;
    state.x_bar = relax.x;
    if (config.heuristic != Heuristic::none && !state.heuristic_done && heuristic) {
      state.heuristic_done = true;
      const HeuristicOutcome h = heuristic(relax.x);
      state.kappa += h.kappa;
      if (h.x && h.J - state.J_bar + tol::kDominance <= 0.0) {
        state.J_bar = h.J;
        state.x_bar = h.x;
      }
    }
    return;
  }
  if (config.t0 && state.branchings >= *config.t0) {
    state.T.clear();
    state.terminated = true;
    return;
  }
  Vec xc(cand.size());
  for (size_t k = 0; k < cand.size(); ++k) xc(k) = relax.x(problem.binary_indices[cand[k]]);
  const int slot = branch_index(xc, cand, config.branch_rule);
  Node c0, c1;
  c0.fix = c1.fix = node.fix;
  c0.fix.B0.insert(std::upper_bound(c0.fix.B0.begin(), c0.fix.B0.end(), slot), slot);
  c1.fix.B1.insert(std::upper_bound(c1.fix.B1.begin(), c1.fix.B1.end(), slot), slot);
  c0.parent_bound = c1.parent_bound = relax.J;
  if (config.warm_start && problem.is_qp()) c0.warm_set = c1.warm_set = relax.active_set;
  sort_insert(state.T, std::move(c0), std::move(c1), config.node_rule, config.order);
  ++state.branchings;
  if (config.m0) {
    while (state.T.size() > static_cast<size_t>(*config.m0)) state.T.pop_back();
  }
}

BnbSolver::BnbSolver(const MpProblem& problem, SolverConfig config)
    : problem_(&problem), config_(std::move(config)), cache_(problem) {
  config_.validate(problem);
}

OnlineOutcome BnbSolver::solve(const Vec& theta, const Fixing& root) {
  const MpProblem& problem = *problem_;
  if (theta.size() != problem.n_theta()) throw ContractError("θ has wrong dimension");
  SearchState st;
  st.T.push_back(Node{root, -kInf, std::nullopt});
  bool first = true;
  const HeuristicHook hook = [&](const Vec& x_bar) -> HeuristicOutcome {
    if (config_.heuristic == Heuristic::lb) return lb_heuristic(problem, theta, x_bar, config_);
    if (!st.root_x) return {};
    return rins_heuristic(problem, theta, *st.root_x, x_bar, config_);
  };
  while (!st.T.empty() && !st.terminated) {
    if (config_.node_limit && st.kappa.nodes >= *config_.node_limit) break;
    const Node node = std::move(st.T.front());
    st.T.pop_front();
    const RelaxResult r = solve_relaxation(cache_, node.fix, theta, node.warm_set);
    st.kappa.iterations += r.iterations;
    st.kappa.nodes += 1;
    if (first && r.status == RelaxStatus::optimal) st.root_x = r.x;
    first = false;
    cut_step(st, problem, r, node, config_, theta, hook);
  }
  return {st.J_bar, st.x_bar, st.kappa};
}

OnlineOutcome bnb_solve(const MpProblem& problem, const Vec& theta, const SolverConfig& config) {
  if (!problem.theta0.contains(theta, tol::kFeas)) {
    std::cerr << "warning: θ lies outside Θ0\n";
  }
  BnbSolver solver(problem, config);
  return solver.solve(theta);
}

SolverConfig heuristic_subconfig(const SolverConfig& config) {
  SolverConfig sub;
  sub.node_rule = config.node_rule;
  sub.branch_rule = config.branch_rule;
  sub.order = config.order;
  sub.node_limit = 50;
  return sub;
}

MpProblem append_rows(const MpProblem& p, const Mat& A_extra, const Vec& b_extra, const Mat& W_extra) {
  MpProblem q = p;
  const int m = p.m();
  const int e = static_cast<int>(A_extra.rows());
  q.A.resize(m + e, p.n());
  q.A << p.A, A_extra;
  q.b.resize(m + e);
  q.b << p.b, b_extra;
  q.W.resize(m + e, p.n_theta());
  q.W << p.W, W_extra;
  return q;
}

std::vector<int> binary_pattern(const MpProblem& p, const Vec& x) {
  std::vector<int> pattern(p.n_b);
  for (int s = 0; s < p.n_b; ++s) pattern[s] = x(p.binary_indices[s]) > 0.5 ? 1 : 0;
  return pattern;
}

void local_branching_row(const MpProblem& p, const std::vector<int>& pattern, int r_n, RowVec& a, double& b) {
  a = RowVec::Zero(p.n());
  int ones = 0;
  for (int s = 0; s < p.n_b; ++s) {
    a(p.binary_indices[s]) = pattern[s] == 0 ? 1.0 : -1.0;
    ones += pattern[s];
  }
  b = r_n - ones;
}

int neighbor_size(int r_n0, bool solved) {
  return solved ? r_n0 + (r_n0 + 1) / 2 : r_n0 - r_n0 / 2;
}

HeuristicOutcome lb_heuristic(const MpProblem& problem, const Vec& theta, const Vec& x_bar, const SolverConfig& config) {
  HeuristicOutcome res;
  const SolverConfig sub_config = heuristic_subconfig(config);
  const std::vector<int> pattern = binary_pattern(problem, x_bar);
  const double cutoff = (1.0 - config.eps_cutoff) * problem.c.dot(x_bar);
  int r_n = config.r_n0;
  bool adjusted = false;
  while (true) {
    Mat Ae(2, problem.n());
    Vec be(2);
    RowVec a;
    double b;
    local_branching_row(problem, pattern, r_n, a, b);
    Ae.row(0) = a;
    Ae.row(1) = problem.c.transpose();
    be << b, cutoff;
    const MpProblem sub = append_rows(problem, Ae, be, Mat::Zero(2, problem.n_theta()));
    BnbSolver solver(sub, sub_config);
    const OnlineOutcome out = solver.solve(theta);
    res.kappa += out.kappa_tot;
    if (out.x_bar && (*out.x_bar - x_bar).cwiseAbs().maxCoeff() > tol::kPoint) {
      res.J = out.J_bar;
      res.x = out.x_bar;
      return res;
    }
    if (adjusted) return res;
    adjusted = true;
    r_n = neighbor_size(config.r_n0, out.x_bar.has_value());
  }
}

HeuristicOutcome rins_heuristic(const MpProblem& problem, const Vec& theta, const Vec& x_relaxed, const Vec& x_bar,
                                const SolverConfig& config) {
  HeuristicOutcome res;
  Fixing root;
  for (int s = 0; s < problem.n_b; ++s) {
    const int v = problem.binary_indices[s];
    if (std::abs(x_bar(v) - x_relaxed(v)) <= tol::kPoint) (x_bar(v) > 0.5 ? root.B1 : root.B0).push_back(s);
  }
  const int agreeing = static_cast<int>(root.B0.size() + root.B1.size());
  if (agreeing < config.rins_r * problem.n_b - 1e-12) return res;
  Mat Ae = problem.c.transpose();
  Vec be = Vec::Constant(1, (1.0 - config.eps_cutoff) * problem.c.dot(x_bar));
  const MpProblem sub = append_rows(problem, Ae, be, Mat::Zero(1, problem.n_theta()));
  BnbSolver solver(sub, heuristic_subconfig(config));
  const OnlineOutcome out = solver.solve(theta, root);
  res.kappa = out.kappa_tot;
  if (out.x_bar && (*out.x_bar - x_bar).cwiseAbs().maxCoeff() > tol::kPoint) {
    res.J = out.J_bar;
    res.x = out.x_bar;
  }
  return res;
}

}  // namespace bbcert
