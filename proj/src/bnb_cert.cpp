#include "bbcert/bnb_cert.hpp"

#include "bbcert/quad_compare.hpp"

#include <algorithm>

namespace bbcert {

namespace {

QuadForm constant_form(int d, double v) { return QuadForm::affine(RowVec::Zero(d), v); }

QuadForm row_form(const AffineMap& x, int i) { return QuadForm::affine(x.F.row(i), x.g(i)); }

QuadForm priority_form(const CertNode& n, NodeRule rule, int d) {
  switch (rule) {
    case NodeRule::df:
      return constant_form(d, 1.0 / (n.level() + 1));
    case NodeRule::brf:
      return constant_form(d, n.level() + 1);
    case NodeRule::bf:
      return n.parent_J;
  }
  return constant_form(d, 0.0);
}

AffineMap select_rows(const AffineMap& x, const IndexList& slots, const MpProblem& p) {
  AffineMap out(Mat(slots.size(), x.dim()), Vec(slots.size()));
  for (size_t k = 0; k < slots.size(); ++k) {
    const int v = p.binary_indices[slots[k]];
    out.F.row(k) = x.F.row(v);
    out.g(k) = x.g(v);
  }
  return out;
}

CertRegion with_set(const CertRegion& r, RegionSet set) {
  CertRegion out = r;
  out.set = std::move(set);
  return out;
}

// Cut-off row c'x <= (1 − ε)·c'x̄(θ) in the parametric form A x <= b + W θ.
MpProblem with_cutoff(const MpProblem& p, const AffineMap& x_bar, double eps, const RowVec* extra_a = nullptr,
                      double extra_b = 0.0) {
  const int e = extra_a ? 2 : 1;
  Mat Ae(e, p.n());
  Vec be(e);
  Mat We = Mat::Zero(e, p.n_theta());
  int row = 0;
  if (extra_a) {
    Ae.row(0) = *extra_a;
    be(0) = extra_b;
    row = 1;
  }
  Ae.row(row) = p.c.transpose();
  be(row) = (1.0 - eps) * p.c.dot(x_bar.g);
  We.row(row) = (1.0 - eps) * (p.c.transpose() * x_bar.F);
  return append_rows(p, Ae, be, We);
}

CertConfig sub_certification(const CertConfig& config) {
  CertConfig sub;
  sub.solver = heuristic_subconfig(config.solver);
  sub.max_regions = config.max_regions;
  return sub;
}

bool is_new_solution(const UpperBound& found, const AffineMap& x_bar) {
  return found.x.max_coef_diff(x_bar) > tol::kCoef;
}

}  // namespace

void CertConfig::validate(const MpProblem& problem) const {
  solver.validate(problem);
  if (max_regions < 1) throw ContractError("region budget must be >= 1");
  if (mode == CertMode::conservative) {
    if (!problem.is_qp()) throw ContractError("conservative mode applies to MIQPs only");
    if (solver.node_rule == NodeRule::bf) throw ContractError("conservative mode requires DF or BrF node selection");
    if (solver.use_eps) throw ContractError("conservative mode does not support ε-dominance");
  } else if (problem.is_qp() && problem.n_b > 0) {
    if (!quadratic_regions) throw ContractError("exact MIQP certification needs quadratic regions enabled");
    if (problem.n_theta() > 3) throw ContractError("exact MIQP certification is limited to n_theta <= 3");
  }
}

double CertifiedRegion::J_at(const Vec& theta) const {
  double best = kInf;
  for (const UpperBound& u : upper) best = std::min(best, u.J.eval(theta));
  return best;
}

std::optional<Vec> CertifiedRegion::x_at(const Vec& theta) const {
  std::optional<Vec> x;
  double best = kInf;
  for (const UpperBound& u : upper) {
    const double v = u.J.eval(theta);
    if (!x || v < best) {
      best = v;
      x = u.x.eval(theta);
    }
  }
  return x;
}

AffineApprox approximate(const QuadForm& d, const Polyhedron& P, ApproxKind kind) {
  const QuadDiff diff = QuadDiff::of(d);
  switch (kind) {
    case ApproxKind::atomic:
      return approx_atomic(diff, P);
    case ApproxKind::under:
      return approx_under(diff, P);
    case ApproxKind::mccormick:
      return approx_mccormick(diff, P);
  }
  return approx_atomic(diff, P);
}

std::vector<ScorePiece> most_inf_score_cert(const AffineMap& x, const RegionSet& region, int max_cells) {
  std::vector<ScorePiece> out;
  const int k = x.rows();
  for_each_cell(region, max_cells, [&](RegionOracle& o) {
    ScorePiece piece{{}, Mat(k, x.dim()), Vec(k)};
    for (int i = 0; i < k; ++i) {
      QuadForm h = row_form(x, i);
      h.S -= 0.5;
      if (o.decide(h)) {
        piece.C.row(i) = x.F.row(i);
        piece.d(i) = x.g(i);
      } else {
        piece.C.row(i) = -x.F.row(i);
        piece.d(i) = 1.0 - x.g(i);
      }
    }
    piece.set = o.region();
    out.push_back(std::move(piece));
  });
  return out;
}

std::vector<BranchPiece> branch_ind_cert(const AffineMap& x, const IndexList& slots, const RegionSet& region,
                                         BranchRule rule, int max_cells) {
  if (slots.empty() || x.rows() != static_cast<int>(slots.size())) {
    throw ContractError("branch_ind_cert: empty or inconsistent candidate set");
  }
  if (rule == BranchRule::fb) return {{region, slots[0]}};
  std::vector<BranchPiece> out;
  for (const ScorePiece& sp : most_inf_score_cert(x, region, max_cells)) {
    for_each_cell(sp.set, max_cells, [&](RegionOracle& o) {
      int best = 0;
      for (int i = 1; i < x.rows(); ++i) {
        QuadForm h = QuadForm::affine(sp.C.row(best) - sp.C.row(i), sp.d(best) - sp.d(i));
        h.S += tol::kTie;
        if (o.decide(h)) best = i;
      }
      out.push_back({o.region(), slots[best]});
    });
  }
  return out;
}

std::vector<SortPiece> sort_cert(const RegionSet& region, const std::deque<CertNode>& T, const CertNode& child0,
                                 const CertNode& child1, NodeRule rule, ChildOrder order, int max_cells) {
  const int d = region.dim();
  std::vector<SortPiece> out;
  const QuadForm rho = priority_form(child0, rule, d);
  for_each_cell(region, max_cells, [&](RegionOracle& o) {
    size_t pos = T.size();
    for (size_t i = 0; i < T.size(); ++i) {
      QuadForm h = rho - priority_form(T[i], rule, d);
      h.S -= tol::kTie;
      if (o.decide(h)) {
        pos = i;
        break;
      }
    }
    SortPiece piece{o.region(), T};
    CertNode a = child0, b = child1;
    if (order == ChildOrder::one_first) std::swap(a, b);
    piece.T.insert(piece.T.begin() + pos, {std::move(a), std::move(b)});
    out.push_back(std::move(piece));
  });
  return out;
}

std::vector<HeuristicPiece> lb_cert(const MpProblem& problem, const AffineMap& x_bar, const RegionSet& region,
                                    const CertConfig& config) {
  const SolverConfig& sc = config.solver;
  const CertConfig sub_config = sub_certification(config);
  const std::vector<int> pattern = binary_pattern(problem, x_bar.g);
  struct Job {
    RegionSet set;
    int r_n;
    bool adjusted;
    Kappa kappa;
  };
  std::vector<Job> jobs{{region, sc.r_n0, false, {}}};
  std::vector<HeuristicPiece> out;
  while (!jobs.empty()) {
    Job job = std::move(jobs.back());
    jobs.pop_back();
    RowVec a;
    double b;
    local_branching_row(problem, pattern, job.r_n, a, b);
    const MpProblem sub = with_cutoff(problem, x_bar, sc.eps_cutoff, &a, b);
    const Certificate c = bnb_cert(sub, job.set, sub_config);
    for (const CertifiedRegion& reg : c.regions) {
      Kappa k = job.kappa;
      k += reg.kappa;
      const bool solved = !reg.upper.empty();
      if (solved && is_new_solution(reg.upper[0], x_bar)) {
        out.push_back({reg.set, k, reg.upper[0]});
      } else if (job.adjusted) {
        out.push_back({reg.set, k, std::nullopt});
      } else {
        jobs.push_back({reg.set, neighbor_size(sc.r_n0, solved), true, k});
      }
    }
  }
  return out;
}

std::vector<HeuristicPiece> rins_cert(const MpProblem& problem, const AffineMap& x_relaxed, const AffineMap& x_bar,
                                      const RegionSet& region, const CertConfig& config) {
  Fixing root;
  for (int s = 0; s < problem.n_b; ++s) {
    const int v = problem.binary_indices[s];
    const bool agree = (x_bar.F.row(v) - x_relaxed.F.row(v)).cwiseAbs().maxCoeff() <= tol::kCoef &&
                       std::abs(x_bar.g(v) - x_relaxed.g(v)) <= tol::kCoef;
    if (agree) (x_bar.g(v) > 0.5 ? root.B1 : root.B0).push_back(s);
  }
  const int agreeing = static_cast<int>(root.B0.size() + root.B1.size());
  if (agreeing < config.solver.rins_r * problem.n_b - 1e-12) return {};
  const MpProblem sub = with_cutoff(problem, x_bar, config.solver.eps_cutoff);
  const Certificate c = bnb_cert(sub, region, sub_certification(config), root);
  std::vector<HeuristicPiece> out;
  for (const CertifiedRegion& reg : c.regions) {
    HeuristicPiece hp{reg.set, reg.kappa, std::nullopt};
    if (!reg.upper.empty() && is_new_solution(reg.upper[0], x_bar)) hp.found = reg.upper[0];
    out.push_back(std::move(hp));
  }
  return out;
}

std::vector<CertRegion> cut_cert(const MpProblem& problem, CertRegion region, const CertPiece& piece,
                                 const CertNode& node, const CertConfig& config) {
  const SolverConfig& sc = config.solver;
  std::vector<CertRegion> out;
  if (piece.status != RelaxStatus::optimal) {
    out.push_back(std::move(region));
    return out;
  }

  // Dominance: the part where the node is pruned leaves with an unchanged pending list.
  if (config.mode == CertMode::exact) {
    if (!region.upper.empty()) {
      QuadForm gap = piece.J.scaled(1.0 + sc.eps_r) - region.upper[0].J;
      if (sc.use_eps) gap = gap + sc.eps;
      QuadForm h = gap.scaled(-1.0);
      h.S -= tol::kDominance;
      RegionSplit sp = split_region(region.set, h);
      if (sp.le) out.push_back(with_set(region, std::move(*sp.le)));
      if (!sp.ge) return out;
      region.set = std::move(*sp.ge);
    }
  } else if (!region.upper.empty()) {
    std::vector<const UpperBound*> tests;
    if (config.loop_all_upper) {
      for (const UpperBound& u : region.upper) tests.push_back(&u);
    } else {
      const Vec center = chebyshev_center(region.set.poly).center;
      const UpperBound* best = &region.upper[0];
      for (const UpperBound& u : region.upper) {
        if (u.J.eval(center) < best->J.eval(center)) best = &u;
      }
      tests.push_back(best);
    }
    for (const UpperBound* u : tests) {
      const AffineApprox approx = approximate(piece.J - u->J, region.set.poly, config.approx);
      QuadForm h = approx.form().scaled(-1.0);
      h.S -= tol::kDominance;
      RegionSplit sp = split_region(region.set, h);
      if (sp.le) out.push_back(with_set(region, std::move(*sp.le)));
      if (!sp.ge) return out;
      region.set = std::move(*sp.ge);
    }
  }

  const IndexList cand = branch_candidates(problem, node.fix, piece.active_set);
  if (cand.empty()) {
    const UpperBound incumbent{piece.J, piece.x};
    if (config.mode == CertMode::exact) {
      region.upper = {incumbent};
    } else {
      region.upper.push_back(incumbent);
    }
    if (sc.heuristic == Heuristic::none || region.heuristic_done) {
      out.push_back(std::move(region));
      return out;
    }
    region.heuristic_done = true;
    std::vector<HeuristicPiece> found;
    if (sc.heuristic == Heuristic::lb) {
      found = lb_cert(problem, piece.x, region.set, config);
    } else if (region.root_x) {
      found = rins_cert(problem, *region.root_x, piece.x, region.set, config);
    }
    if (found.empty()) {
      out.push_back(std::move(region));
      return out;
    }
    for (HeuristicPiece& hp : found) {
      CertRegion r = with_set(region, std::move(hp.set));
      r.kappa += hp.kappa;
      if (!hp.found) {
        out.push_back(std::move(r));
        continue;
      }
      QuadForm h = hp.found->J - incumbent.J;
      h.S += tol::kDominance;
      RegionSplit sp = split_region(r.set, h);
      if (sp.le) {
        CertRegion improved = with_set(r, std::move(*sp.le));
        improved.upper = {*hp.found};
        out.push_back(std::move(improved));
      }
      if (sp.ge) out.push_back(with_set(r, std::move(*sp.ge)));
    }
    return out;
  }

  if (sc.t0 && region.branchings >= *sc.t0) {
    region.T.clear();
    region.terminated = true;
    out.push_back(std::move(region));
    return out;
  }

  const AffineMap xc = select_rows(piece.x, cand, problem);
  for (BranchPiece& bp : branch_ind_cert(xc, cand, region.set, sc.branch_rule, config.max_regions)) {
    CertNode c0, c1;
    c0.fix = c1.fix = node.fix;
    c0.fix.B0.insert(std::upper_bound(c0.fix.B0.begin(), c0.fix.B0.end(), bp.slot), bp.slot);
    c1.fix.B1.insert(std::upper_bound(c1.fix.B1.begin(), c1.fix.B1.end(), bp.slot), bp.slot);
    c0.parent_J = c1.parent_J = piece.J;
    if (sc.warm_start && problem.is_qp()) c0.warm_set = c1.warm_set = piece.active_set;
    for (SortPiece& sp : sort_cert(bp.set, region.T, c0, c1, sc.node_rule, sc.order, config.max_regions)) {
      CertRegion r = with_set(region, std::move(sp.set));
      r.T = std::move(sp.T);
      ++r.branchings;
      if (sc.m0) {
        while (r.T.size() > static_cast<size_t>(*sc.m0)) r.T.pop_back();
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

Certificate bnb_cert(const MpProblem& problem, const RegionSet& region, const CertConfig& config, const Fixing& root) {
  config.validate(problem);
  const int d = problem.n_theta();
  if (region.dim() != d) throw ContractError("region dimension differs from n_theta");
  Certificate cert;
  cert.conservative = config.mode == CertMode::conservative;
  cert.n_theta = d;
  cert.domain = region.poly;

  RelaxCache cache(problem);
  std::vector<CertRegion> stack(1);
  stack[0].set = region;
  stack[0].T.push_back(CertNode{root, constant_form(d, -kInf), std::nullopt});
  long created = 1;
  while (!stack.empty()) {
    CertRegion R = std::move(stack.back());
    stack.pop_back();
    const bool limit_hit = config.solver.node_limit && R.kappa.nodes >= *config.solver.node_limit;
    if (R.T.empty() || R.terminated || limit_hit) {
      cert.regions.push_back({std::move(R.set), R.kappa, std::move(R.upper)});
      continue;
    }
    const CertNode node = std::move(R.T.front());
    R.T.pop_front();
    const bool is_root = R.kappa.nodes == 0;
    for (const CertPiece& piece : cert_relaxation(cache, node.fix, R.set, node.warm_set, config.max_regions)) {
      CertRegion r = with_set(R, piece.region);
      r.kappa.iterations += piece.kappa;
      r.kappa.nodes += 1;
      if (is_root && piece.status == RelaxStatus::optimal) r.root_x = piece.x;
      for (CertRegion& next : cut_cert(problem, std::move(r), piece, node, config)) {
        if (++created > config.max_regions) throw SolverError("region budget exceeded");
        stack.push_back(std::move(next));
      }
    }
  }
  return cert;
}

Certificate bnb_cert(const MpProblem& problem, const CertConfig& config) {
  return bnb_cert(problem, RegionSet(problem.theta0), config);
}

}  // namespace bbcert
