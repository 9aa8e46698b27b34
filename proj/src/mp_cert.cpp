#include "bbcert/mp_cert.hpp"

#include "bbcert/lp.hpp"
#include "bbcert/quad_compare.hpp"

#include <cmath>

namespace bbcert {
namespace {

constexpr double kFlatGradient = 1e-11;

Vec reference_point(RegionSet& R) {
  if (R.hint.size() == R.dim()) return R.hint;
  if (R.quads.empty()) {
    R.hint = chebyshev_center(R.poly).center;
  } else {
    const PointSearch s = find_point(R, 0.0);
    R.hint = s.point ? *s.point : chebyshev_center(R.poly).center;
  }
  return R.hint;
}

RegionSet with_row(const RegionSet& R, const RowVec& a, double b) {
  RegionSet out(intersect_halfspace(R.poly, a, b));
  out.quads = R.quads;
  return out;
}

RegionSet with_quad(const RegionSet& R, const QuadForm& q) {
  RegionSet out(R.poly);
  out.quads = R.quads;
  out.quads.push_back(QuadCut::from_form(q));
  return out;
}

}  // namespace

QuadForm value_function(const MpProblem& problem, const Mat& X) {
  const int d = static_cast<int>(X.cols()) - 1;
  const Mat F = X.leftCols(d);
  const Vec g = X.col(d);
  QuadForm J = QuadForm::zero(d);
  if (problem.is_qp()) {
    const Mat HF = problem.H * F;
    const Mat cross = problem.f_theta.transpose() * F;
    J.Q = 0.5 * F.transpose() * HF + 0.5 * (cross + cross.transpose());
    J.Q = (0.5 * (J.Q + J.Q.transpose())).eval();
    J.R = g.transpose() * HF + problem.f.transpose() * F + g.transpose() * problem.f_theta;
    J.S = 0.5 * g.dot(problem.H * g) + problem.f.dot(g);
  } else {
    J.R = problem.c.transpose() * F;
    J.S = problem.c.dot(g);
  }
  return J;
}

KktSolution kkt_solution(const MpProblem& problem, const RelaxationSystem& sys, const IndexList& working_set) {
  const int p = sys.p();
  const int nt = sys.n_theta;
  const int w = static_cast<int>(working_set.size());
  Mat AW(w, p), bW(w, nt + 1);
  for (int i = 0; i < w; ++i) {
    const int pos = sys.position_of(working_set[i]);
    if (pos < 0) throw ContractError("working set row not in relaxation");
    AW.row(i) = sys.A.row(pos);
    bW.row(i) = sys.b_param.row(pos);
  }
  Mat x_free(p, nt + 1);
  Mat lam(w, nt + 1);
  if (problem.is_qp()) {
    if (w > 0) {
      const Mat HinvAt = sys.H_inv * AW.transpose();
      const Mat M = AW * HinvAt;
      Eigen::FullPivLU<Mat> lu(M);
      if (lu.rank() < w) throw SolverError("degenerate working set");
      lam = -lu.solve(bW + AW * (sys.H_inv * sys.f_param));
      x_free = -sys.H_inv * (sys.f_param + AW.transpose() * lam);
    } else {
      x_free = -sys.H_inv * sys.f_param;
    }
  } else {
    if (w != p) throw SolverError("degenerate working set");
    if (p > 0) {
      Eigen::FullPivLU<Mat> lu(AW);
      if (lu.rank() < p) throw SolverError("degenerate working set");
      x_free = lu.solve(bW);
      lam.setZero();
      lam.col(nt) = -AW.transpose().fullPivLu().solve(sys.c);
    }
  }
  const Mat X = expand_solution(sys, x_free);
  return {AffineMap::from_packed(X), AffineMap::from_packed(lam), value_function(problem, X)};
}

RegionSplit split_region(const RegionSet& R_in, const QuadForm& h) {
  RegionSet R = R_in;
  RegionSplit out;
  const Vec anchor = reference_point(R);
  const double h_anchor = h.eval(anchor);
  const bool affine = h.is_affine();
  const double gnorm = h.R.norm() + (affine ? 0.0 : h.Q.norm());
  if (gnorm <= kFlatGradient) {
    (h.S <= 0 ? out.le : out.ge) = R;
    return out;
  }
  const double delta = tol::kInterior * gnorm;
  bool le_ok = false, ge_ok = false;
  Vec at_min = anchor, at_max = anchor;
  RegionSet le_set, ge_set;
  if (affine) {
    le_set = with_row(R, h.R, -h.S);
    ge_set = with_row(R, -h.R, h.S);
  } else {
    le_set = with_quad(R, h);
    ge_set = with_quad(R, h.scaled(-1.0));
  }

  if (R.quads.empty()) {
    if (affine) {
      if (h_anchor < -delta) {
        le_ok = true;
      } else {
        const lp::Result r = lp::minimize(h.R.transpose(), R.poly.At, R.poly.bt, &anchor);
        if (r.status == lp::Status::optimal && r.value + h.S < -delta) {
          le_ok = true;
          at_min = r.x;
        }
      }
      if (h_anchor > delta) {
        ge_ok = true;
      } else {
        const lp::Result r = lp::minimize(-h.R.transpose(), R.poly.At, R.poly.bt, &anchor);
        if (r.status == lp::Status::optimal && -r.value + h.S > delta) {
          ge_ok = true;
          at_max = r.x;
        }
      }
    } else {
      const QuadMin lo = quad_argmin(QuadDiff::of(h), R.poly);
      const QuadMin hi = quad_argmin(QuadDiff::of(h.scaled(-1.0)), R.poly);
      if (lo.value < -delta) {
        le_ok = true;
        at_min = lo.argmin;
      }
      if (-hi.value > delta) {
        ge_ok = true;
        at_max = hi.argmin;
      }
    }
  } else {
    const PointSearch sl = find_point(le_set, tol::kInterior);
    const PointSearch sg = find_point(ge_set, tol::kInterior);
    le_ok = sl.point.has_value() || sl.exhausted;
    ge_ok = sg.point.has_value() || sg.exhausted;
    if (sl.point) at_min = *sl.point;
    if (sg.point) at_max = *sg.point;
  }

  if (le_ok && ge_ok && affine && R.quads.empty()) {
    // Both sides reach past the band; additionally require an inscribed ball so that no
    // sliver thinner than the decision band survives as a region of its own.
    le_ok = chebyshev_center(le_set.poly).radius >= tol::kKeepRadius;
    ge_ok = chebyshev_center(ge_set.poly).radius >= tol::kKeepRadius;
  }
  if (le_ok && ge_ok) {
    le_set.hint = at_min;
    ge_set.hint = at_max;
    out.le = std::move(le_set);
    out.ge = std::move(ge_set);
  } else if (le_ok) {
    out.le = R;
  } else if (ge_ok) {
    out.ge = R;
  } else {
    // The whole set lies inside the decision band: decide where a validator would probe it.
    const double h_center = R.quads.empty() ? h.eval(chebyshev_center(R.poly).center) : h_anchor;
    (h_center <= 0 ? out.le : out.ge) = R;
  }
  return out;
}

RegionOracle::RegionOracle(RegionSet region, std::vector<bool> script)
    : region_(std::move(region)), script_(std::move(script)) {}

bool RegionOracle::nonpositive(const RowVec& h) {
  if (pos_ < script_.size()) return script_[pos_++];
  const int d = region_.dim();
  return decide(QuadForm::affine(h.head(d), h(d)));
}

bool RegionOracle::decide(const QuadForm& h) {
  if (pos_ < script_.size()) return script_[pos_++];
  RegionSplit sp = split_region(region_, h);
  bool out;
  if (sp.split()) {
    std::vector<bool> alt = script_;
    alt.push_back(false);
    forks_.push_back({std::move(alt), std::move(*sp.ge)});
    region_ = std::move(*sp.le);
    out = true;
  } else {
    out = sp.le.has_value();
    region_ = out ? std::move(*sp.le) : std::move(*sp.ge);
  }
  script_.push_back(out);
  ++pos_;
  return out;
}

void for_each_cell(const RegionSet& region, int max_cells, const std::function<void(RegionOracle&)>& body) {
  std::vector<RegionOracle::Fork> stack;
  stack.push_back({{}, region});
  int cells = 0;
  while (!stack.empty()) {
    RegionOracle::Fork job = std::move(stack.back());
    stack.pop_back();
    if (++cells > max_cells) throw SolverError("certification budget exceeded");
    RegionOracle oracle(std::move(job.region), std::move(job.script));
    body(oracle);
    for (auto& f : oracle.forks()) stack.push_back(std::move(f));
  }
}

std::vector<CertPiece> cert_relaxation(RelaxCache& cache, const Fixing& node, const RegionSet& region,
                                       const std::optional<IndexList>& warm_start, int max_pieces) {
  const MpProblem& problem = cache.problem();
  const RelaxCache::Entry& e = cache.get(node);
  const RelaxationSystem& sys = e.sys;
  IndexList warm;
  if (warm_start) {
    for (int id : *warm_start) {
      const int pos = sys.position_of(id);
      if (pos >= 0) warm.push_back(pos);
    }
  }
  std::vector<CertPiece> pieces;
  for_each_cell(region, max_pieces, [&](RegionOracle& oracle) {
    const EngineResult er = problem.is_qp() ? run_qp(sys, sys.b_param, sys.f_param, warm, oracle)
                                            : run_lp(sys, sys.b_param, *e.phase1, oracle);
    CertPiece piece;
    piece.region = oracle.region();
    piece.kappa = er.iterations;
    if (er.feasible) {
      piece.status = RelaxStatus::optimal;
      const Mat X = expand_solution(sys, er.x);
      piece.x = AffineMap::from_packed(X);
      piece.J = value_function(problem, X);
      for (int pos : er.working) piece.active_set.push_back(sys.row_ids[pos]);
    } else {
      piece.J = QuadForm::inf(sys.n_theta);
    }
    pieces.push_back(std::move(piece));
  });
  return pieces;
}

std::vector<CertPiece> cert_relaxation(const MpProblem& problem, const Fixing& node, const RegionSet& region,
                                       const std::optional<IndexList>& warm_start, int max_pieces) {
  RelaxCache cache(problem);
  return cert_relaxation(cache, node, region, warm_start, max_pieces);
}

}  // namespace bbcert
