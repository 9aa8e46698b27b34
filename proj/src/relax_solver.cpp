#include "bbcert/relax_solver.hpp"

#include <algorithm>
#include <cmath>

namespace bbcert {
namespace {

constexpr int kMaxIterations = 10000;
constexpr int kBlandAfter = 50;

std::uint64_t mask_of(const IndexList& slots) {
  std::uint64_t m = 0;
  for (int s : slots) m |= (std::uint64_t{1} << s);
  return m;
}

RowVec shifted(const RowVec& h, double c) {
  RowVec out = h;
  out(out.size() - 1) += c;
  return out;
}

Mat gather_rows(const Mat& M, const IndexList& idx) {
  Mat out(idx.size(), M.cols());
  for (size_t k = 0; k < idx.size(); ++k) out.row(k) = M.row(idx[k]);
  return out;
}

// Most violated row outside the working set, ties to the lowest position; -1 if none.
int choose_violated(const Mat& slack, const std::vector<bool>& in_working, bool first_only,
                    DecisionOracle& oracle) {
  int r = -1;
  for (int i = 0; i < slack.rows(); ++i) {
    if (in_working[i]) continue;
    if (!oracle.nonpositive(shifted(slack.row(i), tol::kViolation))) continue;
    if (r < 0) {
      r = i;
      if (first_only) break;
      continue;
    }
    if (oracle.nonpositive(shifted(slack.row(i) - slack.row(r), tol::kTie))) r = i;
  }
  return r;
}

}  // namespace

int RelaxationSystem::position_of(int row_id) const {
  auto it = std::lower_bound(row_ids.begin(), row_ids.end(), row_id);
  if (it == row_ids.end() || *it != row_id) return -1;
  return static_cast<int>(it - row_ids.begin());
}

RelaxationSystem build_relaxation(const MpProblem& problem, const Fixing& node) {
  const int n = problem.n();
  const int m = problem.m();
  const int nb = problem.n_b;
  const int nt = problem.n_theta();
  std::vector<int> fixed_value(nb, -1);
  for (int s : node.B0) {
    if (s < 0 || s >= nb) throw ContractError("fixing slot out of range");
    fixed_value[s] = 0;
  }
  for (int s : node.B1) {
    if (s < 0 || s >= nb) throw ContractError("fixing slot out of range");
    if (fixed_value[s] == 0) throw ContractError("slot fixed to both 0 and 1");
    fixed_value[s] = 1;
  }

  RelaxationSystem sys;
  sys.kind = problem.kind;
  sys.n = n;
  sys.n_theta = nt;
  sys.m_original = problem.m();
  sys.x_fixed = Vec::Zero(n);
  std::vector<int> var_slot(n, -1);
  for (int s = 0; s < nb; ++s) var_slot[problem.binary_indices[s]] = s;
  std::vector<int> col_of(n, -1);
  for (int v = 0; v < n; ++v) {
    const int s = var_slot[v];
    if (s >= 0 && fixed_value[s] >= 0) {
      sys.x_fixed(v) = fixed_value[s];
    } else {
      col_of[v] = static_cast<int>(sys.free_vars.size());
      sys.free_vars.push_back(v);
    }
  }
  for (int s = 0; s < nb; ++s) {
    if (fixed_value[s] < 0) sys.unfixed_slots.push_back(s);
  }
  const int p = sys.p();
  const int nu = static_cast<int>(sys.unfixed_slots.size());
  const int rows = m + 2 * nu;

  sys.A = Mat::Zero(rows, p);
  sys.b_param = Mat::Zero(rows, nt + 1);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < p; ++k) sys.A(i, k) = problem.A(i, sys.free_vars[k]);
    sys.b_param.row(i).head(nt) = problem.W.row(i);
    sys.b_param(i, nt) = problem.b(i) - problem.A.row(i).dot(sys.x_fixed);
    sys.row_ids.push_back(i);
  }
  for (int k = 0; k < nu; ++k) {
    const int s = sys.unfixed_slots[k];
    sys.A(m + k, col_of[problem.binary_indices[s]]) = -1.0;
    sys.row_ids.push_back(lower_box_row(problem, s));
  }
  for (int k = 0; k < nu; ++k) {
    const int s = sys.unfixed_slots[k];
    sys.A(m + nu + k, col_of[problem.binary_indices[s]]) = 1.0;
    sys.b_param(m + nu + k, nt) = 1.0;
    sys.row_ids.push_back(upper_box_row(problem, s));
  }

  if (problem.is_qp()) {
    sys.H.resize(p, p);
    sys.f_param.resize(p, nt + 1);
    for (int a = 0; a < p; ++a) {
      const int va = sys.free_vars[a];
      for (int b = 0; b < p; ++b) sys.H(a, b) = problem.H(va, sys.free_vars[b]);
      sys.f_param.row(a).head(nt) = problem.f_theta.row(va);
      sys.f_param(a, nt) = problem.f(va) + problem.H.row(va).dot(sys.x_fixed);
    }
    sys.H_inv = p > 0 ? Mat(sys.H.llt().solve(Mat::Identity(p, p))) : Mat(0, 0);
  } else {
    sys.c.resize(p);
    for (int a = 0; a < p; ++a) sys.c(a) = problem.c(sys.free_vars[a]);
  }
  return sys;
}

LpPhase1 lp_phase1(const RelaxationSystem& sys) {
  LpPhase1 out;
  const int p = sys.p();
  const int R = sys.rows();
  if (p == 0) return out;
  // Tableau over [λ (R) | artificials (p) | rhs]; rows are the equations A'λ = -c.
  Mat T = Mat::Zero(p + 1, R + p + 1);
  std::vector<int> basis(p);
  for (int j = 0; j < p; ++j) {
    const double sign = -sys.c(j) < 0 ? -1.0 : 1.0;
    T.row(j).head(R) = sign * sys.A.col(j).transpose();
    T(j, R + j) = 1.0;
    T(j, R + p) = sign * -sys.c(j);
    basis[j] = R + j;
  }
  // Phase-1 objective: sum of artificials, expressed in the nonbasic columns.
  for (int j = 0; j < p; ++j) T.row(p) -= T.row(j);
  T.row(p).segment(R, p).setZero();

  auto pivot = [&](int r, int col) {
    T.row(r) /= T(r, col);
    for (int i = 0; i <= p; ++i) {
      if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
    }
    basis[r] = col;
    ++out.pivots;
  };

  // Box rows are scanned first so that a degenerate vertex prefers a basis certifying
  // integrality; original rows and then artificials follow.
  std::vector<int> scan;
  for (int j = 0; j < R; ++j)
    if (sys.row_ids[j] >= sys.m_original) scan.push_back(j);
  for (int j = 0; j < R; ++j)
    if (sys.row_ids[j] < sys.m_original) scan.push_back(j);
  for (int j = R; j < R + p; ++j) scan.push_back(j);

  for (int it = 0;; ++it) {
    if (it > kMaxIterations) throw SolverError("phase 1 iteration limit");
    int enter = -1;
    for (int j : scan) {
      if (T(p, j) < -1e-10) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    int leave = -1;
    double ratio = kInf;
    for (int i = 0; i < p; ++i) {
      if (T(i, enter) <= 1e-10) continue;
      const double q = T(i, R + p) / T(i, enter);
      if (q < ratio - 1e-13 || (q <= ratio + 1e-13 && leave >= 0 && basis[i] < basis[leave])) {
        ratio = q;
        leave = i;
      }
    }
    if (leave < 0) break;  // cannot happen for a phase-1 objective bounded below by 0
    pivot(leave, enter);
  }
  const double scale = 1.0 + sys.c.cwiseAbs().maxCoeff();
  if (-T(p, R + p) > 1e-9 * scale) throw SolverError("unbounded relaxation");
  for (int i = 0; i < p; ++i) {
    if (basis[i] < R) continue;
    int col = -1;
    for (int k = 0; k < R; ++k) {
      const int j = scan[k];
      if (std::abs(T(i, j)) > 1e-9) {
        col = j;
        break;
      }
    }
    if (col < 0) throw SolverError("degenerate working set");
    pivot(i, col);
  }
  out.basis = basis;
  std::sort(out.basis.begin(), out.basis.end());
  return out;
}

EngineResult run_lp(const RelaxationSystem& sys, const Mat& b, const LpPhase1& start, DecisionOracle& oracle) {
  EngineResult res;
  const int p = sys.p();
  const int R = sys.rows();
  const int k = static_cast<int>(b.cols());
  res.iterations = start.pivots;
  IndexList W = start.basis;
  std::vector<bool> in_w(R, false);
  for (int i : W) in_w[i] = true;
  int degenerate = 0;
  for (int it = 0;; ++it) {
    if (it > kMaxIterations) throw SolverError("lp iteration limit");
    Mat x(p, k);
    Mat AW;
    Eigen::PartialPivLU<Mat> lu;
    if (p > 0) {
      AW = gather_rows(sys.A, W);
      lu.compute(AW);
      x = lu.solve(gather_rows(b, W));
    }
    const Mat slack = b - sys.A * x;
    const int r = choose_violated(slack, in_w, degenerate > kBlandAfter, oracle);
    if (r < 0) {
      res.feasible = true;
      res.working = W;
      res.x = x;
      return res;
    }
    if (p == 0) return res;
    // Dual ratio test; multipliers depend on c and A only.
    const Eigen::PartialPivLU<Mat> lut(AW.transpose());
    const Vec lambda = -lut.solve(sys.c);
    const Vec u = lut.solve(sys.A.row(r).transpose());
    int leave = -1;
    double ratio = kInf;
    for (int j = 0; j < p; ++j) {
      if (u(j) <= tol::kPivot) continue;
      const double q = std::max(lambda(j), 0.0) / u(j);
      if (leave < 0 || q < ratio - tol::kTie) {
        ratio = q;
        leave = j;
      }
    }
    ++res.iterations;
    if (leave < 0) return res;  // dual ray: primal infeasible
    degenerate = ratio <= 1e-12 ? degenerate + 1 : 0;
    in_w[W[leave]] = false;
    in_w[r] = true;
    W[leave] = r;
    std::sort(W.begin(), W.end());
  }
}

EngineResult run_qp(const RelaxationSystem& sys, const Mat& b, const Mat& f, const IndexList& warm,
                    DecisionOracle& oracle) {
  EngineResult res;
  const int p = sys.p();
  const int R = sys.rows();
  const int k = static_cast<int>(b.cols());
  const Mat& Hinv = sys.H_inv;

  IndexList W;
  std::vector<bool> in_w(R, false);
  Mat x(p, k);
  Mat lam(0, k);

  auto solve_eqp = [&]() {
    if (W.empty()) {
      x = -Hinv * f;
      lam.resize(0, k);
      return;
    }
    const Mat AW = gather_rows(sys.A, W);
    const Mat HinvAt = Hinv * AW.transpose();
    const Mat M = AW * HinvAt;
    lam = -M.partialPivLu().solve(gather_rows(b, W) + AW * (Hinv * f));
    x = -Hinv * (f + AW.transpose() * lam);
  };

  // Warm start: keep rows in order while they stay independent in the H^{-1} metric.
  for (int r : warm) {
    if (r < 0 || r >= R) continue;
    const Vec a = sys.A.row(r).transpose();
    const Vec v = Hinv * a;
    const double base = a.dot(v);
    double q = base;
    if (!W.empty()) {
      const Mat AW = gather_rows(sys.A, W);
      const Mat HinvAt = Hinv * AW.transpose();
      const Vec rv = (AW * HinvAt).partialPivLu().solve(AW * v);
      q = a.dot(v - HinvAt * rv);
    }
    if (base <= 0 || q <= 1e-9 * base) continue;
    W.push_back(r);
    std::sort(W.begin(), W.end());
    in_w[r] = true;
  }
  solve_eqp();
  // Restore dual feasibility: drop the most negative multiplier, ties to the lowest row.
  while (!W.empty()) {
    int j = -1;
    for (int i = 0; i < static_cast<int>(W.size()); ++i) {
      if (!oracle.nonpositive(shifted(lam.row(i), tol::kViolation))) continue;
      if (j < 0 || oracle.nonpositive(shifted(lam.row(i) - lam.row(j), tol::kTie))) j = i;
    }
    if (j < 0) break;
    in_w[W[j]] = false;
    W.erase(W.begin() + j);
    ++res.iterations;
    solve_eqp();
  }

  for (int outer = 0;; ++outer) {
    if (outer > kMaxIterations) throw SolverError("qp iteration limit");
    const Mat slack = b - sys.A * x;
    const int r = choose_violated(slack, in_w, false, oracle);
    if (r < 0) {
      res.feasible = true;
      res.working = W;
      res.x = x;
      return res;
    }
    RowVec lam_r = RowVec::Zero(k);
    const Vec a = sys.A.row(r).transpose();
    const Vec v = Hinv * a;
    for (int inner = 0;; ++inner) {
      if (inner > kMaxIterations) throw SolverError("qp iteration limit");
      Vec rvec(W.size());
      Vec proj = v;
      if (!W.empty()) {
        const Mat AW = gather_rows(sys.A, W);
        const Mat HinvAt = Hinv * AW.transpose();
        rvec = (AW * HinvAt).partialPivLu().solve(AW * v);
        proj = v - HinvAt * rvec;
      }
      const Vec z = -proj;
      const double q = a.dot(proj);
      int block = -1;
      RowVec t1;
      for (int j = 0; j < static_cast<int>(W.size()); ++j) {
        if (rvec(j) <= tol::kPivot) continue;
        const RowVec ratio = lam.row(j) / rvec(j);
        if (block < 0 || oracle.nonpositive(shifted(ratio - t1, tol::kTie))) {
          block = j;
          t1 = ratio;
        }
      }
      const bool full_possible = q > 1e-10 * a.dot(v);
      if (!full_possible && block < 0) {
        ++res.iterations;
        return res;  // infeasible
      }
      const RowVec s_r = b.row(r) - a.transpose() * x;
      bool take_full = false;
      if (full_possible) {
        const RowVec t2 = -s_r / q;
        take_full = block < 0 || oracle.nonpositive(shifted(t2 - t1, -tol::kTie));
      }
      ++res.iterations;
      if (take_full) {
        W.push_back(r);
        std::sort(W.begin(), W.end());
        in_w[r] = true;
        solve_eqp();
        break;
      }
      x += z * t1;
      lam -= rvec * t1;
      lam_r += t1;
      in_w[W[block]] = false;
      W.erase(W.begin() + block);
      Mat reduced(lam.rows() - 1, k);
      for (int i = 0, o = 0; i < lam.rows(); ++i) {
        if (i != block) reduced.row(o++) = lam.row(i);
      }
      lam = reduced;
    }
  }
}

Mat expand_solution(const RelaxationSystem& sys, const Mat& x_free) {
  const int k = static_cast<int>(x_free.cols());
  Mat X = Mat::Zero(sys.n, k);
  X.col(k - 1) = sys.x_fixed;
  for (int a = 0; a < sys.p(); ++a) X.row(sys.free_vars[a]) = x_free.row(a);
  return X;
}

RelaxCache::RelaxCache(const MpProblem& problem) : problem_(&problem) {
  if (problem.n_b > 64) throw ContractError("at most 64 binaries are supported");
}

const RelaxCache::Entry& RelaxCache::get(const Fixing& node) {
  const auto key = std::make_pair(mask_of(node.B0), mask_of(node.B1));
  auto it = entries_.find(key);
  if (it != entries_.end()) return *it->second;
  auto e = std::make_unique<Entry>();
  e->sys = build_relaxation(*problem_, node);
  if (!problem_->is_qp()) e->phase1 = lp_phase1(e->sys);
  const Entry& ref = *e;
  entries_.emplace(key, std::move(e));
  return ref;
}

double objective_value(const MpProblem& p, const Vec& x, const Vec& theta) {
  if (p.is_qp()) return 0.5 * x.dot(p.H * x) + (p.f + p.f_theta * theta).dot(x);
  return p.c.dot(x);
}

RelaxResult solve_relaxation(RelaxCache& cache, const Fixing& node, const Vec& theta,
                             const std::optional<IndexList>& warm_start) {
  const MpProblem& problem = cache.problem();
  const RelaxCache::Entry& e = cache.get(node);
  const RelaxationSystem& sys = e.sys;
  const int nt = sys.n_theta;
  const Vec b = sys.b_param.leftCols(nt) * theta + sys.b_param.col(nt);
  PointOracle oracle;
  EngineResult er;
  if (problem.is_qp()) {
    const Vec f = sys.f_param.leftCols(nt) * theta + sys.f_param.col(nt);
    IndexList warm;
    if (warm_start) {
      for (int id : *warm_start) {
        const int pos = sys.position_of(id);
        if (pos >= 0) warm.push_back(pos);
      }
    }
    er = run_qp(sys, b, f, warm, oracle);
  } else {
    er = run_lp(sys, b, *e.phase1, oracle);
  }
  RelaxResult out;
  out.iterations = er.iterations;
  if (!er.feasible) return out;
  out.status = RelaxStatus::optimal;
  out.x = expand_solution(sys, er.x).col(0);
  out.J = objective_value(problem, out.x, theta);
  for (int pos : er.working) out.active_set.push_back(sys.row_ids[pos]);
  return out;
}

RelaxResult solve_relaxation(const RelaxationSpec& spec) {
  if (spec.problem == nullptr) throw ContractError("relaxation spec without problem");
  RelaxCache cache(*spec.problem);
  return solve_relaxation(cache, spec.node, spec.theta, spec.warm_start);
}

}  // namespace bbcert
