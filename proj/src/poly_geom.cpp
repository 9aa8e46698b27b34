#include "bbcert/poly_geom.hpp"

#include "bbcert/lp.hpp"

#include <algorithm>
#include <cmath>

namespace bbcert {
namespace {

constexpr double kRadiusCap = 1e9;

Polyhedron with_box(const Polyhedron& P, const Vec& lo, const Vec& hi) {
  const int d = P.dim();
  Polyhedron out;
  out.At.resize(P.rows() + 2 * d, d);
  out.bt.resize(P.rows() + 2 * d);
  out.At.topRows(P.rows()) = P.At;
  out.bt.head(P.rows()) = P.bt;
  for (int i = 0; i < d; ++i) {
    out.At.row(P.rows() + 2 * i).setZero();
    out.At(P.rows() + 2 * i, i) = -1.0;
    out.bt(P.rows() + 2 * i) = -lo(i);
    out.At.row(P.rows() + 2 * i + 1).setZero();
    out.At(P.rows() + 2 * i + 1, i) = 1.0;
    out.bt(P.rows() + 2 * i + 1) = hi(i);
  }
  return out;
}

// Chebyshev LP with free radius; returns nullopt if the polyhedron is empty beyond kFeas.
std::optional<Ball> chebyshev_raw(const Polyhedron& P) {
  const int d = P.dim();
  const int m = P.rows();
  Mat G(m + 1, d + 1);
  Vec h(m + 1);
  for (int i = 0; i < m; ++i) {
    G.row(i).head(d) = P.At.row(i);
    G(i, d) = P.At.row(i).norm();
    h(i) = P.bt(i);
  }
  G.row(m).setZero();
  G(m, d) = 1.0;
  h(m) = kRadiusCap;
  Vec c = Vec::Zero(d + 1);
  c(d) = -1.0;
  const lp::Result r = lp::minimize(c, G, h);
  if (r.status != lp::Status::optimal) return std::nullopt;
  const double radius = r.x(d);
  if (radius < -tol::kFeas) return std::nullopt;
  return Ball{r.x.head(d), std::max(radius, 0.0)};
}

double min_eigenvalue(const Mat& Q) {
  if (Q.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

Polyhedron::Polyhedron(Mat At_, Vec bt_) : At(std::move(At_)), bt(std::move(bt_)) {
  if (At.rows() != bt.size()) throw ContractError("polyhedron: row count mismatch");
}

Polyhedron Polyhedron::box(const Vec& lower, const Vec& upper) {
  Polyhedron empty;
  empty.At.resize(0, lower.size());
  empty.bt.resize(0);
  return with_box(empty, lower, upper);
}

bool Polyhedron::contains(const Vec& theta, double tol) const {
  for (int i = 0; i < rows(); ++i) {
    const double nrm = At.row(i).norm();
    if (nrm == 0.0) {
      if (bt(i) < -tol) return false;
      continue;
    }
    if (At.row(i).dot(theta) - bt(i) > tol * nrm) return false;
  }
  return true;
}

bool RegionSet::contains(const Vec& theta, double tol) const {
  if (!poly.contains(theta, tol)) return false;
  for (const auto& q : quads) {
    if (q.eval(theta) > tol) return false;
  }
  return true;
}

Polyhedron intersect_halfspace(const Polyhedron& P, const RowVec& a, double b) {
  if (a.size() != P.dim()) throw ContractError("intersect_halfspace: dimension mismatch");
  Polyhedron out;
  out.At.resize(P.rows() + 1, P.dim());
  out.bt.resize(P.rows() + 1);
  out.At.topRows(P.rows()) = P.At;
  out.At.row(P.rows()) = a;
  out.bt.head(P.rows()) = P.bt;
  out.bt(P.rows()) = b;
  return out;
}

bool is_empty(const Polyhedron& P) {
  Vec h = P.bt;
  for (int i = 0; i < P.rows(); ++i) h(i) += tol::kFeas * P.At.row(i).norm();
  const lp::Result r = lp::minimize(Vec::Zero(P.dim()), P.At, h);
  return r.status == lp::Status::infeasible;
}

bool is_empty(const RegionSet& P) {
  if (P.quads.empty()) return is_empty(P.poly);
  const PointSearch s = find_point(P, -tol::kFeas);
  return !s.point.has_value() && !s.exhausted;
}

Ball chebyshev_center(const Polyhedron& P) {
  auto ball = chebyshev_raw(P);
  if (!ball) throw SolverError("empty region");
  return *ball;
}

std::vector<std::pair<double, double>> bounding_box(const Polyhedron& P) {
  const int d = P.dim();
  const auto ball = chebyshev_raw(P);
  if (!ball) throw SolverError("empty region");
  std::vector<std::pair<double, double>> out(d);
  for (int i = 0; i < d; ++i) {
    Vec c = Vec::Zero(d);
    c(i) = 1.0;
    const lp::Result lo = lp::minimize(c, P.At, P.bt, &ball->center);
    const lp::Result hi = lp::minimize(-c, P.At, P.bt, &ball->center);
    if (lo.status != lp::Status::optimal || hi.status != lp::Status::optimal) {
      throw SolverError("unbounded region");
    }
    out[i] = {lo.value, -hi.value};
  }
  return out;
}

Polyhedron remove_redundant(const Polyhedron& P) {
  const auto ball = chebyshev_raw(P);
  if (!ball) return P;
  std::vector<int> keep;
  std::vector<bool> dropped(P.rows(), false);
  for (int i = 0; i < P.rows(); ++i) {
    const double nrm = P.At.row(i).norm();
    if (nrm < 1e-14) {
      dropped[i] = true;
      continue;
    }
    // Row i is redundant if maximizing it over the other kept rows (plus a slack copy of
    // row i) stays within its bound.
    std::vector<int> others;
    for (int j = 0; j < P.rows(); ++j) {
      if (j != i && !dropped[j]) others.push_back(j);
    }
    Mat G(others.size() + 1, P.dim());
    Vec h(others.size() + 1);
    for (size_t k = 0; k < others.size(); ++k) {
      G.row(k) = P.At.row(others[k]);
      h(k) = P.bt(others[k]);
    }
    G.row(others.size()) = P.At.row(i);
    h(others.size()) = P.bt(i) + 1.0 * nrm;
    const lp::Result r = lp::minimize(-P.At.row(i).transpose(), G, h, &ball->center);
    if (r.status == lp::Status::optimal && -r.value <= P.bt(i) + 1e-10 * nrm) {
      dropped[i] = true;
    } else {
      keep.push_back(i);
    }
  }
  Polyhedron out;
  out.At.resize(keep.size(), P.dim());
  out.bt.resize(keep.size());
  for (size_t k = 0; k < keep.size(); ++k) {
    out.At.row(k) = P.At.row(keep[k]);
    out.bt(k) = P.bt(keep[k]);
  }
  return out;
}

PointSearch find_point(const RegionSet& R, double margin, int box_budget) {
  PointSearch out;
  if (R.quads.empty()) {
    if (margin <= 0) {
      if (!is_empty(R.poly)) {
        const auto ball = chebyshev_raw(R.poly);
        if (ball) out.point = ball->center;
      }
      return out;
    }
    const auto ball = chebyshev_raw(R.poly);
    if (ball && ball->radius >= margin) out.point = ball->center;
    return out;
  }

  const int d = R.dim();
  std::vector<std::pair<double, double>> bb;
  try {
    bb = bounding_box(R.poly);
  } catch (const SolverError&) {
    return out;
  }
  std::vector<double> lam_min;
  for (const auto& q : R.quads) lam_min.push_back(std::min(0.0, min_eigenvalue(q.Q)));
  const double poly_margin = std::max(margin, 0.0);
  const double quad_margin = margin;

  struct Box {
    Vec lo, hi;
  };
  std::vector<Box> stack;
  Box root{Vec(d), Vec(d)};
  for (int i = 0; i < d; ++i) {
    root.lo(i) = bb[i].first;
    root.hi(i) = bb[i].second;
  }
  stack.push_back(root);
  int used = 0;
  while (!stack.empty()) {
    if (++used > box_budget) {
      out.exhausted = true;
      return out;
    }
    const Box B = stack.back();
    stack.pop_back();
    const Polyhedron PB = with_box(R.poly, B.lo, B.hi);
    const auto ball = chebyshev_raw(PB);
    if (!ball || ball->radius < poly_margin) continue;
    const Vec& c = ball->center;
    bool all_ok = true;
    bool prune = false;
    const double diag2 = (B.hi - B.lo).squaredNorm();
    for (size_t k = 0; k < R.quads.size(); ++k) {
      const QuadCut& q = R.quads[k];
      const double qc = q.eval(c);
      if (qc > -quad_margin) all_ok = false;
      const Vec grad = (q.Q + q.Q.transpose()) * c + q.R.transpose();
      const lp::Result lin = lp::minimize(grad, PB.At, PB.bt, &c);
      if (lin.status != lp::Status::optimal) continue;
      const double lower = qc + (lin.value - grad.dot(c)) + lam_min[k] * diag2;
      if (lower > -quad_margin) {
        prune = true;
        break;
      }
    }
    if (all_ok) {
      out.point = c;
      return out;
    }
    if (prune) continue;
    int axis = 0;
    (B.hi - B.lo).maxCoeff(&axis);
    if (B.hi(axis) - B.lo(axis) < 1e-7) continue;
    const double mid = 0.5 * (B.lo(axis) + B.hi(axis));
    Box left = B, right = B;
    left.hi(axis) = mid;
    right.lo(axis) = mid;
    stack.push_back(right);
    stack.push_back(left);
  }
  return out;
}

std::optional<Vec> interior_point(const RegionSet& R) {
  const PointSearch s = find_point(R, tol::kInterior);
  if (s.point) return s.point;
  if (s.exhausted) {
    // Undecided within budget: fall back to the polyhedral center.
    const auto ball = chebyshev_raw(R.poly);
    if (ball && ball->radius >= tol::kInterior) return ball->center;
  }
  return std::nullopt;
}

}  // namespace bbcert
