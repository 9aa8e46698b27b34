#include "bbcert/quad_compare.hpp"

#include "bbcert/lp.hpp"

#include <algorithm>
#include <functional>

namespace bbcert {
namespace {

constexpr int kMaxFaceDim = 4;
constexpr int kMaxFacets = 40;

void consider(const QuadDiff& d, const Polyhedron& P, const Vec& theta, QuadMin& best) {
  if (!P.contains(theta, 1e-9)) return;
  const double v = d.eval(theta);
  if (v < best.value) {
    best.value = v;
    best.argmin = theta;
  }
}

QuadMin face_enumeration(const QuadDiff& d, const Polyhedron& P) {
  const int n = P.dim();
  const int m = P.rows();
  QuadMin best;
  IndexList subset;
  std::function<void(int)> visit = [&](int start) {
    const int s = static_cast<int>(subset.size());
    // Stationary point of J̃ restricted to the affine hull {G_S θ = h_S}.
    Mat G(s, n);
    Vec h(s);
    for (int i = 0; i < s; ++i) {
      G.row(i) = P.At.row(subset[i]);
      h(i) = P.bt(subset[i]);
    }
    bool independent = true;
    Vec base = Vec::Zero(n);
    Mat N = Mat::Identity(n, n);
    if (s > 0) {
      Eigen::FullPivLU<Mat> lu(G);
      lu.setThreshold(1e-10);
      independent = lu.rank() == s;
      if (independent) {
        base = G.completeOrthogonalDecomposition().solve(h);
        N = s < n ? Mat(lu.kernel()) : Mat(n, 0);
      }
    }
    if (!independent) return;
    if (N.cols() == 0) {
      consider(d, P, base, best);
    } else {
      const Mat Hr = 2.0 * N.transpose() * d.Qt * N;
      const Vec gr = N.transpose() * (2.0 * d.Qt * base + d.Rt.transpose());
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Hr + Hr.transpose()));
      const double scale = 1.0 + es.eigenvalues().cwiseAbs().maxCoeff();
      if (es.eigenvalues().cwiseAbs().minCoeff() > 1e-10 * scale) {
        const Vec y = -es.eigenvectors() *
                      (es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * gr));
        consider(d, P, base + N * y, best);
      }
    }
    if (s == n) return;
    for (int i = start; i < m; ++i) {
      subset.push_back(i);
      visit(i + 1);
      subset.pop_back();
    }
  };
  visit(0);
  return best;
}

Polyhedron clip_to_box(const Polyhedron& P, const Vec& lo, const Vec& hi) {
  Polyhedron out = P;
  for (int i = 0; i < P.dim(); ++i) {
    out = intersect_halfspace(out, RowVec::Unit(P.dim(), i), hi(i));
    out = intersect_halfspace(out, -RowVec::Unit(P.dim(), i), -lo(i));
  }
  return out;
}

// McCormick LP over θ and lifted products w_ij (i <= j). Returns value and θ part.
lp::Result mccormick_lp(const QuadDiff& d, const Polyhedron& P, const Vec& lo, const Vec& hi) {
  const int n = P.dim();
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) pairs.emplace_back(i, j);
  const int nw = static_cast<int>(pairs.size());
  const int nv = n + nw;
  std::vector<RowVec> rows;
  std::vector<double> rhs;
  auto add = [&](const RowVec& r, double b) {
    rows.push_back(r);
    rhs.push_back(b);
  };
  for (int i = 0; i < P.rows(); ++i) {
    RowVec r = RowVec::Zero(nv);
    r.head(n) = P.At.row(i);
    add(r, P.bt(i));
  }
  for (int i = 0; i < n; ++i) {
    RowVec r = RowVec::Zero(nv);
    r(i) = 1.0;
    add(r, hi(i));
    add(-r, -lo(i));
  }
  Vec cost = Vec::Zero(nv);
  cost.head(n) = d.Rt.transpose();
  for (int k = 0; k < nw; ++k) {
    const auto [i, j] = pairs[k];
    const int w = n + k;
    cost(w) = i == j ? d.Qt(i, i) : d.Qt(i, j) + d.Qt(j, i);
    const double li = lo(i), ui = hi(i), lj = lo(j), uj = hi(j);
    RowVec r = RowVec::Zero(nv);
    // w >= lj θi + li θj − li lj
    r.setZero();
    r(w) = -1;
    r(i) += lj;
    r(j) += li;
    add(r, li * lj);
    // w >= uj θi + ui θj − ui uj
    r.setZero();
    r(w) = -1;
    r(i) += uj;
    r(j) += ui;
    add(r, ui * uj);
    // w <= uj θi + li θj − li uj
    r.setZero();
    r(w) = 1;
    r(i) -= uj;
    r(j) -= li;
    add(r, -li * uj);
    // w <= lj θi + ui θj − ui lj
    r.setZero();
    r(w) = 1;
    r(i) -= lj;
    r(j) -= ui;
    add(r, -ui * lj);
    if (i == j) {
      // Tangent of θi² at the box midpoint: w >= 2aθi − a².
      const double a = 0.5 * (li + ui);
      r.setZero();
      r(w) = -1;
      r(i) = 2 * a;
      add(r, a * a);
    }
  }
  Mat G(rows.size(), nv);
  Vec h(rows.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    G.row(k) = rows[k];
    h(k) = rhs[k];
  }
  lp::Result r = lp::minimize(cost, G, h);
  if (r.status == lp::Status::optimal) r.value += d.St;
  return r;
}

}  // namespace

double mccormick_bound(const QuadDiff& d, const Polyhedron& P, const Vec& lower, const Vec& upper) {
  const lp::Result r = mccormick_lp(d, P, lower, upper);
  if (r.status == lp::Status::infeasible) return kInf;
  if (r.status != lp::Status::optimal) throw SolverError("unbounded region");
  return r.value;
}

QuadMin quad_min_spatial(const QuadDiff& d, const Polyhedron& P, double gap, int box_budget) {
  const auto bb = bounding_box(P);
  const int n = P.dim();
  struct Box {
    Vec lo, hi;
    double bound;
  };
  auto cmp = [](const Box& a, const Box& b) { return a.bound > b.bound; };
  std::vector<Box> heap;
  QuadMin best;
  Box root{Vec(n), Vec(n), -kInf};
  for (int i = 0; i < n; ++i) {
    root.lo(i) = bb[i].first;
    root.hi(i) = bb[i].second;
  }
  auto evaluate = [&](Box& B) -> bool {
    const lp::Result r = mccormick_lp(d, P, B.lo, B.hi);
    if (r.status != lp::Status::optimal) return false;
    B.bound = r.value;
    consider(d, P, r.x.head(n), best);
    const Vec center = 0.5 * (B.lo + B.hi);
    consider(d, P, center, best);
    return true;
  };
  if (!evaluate(root)) return best;
  heap.push_back(root);
  int used = 1;
  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), cmp);
    Box B = heap.back();
    heap.pop_back();
    if (B.bound >= best.value - gap) break;
    if (++used > box_budget) break;
    int axis = 0;
    (B.hi - B.lo).maxCoeff(&axis);
    const double mid = 0.5 * (B.lo(axis) + B.hi(axis));
    Box left = B, right = B;
    left.hi(axis) = mid;
    right.lo(axis) = mid;
    for (Box* child : {&left, &right}) {
      if (evaluate(*child) && child->bound < best.value - gap) {
        heap.push_back(*child);
        std::push_heap(heap.begin(), heap.end(), cmp);
      }
    }
  }
  return best;
}

QuadMin quad_argmin(const QuadDiff& d, const Polyhedron& P) {
  bounding_box(P);  // rejects unbounded and empty sets
  const Polyhedron Pr = remove_redundant(P);
  if (Pr.dim() <= kMaxFaceDim && Pr.rows() <= kMaxFacets) {
    QuadMin res = face_enumeration(d, Pr);
    if (res.value < kInf) return res;
  }
  return quad_min_spatial(d, P);
}

double quad_min(const QuadDiff& d, const Polyhedron& P) { return quad_argmin(d, P).value; }

AffineApprox approx_atomic(const QuadDiff& d, const Polyhedron& P) {
  return {RowVec::Zero(d.Rt.size()), quad_min(d, P)};
}

AffineApprox approx_under(const QuadDiff& d, const Polyhedron& P) {
  const QuadDiff pure{d.Qt, RowVec::Zero(d.Rt.size()), 0.0};
  return {d.Rt, d.St + quad_min(pure, P)};
}

AffineApprox approx_mccormick(const QuadDiff& d, const Polyhedron& P) {
  const auto bb = bounding_box(P);
  Vec lo(P.dim()), hi(P.dim());
  for (int i = 0; i < P.dim(); ++i) {
    lo(i) = bb[i].first;
    hi(i) = bb[i].second;
  }
  const QuadDiff pure{d.Qt, RowVec::Zero(d.Rt.size()), 0.0};
  return {d.Rt, d.St + mccormick_bound(pure, P, lo, hi)};
}

}  // namespace bbcert
