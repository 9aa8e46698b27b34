#include "bbcert/lp.hpp"

#include <cmath>

namespace bbcert::lp {
namespace {

constexpr double kPiv = 1e-10;
constexpr double kCost = 1e-10;

// Tableau layout: rows [0, m) constraints, row m objective (reduced costs, rhs = -value).
struct Tableau {
  Mat T;
  std::vector<int> basis;
  int rhs_col() const { return static_cast<int>(T.cols()) - 1; }
  int rows() const { return static_cast<int>(T.rows()) - 1; }

  void pivot(int r, int j) {
    T.row(r) /= T(r, j);
    for (int i = 0; i < T.rows(); ++i) {
      if (i != r && T(i, j) != 0.0) T.row(i) -= T(i, j) * T.row(r);
    }
    basis[r] = j;
  }

  // Returns false on unboundedness. Columns >= col_limit never enter.
  bool optimize(int col_limit) {
    const int m = rows();
    const int rhs = rhs_col();
    int degenerate = 0;
    const int max_iter = 100 * (m + col_limit + 10);
    for (int it = 0; it < max_iter; ++it) {
      const bool bland = degenerate > 30;
      int enter = -1;
      double best = -kCost;
      for (int j = 0; j < col_limit; ++j) {
        if (T(m, j) < best) {
          enter = j;
          if (bland) break;
          best = T(m, j);
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double ratio = kInf;
      for (int i = 0; i < m; ++i) {
        if (T(i, enter) <= kPiv) continue;
        const double q = T(i, rhs) / T(i, enter);
        if (q < ratio - 1e-12 || (q <= ratio + 1e-12 && leave >= 0 && basis[i] < basis[leave])) {
          ratio = q;
          leave = i;
        }
      }
      if (leave < 0) return false;
      degenerate = ratio <= 1e-12 ? degenerate + 1 : 0;
      pivot(leave, enter);
    }
    throw SolverError("lp: iteration limit");
  }
};

Result solve_shifted(const Vec& c, const Mat& G, const Vec& h) {
  const int d = static_cast<int>(G.cols());
  Result res;

  // Normalize rows; drop zero rows after checking them.
  std::vector<int> keep;
  Mat Gn(G.rows(), d);
  Vec hn(G.rows());
  for (int i = 0; i < G.rows(); ++i) {
    const double nrm = G.row(i).norm();
    if (nrm < 1e-14) {
      if (h(i) < -tol::kFeas) return res;
      continue;
    }
    Gn.row(keep.size()) = G.row(i) / nrm;
    hn(keep.size()) = h(i) / nrm;
    keep.push_back(i);
  }
  const int m = static_cast<int>(keep.size());
  Gn.conservativeResize(m, d);
  hn.conservativeResize(m);
  std::vector<int> art_rows;
  for (int i = 0; i < m; ++i) {
    if (hn(i) < 0) art_rows.push_back(i);
  }
  const int n_art = static_cast<int>(art_rows.size());
  const int n_struct = 2 * d + m;
  const int ncol = n_struct + n_art;

  Tableau tb;
  tb.T = Mat::Zero(m + 1, ncol + 1);
  tb.basis.assign(m, -1);
  for (int i = 0; i < m; ++i) {
    tb.T.block(i, 0, 1, d) = Gn.row(i);
    tb.T.block(i, d, 1, d) = -Gn.row(i);
    tb.T(i, 2 * d + i) = 1.0;
    tb.T(i, ncol) = hn(i);
  }
  for (int k = 0; k < n_art; ++k) {
    const int i = art_rows[k];
    tb.T.row(i).head(n_struct) *= -1.0;
    tb.T(i, ncol) *= -1.0;
    tb.T(i, n_struct + k) = 1.0;
    tb.basis[i] = n_struct + k;
  }
  for (int i = 0; i < m; ++i) {
    if (tb.basis[i] < 0) tb.basis[i] = 2 * d + i;
  }

  if (n_art > 0) {
    tb.T.row(m).segment(n_struct, n_art).setOnes();
    for (int i : art_rows) tb.T.row(m) -= tb.T.row(i);
    tb.optimize(ncol);
    const double scale = 1.0 + (m > 0 ? hn.cwiseAbs().maxCoeff() : 0.0);
    if (-tb.T(m, ncol) > 1e-9 * scale) return res;
    // Drive remaining artificials out of the basis.
    for (int i = 0; i < m; ++i) {
      if (tb.basis[i] < n_struct) continue;
      for (int j = 0; j < n_struct; ++j) {
        if (std::abs(tb.T(i, j)) > 1e-9) {
          tb.pivot(i, j);
          break;
        }
      }
    }
  }

  Vec cost = Vec::Zero(ncol);
  cost.head(d) = c;
  cost.segment(d, d) = -c;
  tb.T.row(m).setZero();
  tb.T.row(m).head(ncol) = cost.transpose();
  for (int i = 0; i < m; ++i) {
    const double cb = cost(tb.basis[i]);
    if (cb != 0.0) tb.T.row(m) -= cb * tb.T.row(i);
  }
  if (!tb.optimize(n_struct)) {
    res.status = Status::unbounded;
    res.value = -kInf;
    return res;
  }
  Vec z = Vec::Zero(ncol);
  for (int i = 0; i < m; ++i) z(tb.basis[i]) = tb.T(i, ncol);
  res.status = Status::optimal;
  res.x = z.head(d) - z.segment(d, d);
  res.value = c.dot(res.x);
  return res;
}

}  // namespace

Result minimize(const Vec& c, const Mat& G, const Vec& h, const Vec* start) {
  if (G.cols() != c.size() || G.rows() != h.size()) throw ContractError("lp: dimension mismatch");
  if (start != nullptr) {
    Vec hs = h - G * (*start);
    if (hs.size() == 0 || hs.minCoeff() >= -1e-9) {
      hs = hs.cwiseMax(0.0);
      Result r = solve_shifted(c, G, hs);
      if (r.status == Status::optimal) {
        r.x += *start;
        r.value = c.dot(r.x);
      }
      return r;
    }
  }
  return solve_shifted(c, G, h);
}

}  // namespace bbcert::lp
