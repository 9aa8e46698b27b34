#include "bbcert/quad_compare.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bbcert;

namespace {

Polyhedron square(double lo, double hi) { return Polyhedron::box(Vec::Constant(2, lo), Vec::Constant(2, hi)); }

QuadDiff make(const Mat& Q, const RowVec& R, double S) { return {Q, R, S}; }

RowVec row2(double a, double b) {
  RowVec r(2);
  r << a, b;
  return r;
}

Mat diag2(double a, double b) {
  Mat D = Mat::Zero(2, 2);
  D(0, 0) = a;
  D(1, 1) = b;
  return D;
}

// Bounded polytope: the box [-1,1]^n cut by a few random halfspaces through the origin's
// neighbourhood (every cut keeps the origin strictly inside).
Polyhedron random_polytope(int n, std::mt19937& gen) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.2, 1.0);
  const int extra = 3;
  Mat At(2 * n + extra, n);
  Vec bt(2 * n + extra);
  At.topRows(n) = Mat::Identity(n, n);
  At.middleRows(n, n) = -Mat::Identity(n, n);
  bt.head(2 * n).setOnes();
  for (int i = 0; i < extra; ++i) {
    for (int k = 0; k < n; ++k) At(2 * n + i, k) = nd(gen);
    bt(2 * n + i) = ud(gen) * At.row(2 * n + i).norm();
  }
  return {At, bt};
}

QuadDiff random_diff(int n, std::mt19937& gen) {
  std::normal_distribution<double> nd;
  Mat Q(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) Q(i, k) = nd(gen);
  Q = (0.5 * (Q + Q.transpose())).eval();
  RowVec R(n);
  for (int k = 0; k < n; ++k) R(k) = nd(gen);
  return {Q, R, nd(gen)};
}

// Rejection samples from P inside its [-1,1]^n bounding cube.
std::vector<Vec> sample(const Polyhedron& P, int count, std::mt19937& gen) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  std::vector<Vec> pts;
  while (static_cast<int>(pts.size()) < count) {
    Vec t(P.dim());
    for (int k = 0; k < P.dim(); ++k) t(k) = ud(gen);
    if (P.contains(t, 0.0)) pts.push_back(t);
  }
  return pts;
}

// Dense-grid minimum over P ∩ [-1,1]^2 (an upper bound on the true minimum).
double grid_min_2d(const QuadDiff& d, const Polyhedron& P, int steps) {
  double best = kInf;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; j <= steps; ++j) {
      Vec t(2);
      t << -1.0 + 2.0 * i / steps, -1.0 + 2.0 * j / steps;
      if (P.contains(t, 1e-12)) best = std::min(best, d.eval(t));
    }
  return best;
}

}  // namespace

TEST(QuadMin, ConvexInteriorMinimum) {
  const QuadMin r = quad_argmin(make(Mat::Identity(2, 2), row2(0, 0), 0.0), square(-1, 1));
  EXPECT_NEAR(r.value, 0.0, 1e-9);
  EXPECT_NEAR(r.argmin.norm(), 0.0, 1e-6);
}

TEST(QuadMin, SaddleMinimumOnEdgeMidpoints) {
  const QuadMin r = quad_argmin(make(diag2(1, -1), row2(0, 0), 0.0), square(-1, 1));
  EXPECT_NEAR(r.value, -1.0, 1e-9);
  EXPECT_NEAR(r.argmin(0), 0.0, 1e-6);
  EXPECT_NEAR(std::abs(r.argmin(1)), 1.0, 1e-6);
}

TEST(QuadMin, ConcaveMinimumAtVertices) {
  const QuadMin r = quad_argmin(make(-Mat::Identity(2, 2), row2(0, 0), 3.0), square(-1, 1));
  EXPECT_NEAR(r.value, 1.0, 1e-9);
  EXPECT_NEAR(std::abs(r.argmin(0)), 1.0, 1e-9);
  EXPECT_NEAR(std::abs(r.argmin(1)), 1.0, 1e-9);
}

TEST(QuadMin, UnboundedRegionIsAnError) {
  Mat At(1, 2);
  At << 1, 0;
  const Polyhedron half(At, Vec::Ones(1));
  EXPECT_THROW(quad_min(make(Mat::Identity(2, 2), row2(0, 0), 0.0), half), std::exception);
}

TEST(QuadMin, MatchesDenseGridInTwoDimensions) {
  std::mt19937 gen(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Polyhedron P = random_polytope(2, gen);
    const QuadDiff d = random_diff(2, gen);
    const QuadMin r = quad_argmin(d, P);
    const double grid = grid_min_2d(d, P, 400);
    // The grid value is attained, so it bounds the global minimum from above; the gap of a
    // 0.005-spaced grid on a function with O(10) gradients stays well below 0.1.
    EXPECT_LE(r.value, grid + 1e-8) << "trial " << trial;
    EXPECT_GE(r.value, grid - 0.1) << "trial " << trial;
    EXPECT_TRUE(P.contains(r.argmin, 1e-7));
    EXPECT_NEAR(d.eval(r.argmin), r.value, 1e-6);
  }
}

TEST(QuadMin, AgreesWithSpatialBranchAndBound) {
  std::mt19937 gen(12);
  for (int n = 1; n <= 3; ++n) {
    for (int trial = 0; trial < 15; ++trial) {
      const Polyhedron P = random_polytope(n, gen);
      const QuadDiff d = random_diff(n, gen);
      const double faces = quad_min(d, P);
      const QuadMin spatial = quad_min_spatial(d, P, 1e-6, 200000);
      EXPECT_NEAR(faces, spatial.value, 1e-5) << "n=" << n << " trial " << trial;
    }
  }
}

TEST(QuadMin, LowerBoundsSamplesAndAttainsArgmin) {
  std::mt19937 gen(13);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      const Polyhedron P = random_polytope(n, gen);
      const QuadDiff d = random_diff(n, gen);
      const QuadMin r = quad_argmin(d, P);
      EXPECT_NEAR(d.eval(r.argmin), r.value, 1e-6);
      for (const Vec& t : sample(P, 1000, gen)) ASSERT_LE(r.value, d.eval(t) + 1e-8);
    }
  }
}

TEST(ApproxAtomic, Examples) {
  const Polyhedron P = square(-1, 1);
  const AffineApprox a = approx_atomic(make(Mat::Identity(2, 2), row2(0, 0), 0.1), P);
  EXPECT_NEAR(a.Sp, 0.1, 1e-9);
  EXPECT_EQ(a.Rp.norm(), 0.0);
  EXPECT_NEAR(approx_atomic(make(Mat::Zero(2, 2), row2(1, 0), 0.0), P).Sp, -1.0, 1e-9);
  EXPECT_NEAR(approx_atomic(make(Mat::Zero(2, 2), row2(0, 0), 0.0), P).Sp, 0.0, 1e-12);
}

TEST(ApproxUnder, Examples) {
  const Polyhedron P = square(-1, 1);
  const AffineApprox a = approx_under(make(diag2(1, -1), row2(1, 0), 0.0), P);
  EXPECT_EQ(a.Rp, row2(1, 0));
  EXPECT_NEAR(a.Sp, -1.0, 1e-9);

  const AffineApprox lin = approx_under(make(Mat::Zero(2, 2), row2(0.3, -2), 0.7), P);
  EXPECT_EQ(lin.Rp, row2(0.3, -2));
  EXPECT_NEAR(lin.Sp, 0.7, 1e-12);

  const AffineApprox conv = approx_under(make(Mat::Identity(2, 2), row2(0, 0), 0.0), P);
  EXPECT_EQ(conv.Rp.norm(), 0.0);
  EXPECT_NEAR(conv.Sp, 0.0, 1e-9);
}

TEST(ApproxMcCormick, Examples) {
  // θ1θ2 on [0,1]^2: the envelope max(0, θ1 + θ2 − 1) lower-bounds the product; its minimum is 0.
  Mat bil = Mat::Zero(2, 2);
  bil(0, 1) = bil(1, 0) = 0.5;
  const Polyhedron unit = square(0, 1);
  EXPECT_NEAR(mccormick_bound(make(bil, row2(0, 0), 0.0), unit, Vec::Zero(2), Vec::Ones(2)), 0.0, 1e-9);

  const Polyhedron P = square(-1, 1);
  const QuadDiff saddle = make(diag2(1, -1), row2(0, 0), 0.0);
  const double L = mccormick_bound(saddle, P, -Vec::Ones(2), Vec::Ones(2));
  EXPECT_LE(L, quad_min(saddle, P) + 1e-9);
  EXPECT_NEAR(L, -1.0, 1e-9);

  const AffineApprox lin = approx_mccormick(make(Mat::Zero(2, 2), row2(1, 2), 0.5), P);
  EXPECT_EQ(lin.Rp, row2(1, 2));
  EXPECT_NEAR(lin.Sp, 0.5, 1e-9);
}

TEST(Approximations, SoundAndOrderedOnRandomDifferences) {
  std::mt19937 gen(14);
  for (int n = 1; n <= 3; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const Polyhedron P = random_polytope(n, gen);
      const QuadDiff d = random_diff(n, gen);
      const AffineApprox at = approx_atomic(d, P);
      const AffineApprox un = approx_under(d, P);
      const AffineApprox mc = approx_mccormick(d, P);
      EXPECT_NEAR(at.Sp, quad_min(d, P), 1e-12);
      for (const Vec& t : sample(P, 1000, gen)) {
        const double J = d.eval(t);
        ASSERT_LE(at.eval(t), J + 1e-8);
        ASSERT_LE(un.eval(t), J + 1e-8);
        ASSERT_LE(mc.eval(t), J + 1e-8);
        ASSERT_GE(un.eval(t), mc.eval(t) - 1e-8);
      }
    }
  }
}
