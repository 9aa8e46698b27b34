#include "bbcert/relax_solver.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace bbcert;

namespace {

// min x s.t. x >= θ, 0 <= x <= 1, x binary; θ ∈ [0, 1].
MpProblem one_binary_milp() {
  MpProblem p;
  p.kind = ProblemKind::milp;
  p.n_c = 0;
  p.n_b = 1;
  p.binary_indices = {0};
  p.c = Vec::Ones(1);
  p.A = -Mat::Ones(1, 1);
  p.b = Vec::Zero(1);
  p.W = -Mat::Ones(1, 1);
  p.theta0 = Polyhedron::box(Vec::Zero(1), Vec::Ones(1));
  return p;
}

Vec theta1(double t) { return Vec::Constant(1, t); }

}  // namespace

TEST(BuildRelaxation, RowCountsAndOrdering) {
  const MpProblem p = random_instance(ProblemKind::milp, 2, 3, 5, 2, 1);
  const RelaxationSystem root = build_relaxation(p, {});
  EXPECT_EQ(root.rows(), 5 + 2 * 2);
  EXPECT_EQ(root.p(), 5);
  EXPECT_EQ(root.row_ids, (IndexList{0, 1, 2, 3, 4, 5, 6, 7, 8}));
  const RelaxationSystem all0 = build_relaxation(p, {{0, 1}, {}});
  EXPECT_EQ(all0.p(), 3);
  EXPECT_EQ(all0.rows(), 5);
  const RelaxationSystem mixed = build_relaxation(p, {{0}, {1}});
  EXPECT_EQ(mixed.rows(), 5);
  // Fixed-to-one binary shifts the right-hand side by its column.
  EXPECT_NEAR(mixed.b_param(0, 2), p.b(0) - p.A(0, 4), 1e-15);
}

TEST(SolveRelaxation, SingleActiveConstraint) {
  const MpProblem p = one_binary_milp();
  RelaxationSpec spec{&p, {}, theta1(0.3), std::nullopt};
  const RelaxResult r = solve_relaxation(spec);
  ASSERT_EQ(r.status, RelaxStatus::optimal);
  EXPECT_NEAR(r.x(0), 0.3, 1e-12);
  EXPECT_NEAR(r.J, 0.3, 1e-12);
  EXPECT_EQ(r.active_set, IndexList{0});
}

TEST(SolveRelaxation, FixingToZeroIsInfeasible) {
  const MpProblem p = one_binary_milp();
  RelaxationSpec spec{&p, {{0}, {}}, theta1(0.3), std::nullopt};
  const RelaxResult r = solve_relaxation(spec);
  EXPECT_EQ(r.status, RelaxStatus::infeasible);
  EXPECT_EQ(r.J, kInf);
}

TEST(SolveRelaxation, RandomQpMatchesKktEnumeration) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const MpProblem p = random_instance(ProblemKind::miqp, 0, 4, 6, 2, seed);
    Vec theta(2);
    theta << 0.1, -0.2;
    const double expected =
        oracle::enumerate_convex(p.H, p.f + p.f_theta * theta, p.A, p.b + p.W * theta, true);
    const RelaxResult r = solve_relaxation(RelaxationSpec{&p, {}, theta, std::nullopt});
    if (expected == kInf) {
      EXPECT_EQ(r.status, RelaxStatus::infeasible) << seed;
      continue;
    }
    ASSERT_EQ(r.status, RelaxStatus::optimal) << seed;
    EXPECT_NEAR(r.J, expected, 1e-6) << seed;
  }
}

TEST(SolveRelaxation, RandomLpMatchesVertexEnumeration) {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 30 && seed < 400; ++seed) {
    const MpProblem p = random_instance(ProblemKind::milp, 3, 3, 8, 2, seed);
    Vec theta(2);
    theta << -0.3, 0.25;
    RelaxResult r;
    try {
      r = solve_relaxation(RelaxationSpec{&p, {}, theta, std::nullopt});
    } catch (const SolverError& e) {
      EXPECT_STREQ(e.what(), "unbounded relaxation");
      continue;
    }
    const RelaxationSystem sys = build_relaxation(p, {});
    const Vec h = sys.b_param.leftCols(2) * theta + sys.b_param.col(2);
    const double expected = oracle::enumerate_convex(Mat(), sys.c, sys.A, h, false);
    ++checked;
    if (expected == kInf) {
      EXPECT_EQ(r.status, RelaxStatus::infeasible) << seed;
    } else {
      ASSERT_EQ(r.status, RelaxStatus::optimal) << seed;
      EXPECT_NEAR(r.J, expected, 1e-6) << seed;
      EXPECT_LE((sys.A * r.x - h).maxCoeff(), 1e-8);
      for (int id : r.active_set) {
        const int pos = sys.position_of(id);
        EXPECT_NEAR(sys.A.row(pos).dot(r.x), h(pos), 1e-8);
      }
    }
  }
  EXPECT_EQ(checked, 30);
}

TEST(SolveRelaxation, WeakDualitySampling) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MpProblem p = random_instance(ProblemKind::miqp, 2, 2, 6, 2, seed);
    const Vec theta = Vec::Constant(2, 0.1);
    const RelaxResult r = solve_relaxation(RelaxationSpec{&p, {}, theta, std::nullopt});
    if (r.status != RelaxStatus::optimal) continue;
    CounterRng rng(seed + 100);
    int sampled = 0;
    for (int s = 0; s < 200000 && sampled < 100; ++s) {
      Vec x(4);
      for (int i = 0; i < 4; ++i) x(i) = r.x(i) + (rng.uniform() - 0.5);
      bool ok = (p.A * x - p.b - p.W * theta).maxCoeff() <= 0;
      for (int k : p.binary_indices) ok = ok && x(k) >= 0 && x(k) <= 1;
      if (!ok) continue;
      ++sampled;
      EXPECT_LE(r.J, objective_value(p, x, theta) + 1e-8);
    }
  }
}

TEST(SolveRelaxation, WarmAndColdAgreeAndDeterministic) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const MpProblem p = random_instance(ProblemKind::miqp, 3, 2, 8, 2, seed);
    const Vec theta = Vec::Constant(2, -0.2);
    RelaxCache cache(p);
    const RelaxResult root = solve_relaxation(cache, {}, theta, std::nullopt);
    if (root.status != RelaxStatus::optimal) continue;
    for (int slot = 0; slot < 3; ++slot) {
      for (int v = 0; v < 2; ++v) {
        Fixing child;
        (v == 0 ? child.B0 : child.B1).push_back(slot);
        const RelaxResult cold = solve_relaxation(cache, child, theta, std::nullopt);
        const RelaxResult warm = solve_relaxation(cache, child, theta, root.active_set);
        const RelaxResult again = solve_relaxation(cache, child, theta, root.active_set);
        ASSERT_EQ(cold.status, warm.status);
        EXPECT_EQ(warm.iterations, again.iterations);
        EXPECT_EQ(warm.active_set, again.active_set);
        if (cold.status != RelaxStatus::optimal) continue;
        EXPECT_NEAR(cold.J, warm.J, 1e-8);
        // Lemma-1 style monotonicity between parent and child.
        EXPECT_GE(cold.J, root.J - 1e-8);
      }
    }
  }
}

TEST(SolveRelaxation, UnboundedLpRejected) {
  MpProblem p = one_binary_milp();
  p.n_c = 1;
  p.A = Mat::Zero(1, 2);
  p.A(0, 1) = -1;
  p.c = Vec::Zero(2);
  p.c(0) = 1.0;  // continuous variable 0 is free and unconstrained
  p.binary_indices = {1};
  try {
    solve_relaxation(RelaxationSpec{&p, {}, theta1(0.3), std::nullopt});
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_STREQ(e.what(), "unbounded relaxation");
  }
}
