#pragma once

#include "bbcert/forms.hpp"

#include <optional>
#include <utility>

namespace bbcert {

// {θ : At θ <= bt}
struct Polyhedron {
  Mat At;
  Vec bt;

  Polyhedron() = default;
  Polyhedron(Mat At_, Vec bt_);
  static Polyhedron box(const Vec& lower, const Vec& upper);

  int dim() const { return static_cast<int>(At.cols()); }
  int rows() const { return static_cast<int>(At.rows()); }
  // Residual check on normalized rows.
  bool contains(const Vec& theta, double tol = tol::kFeas) const;
};

// {θ : θ'Qθ + Rθ + S <= 0}
struct QuadCut {
  Mat Q;
  RowVec R;
  double S = 0.0;

  double eval(const Vec& theta) const { return theta.dot(Q * theta) + R.dot(theta) + S; }
  static QuadCut from_form(const QuadForm& q) { return {q.Q, q.R, q.S}; }
};

struct RegionSet {
  Polyhedron poly;
  std::vector<QuadCut> quads;
  Vec hint;  // some point of the set when known (speeds up LPs); not part of the set's identity

  RegionSet() = default;
  explicit RegionSet(Polyhedron p) : poly(std::move(p)) {}
  int dim() const { return poly.dim(); }
  bool contains(const Vec& theta, double tol = tol::kFeas) const;
};

struct Ball {
  Vec center;
  double radius = 0.0;
};

Polyhedron intersect_halfspace(const Polyhedron& P, const RowVec& a, double b);

bool is_empty(const RegionSet& P);
bool is_empty(const Polyhedron& P);

// Largest inscribed ball; radius is capped at 1e9 for unbounded sets. Throws "empty region".
Ball chebyshev_center(const Polyhedron& P);

// Tight per-coordinate bounds. Throws "unbounded region" / "empty region".
std::vector<std::pair<double, double>> bounding_box(const Polyhedron& P);

// Drops rows implied by the others; the set is unchanged.
Polyhedron remove_redundant(const Polyhedron& P);

struct PointSearch {
  std::optional<Vec> point;
  bool exhausted = false;  // budget ran out before a decision
};

// Looks for θ whose polyhedral rows hold with slack >= margin·‖row‖ and every quadratic cut
// is <= -margin. Polyhedral-only sets use one Chebyshev LP; quadratic cuts use a spatial
// branch-and-bound over box bisections.
PointSearch find_point(const RegionSet& R, double margin, int box_budget = 4000);

// A point well inside the set, or nullopt when the set has no interior (radius < 1e-9).
std::optional<Vec> interior_point(const RegionSet& R);

}  // namespace bbcert
