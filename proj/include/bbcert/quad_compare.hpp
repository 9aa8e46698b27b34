#pragma once

#include "bbcert/poly_geom.hpp"

namespace bbcert {

// J̃(θ) = θ'Qt θ + Rt θ + St, generally indefinite.
struct QuadDiff {
  Mat Qt;
  RowVec Rt;
  double St = 0.0;

  static QuadDiff of(const QuadForm& q) { return {0.5 * (q.Q + q.Q.transpose()), q.R, q.S}; }
  double eval(const Vec& theta) const { return theta.dot(Qt * theta) + Rt.dot(theta) + St; }
};

// J'(θ) = Rp θ + Sp with J' <= J̃ on the region it was built for.
struct AffineApprox {
  RowVec Rp;
  double Sp = 0.0;
  double eval(const Vec& theta) const { return Rp.dot(theta) + Sp; }
  QuadForm form() const { return QuadForm::affine(Rp, Sp); }
};

struct QuadMin {
  double value = kInf;
  Vec argmin;
};

// Global minimum over a bounded polytope by face enumeration (n_θ <= 4, <= 40 facets after
// redundancy removal), else spatial branch-and-bound. Throws "unbounded region".
QuadMin quad_argmin(const QuadDiff& d, const Polyhedron& P);
double quad_min(const QuadDiff& d, const Polyhedron& P);

// Spatial branch-and-bound with McCormick bounds on box bisections, to absolute gap `gap`.
QuadMin quad_min_spatial(const QuadDiff& d, const Polyhedron& P, double gap = 1e-6, int box_budget = 20000);

// Lower bound of θ'Qθ + Rθ + S over P ∩ box from the McCormick-lifted LP.
double mccormick_bound(const QuadDiff& d, const Polyhedron& P, const Vec& lower, const Vec& upper);

AffineApprox approx_atomic(const QuadDiff& d, const Polyhedron& P);
AffineApprox approx_under(const QuadDiff& d, const Polyhedron& P);
AffineApprox approx_mccormick(const QuadDiff& d, const Polyhedron& P);

}  // namespace bbcert
