#pragma once

#include "bbcert/types.hpp"

namespace bbcert {

// x(θ) = F θ + g.
struct AffineMap {
  Mat F;
  Vec g;

  AffineMap() = default;
  AffineMap(Mat F_, Vec g_) : F(std::move(F_)), g(std::move(g_)) {}

  // Packed [F | g] layout used by the parametric engines.
  static AffineMap from_packed(const Mat& P);
  Mat packed() const;

  int rows() const { return static_cast<int>(g.size()); }
  int dim() const { return static_cast<int>(F.cols()); }
  Vec eval(const Vec& theta) const { return F * theta + g; }
  double max_coef_diff(const AffineMap& other) const;
};

// J(θ) = θ'Qθ + Rθ + S, or +∞ everywhere when `infinite`.
struct QuadForm {
  Mat Q;
  RowVec R;
  double S = 0.0;
  bool infinite = false;

  static QuadForm zero(int n_theta);
  static QuadForm affine(const RowVec& R, double S);
  static QuadForm inf(int n_theta);

  int dim() const { return static_cast<int>(R.size()); }
  double eval(const Vec& theta) const;
  bool is_affine(double tol = 1e-12) const;
  // Packed affine row [R | S]; requires a finite form.
  RowVec packed_affine() const;

  QuadForm operator-(const QuadForm& o) const;
  QuadForm operator+(const QuadForm& o) const;
  QuadForm scaled(double s) const;
};

}  // namespace bbcert
