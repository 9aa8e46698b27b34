#include "bbcert/forms.hpp"

namespace bbcert {

AffineMap AffineMap::from_packed(const Mat& P) {
  const int d = static_cast<int>(P.cols()) - 1;
  return AffineMap(P.leftCols(d), P.col(d));
}

Mat AffineMap::packed() const {
  Mat P(F.rows(), F.cols() + 1);
  P << F, g;
  return P;
}

double AffineMap::max_coef_diff(const AffineMap& other) const {
  if (F.rows() != other.F.rows() || F.cols() != other.F.cols()) return kInf;
  if (F.size() == 0 && g.size() == 0) return 0.0;
  double diff = (g - other.g).cwiseAbs().maxCoeff();
  if (F.size() > 0) diff = std::max(diff, (F - other.F).cwiseAbs().maxCoeff());
  return diff;
}

QuadForm QuadForm::zero(int n_theta) {
  QuadForm q;
  q.Q = Mat::Zero(n_theta, n_theta);
  q.R = RowVec::Zero(n_theta);
  return q;
}

QuadForm QuadForm::affine(const RowVec& R, double S) {
  QuadForm q = zero(static_cast<int>(R.size()));
  q.R = R;
  q.S = S;
  return q;
}

QuadForm QuadForm::inf(int n_theta) {
  QuadForm q = zero(n_theta);
  q.infinite = true;
  return q;
}

double QuadForm::eval(const Vec& theta) const {
  if (infinite) return kInf;
  return theta.dot(Q * theta) + R.dot(theta) + S;
}

bool QuadForm::is_affine(double tol) const {
  return Q.size() == 0 || Q.cwiseAbs().maxCoeff() <= tol;
}

RowVec QuadForm::packed_affine() const {
  RowVec row(R.size() + 1);
  row << R, S;
  return row;
}

QuadForm QuadForm::operator-(const QuadForm& o) const {
  if (infinite || o.infinite) throw ContractError("difference of infinite value functions");
  QuadForm q;
  q.Q = Q - o.Q;
  q.R = R - o.R;
  q.S = S - o.S;
  return q;
}

QuadForm QuadForm::operator+(const QuadForm& o) const {
  QuadForm q;
  q.infinite = infinite || o.infinite;
  q.Q = Q + o.Q;
  q.R = R + o.R;
  q.S = S + o.S;
  return q;
}

QuadForm QuadForm::scaled(double s) const {
  QuadForm q = *this;
  q.Q *= s;
  q.R *= s;
  q.S *= s;
  return q;
}

}  // namespace bbcert
