#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using IndexList = std::vector<int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Caller broke a documented precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical or budget failure inside a solver.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace tol {
inline constexpr double kFeas = 1e-8;        // geometric feasibility on normalized rows
inline constexpr double kInterior = 1e-9;    // minimum inscribed radius of a kept region
inline constexpr double kKeepRadius = 1e-7;  // a split side becomes a region only with this inscribed radius
inline constexpr double kViolation = 1e-9;   // relaxation row counts as violated below -kViolation
inline constexpr double kTie = 1e-10;        // comparison margin for argmin/argmax scans
inline constexpr double kPivot = 1e-9;       // smallest usable pivot / denominator
inline constexpr double kDominance = 1e-9;   // prune iff gap >= -kDominance
inline constexpr double kCoef = 1e-9;        // affine maps equal iff coefficients agree
inline constexpr double kPoint = 1e-6;       // online vectors equal iff sup-norm below
}  // namespace tol

}  // namespace bbcert
