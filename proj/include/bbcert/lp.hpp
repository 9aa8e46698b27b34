#pragma once

#include "bbcert/types.hpp"

namespace bbcert::lp {

enum class Status { optimal, infeasible, unbounded };

struct Result {
  Status status = Status::infeasible;
  Vec x;
  double value = kInf;
};

// min c'x s.t. G x <= h with x free. Dense two-phase tableau simplex; small problems only.
// When `start` is given and feasible, phase 1 is skipped by shifting the origin to it.
Result minimize(const Vec& c, const Mat& G, const Vec& h, const Vec* start = nullptr);

}  // namespace bbcert::lp
