#pragma once

#include "bbcert/relax_solver.hpp"

#include <functional>

namespace bbcert {

struct CertPiece {
  RegionSet region;
  int kappa = 0;
  IndexList active_set;  // global row ids
  QuadForm J;            // infinite when infeasible
  AffineMap x;           // full-length solution map (empty when infeasible)
  RelaxStatus status = RelaxStatus::infeasible;
};

struct KktSolution {
  AffineMap x;       // full-length
  AffineMap lambda;  // one row per working-set row
  QuadForm J;
};

// Parametric solution for a fixed working set (global row ids). Throws "degenerate working set".
KktSolution kkt_solution(const MpProblem& problem, const RelaxationSystem& sys, const IndexList& working_set);

// Value function of a full-length packed solution [F | g].
QuadForm value_function(const MpProblem& problem, const Mat& x_packed);

// Result of splitting a region on h(θ) <= 0 versus h(θ) >= 0.
struct RegionSplit {
  std::optional<RegionSet> le;
  std::optional<RegionSet> ge;
  bool split() const { return le.has_value() && ge.has_value(); }
};

// A side qualifies when h reaches beyond the band 1e-9·‖∇h‖ on it; for affine h on polyhedra a
// split additionally needs an inscribed radius >= 1e-7 on both sides. That keeps every region's
// Chebyshev center far outside the bands of decisions that were settled one-sidedly.
// Single-sided outcomes return the input set unchanged; when no side qualifies the value at the
// input's Chebyshev center decides.
RegionSplit split_region(const RegionSet& R, const QuadForm& h);

// Oracle for the certified engines: replays a recorded decision script, then splits the
// region on every new decision that is not constant over it. Untaken sides are recorded as
// forks (script so far + the other outcome, region of the other side).
class RegionOracle final : public DecisionOracle {
 public:
  RegionOracle(RegionSet region, std::vector<bool> script);
  bool nonpositive(const RowVec& h) override;
  bool decide(const QuadForm& h);

  const RegionSet& region() const { return region_; }
  struct Fork {
    std::vector<bool> script;
    RegionSet region;
  };
  std::vector<Fork>& forks() { return forks_; }

 private:
  RegionSet region_;
  std::vector<bool> script_;
  size_t pos_ = 0;
  std::vector<Fork> forks_;
};

// Runs `body` once per cell of a partition of `region`; every region-dependent choice inside
// the body must go through the oracle it receives. Throws "certification budget exceeded".
void for_each_cell(const RegionSet& region, int max_cells,
                   const std::function<void(RegionOracle&)>& body);

inline constexpr int kDefaultPieceBudget = 100000;

std::vector<CertPiece> cert_relaxation(RelaxCache& cache, const Fixing& node, const RegionSet& region,
                                       const std::optional<IndexList>& warm_start,
                                       int max_pieces = kDefaultPieceBudget);
std::vector<CertPiece> cert_relaxation(const MpProblem& problem, const Fixing& node, const RegionSet& region,
                                       const std::optional<IndexList>& warm_start,
                                       int max_pieces = kDefaultPieceBudget);

}  // namespace bbcert
