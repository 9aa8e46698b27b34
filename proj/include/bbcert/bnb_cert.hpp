#pragma once

#include "bbcert/bnb_online.hpp"
#include "bbcert/mp_cert.hpp"
#include "bbcert/quad_compare.hpp"

#include <deque>

namespace bbcert {

enum class CertMode { exact, conservative };
enum class ApproxKind { atomic, under, mccormick };

struct CertConfig {
  SolverConfig solver;
  CertMode mode = CertMode::exact;
  ApproxKind approx = ApproxKind::atomic;  // conservative mode only
  bool loop_all_upper = false;             // conservative: test every collected upper bound
  bool quadratic_regions = false;          // exact MIQP: allow quadratic region cuts (n_θ <= 3)
  int max_regions = 5000000;  // regions created, including intermediate ones

  void validate(const MpProblem& problem) const;
};

struct UpperBound {
  QuadForm J;
  AffineMap x;
};

struct CertNode {
  Fixing fix;
  QuadForm parent_J;  // J̲ of the parent (best-first priority)
  std::optional<IndexList> warm_set;
  int level() const { return static_cast<int>(fix.B0.size() + fix.B1.size()); }
};

// Search state shared by every θ of `set`.
struct CertRegion {
  RegionSet set;
  std::deque<CertNode> T;
  Kappa kappa;
  std::vector<UpperBound> upper;  // exact mode: at most one element
  int branchings = 0;
  bool heuristic_done = false;
  bool terminated = false;
  std::optional<AffineMap> root_x;
};

struct CertifiedRegion {
  RegionSet set;
  Kappa kappa;
  std::vector<UpperBound> upper;  // empty: no integer-feasible point found
  // Incumbent value at θ: the (only) upper bound, or the pointwise minimum of the collection.
  double J_at(const Vec& theta) const;
  std::optional<Vec> x_at(const Vec& theta) const;
};

struct Certificate {
  bool conservative = false;
  int n_theta = 0;
  Polyhedron domain;  // the certified parameter set (the union of the regions)
  std::vector<CertifiedRegion> regions;
};

Certificate bnb_cert(const MpProblem& problem, const RegionSet& region, const CertConfig& config,
                     const Fixing& root = {});
Certificate bnb_cert(const MpProblem& problem, const CertConfig& config);

// Processes one solved relaxation piece (the piece region is already in `region.set` and its κ
// already accumulated). Returns the successor regions.
std::vector<CertRegion> cut_cert(const MpProblem& problem, CertRegion region, const CertPiece& piece,
                                 const CertNode& node, const CertConfig& config);

// Most-infeasible scores: per piece, s(θ) = C θ + d with one row per candidate.
struct ScorePiece {
  RegionSet set;
  Mat C;
  Vec d;
};
std::vector<ScorePiece> most_inf_score_cert(const AffineMap& x_candidates, const RegionSet& region,
                                            int max_cells = kDefaultPieceBudget);

struct BranchPiece {
  RegionSet set;
  int slot = -1;
};
std::vector<BranchPiece> branch_ind_cert(const AffineMap& x_candidates, const IndexList& slots,
                                         const RegionSet& region, BranchRule rule,
                                         int max_cells = kDefaultPieceBudget);

struct SortPiece {
  RegionSet set;
  std::deque<CertNode> T;
};
std::vector<SortPiece> sort_cert(const RegionSet& region, const std::deque<CertNode>& T, const CertNode& child0,
                                 const CertNode& child1, NodeRule rule, ChildOrder order,
                                 int max_cells = kDefaultPieceBudget);

struct HeuristicPiece {
  RegionSet set;
  Kappa kappa;
  std::optional<UpperBound> found;  // new solution, when one was found on this piece
};
std::vector<HeuristicPiece> lb_cert(const MpProblem& problem, const AffineMap& x_bar, const RegionSet& region,
                                    const CertConfig& config);
std::vector<HeuristicPiece> rins_cert(const MpProblem& problem, const AffineMap& x_relaxed, const AffineMap& x_bar,
                                      const RegionSet& region, const CertConfig& config);

// Affine lower approximation of `d` over `P` per the configured kind.
AffineApprox approximate(const QuadForm& d, const Polyhedron& P, ApproxKind kind);

}  // namespace bbcert
