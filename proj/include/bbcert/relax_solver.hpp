#pragma once

#include "bbcert/problem.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>

namespace bbcert {

// Binary slots are positions 0..n_b-1 into MpProblem::binary_indices.
struct Fixing {
  IndexList B0;  // slots fixed to 0, sorted
  IndexList B1;  // slots fixed to 1, sorted
};

// Row ids of a relaxation: original rows [0, m), lower box row of slot k at m + k,
// upper box row of slot k at m + n_b + k. Rows of fixed slots are absent.
inline int lower_box_row(const MpProblem& p, int slot) { return p.m() + slot; }
inline int upper_box_row(const MpProblem& p, int slot) { return p.m() + p.n_b + slot; }

// Relaxation with fixed binaries substituted out. θ-dependent data is packed [coef | const].
struct RelaxationSystem {
  ProblemKind kind = ProblemKind::milp;
  int n = 0;
  int n_theta = 0;
  int m_original = 0;  // row ids below this are problem rows, the rest box rows
  IndexList free_vars;     // variable index of each free column
  IndexList row_ids;       // global id of each row, ascending
  IndexList unfixed_slots; // binary slots still relaxed
  Mat A;                   // rows × p
  Mat b_param;             // rows × (n_θ+1)
  Vec x_fixed;             // full-length; fixed binaries at 0/1, free entries 0
  Vec c;                   // p (LP)
  Mat H;                   // p×p (QP)
  Mat H_inv;               // p×p (QP)
  Mat f_param;             // p × (n_θ+1) (QP)

  int p() const { return static_cast<int>(free_vars.size()); }
  int rows() const { return static_cast<int>(row_ids.size()); }
  int position_of(int row_id) const;  // -1 if absent
};

RelaxationSystem build_relaxation(const MpProblem& problem, const Fixing& node);

// Answers "h(θ) <= 0?" for packed h = [coef | const]; the certified twin may split its region.
class DecisionOracle {
 public:
  virtual ~DecisionOracle() = default;
  virtual bool nonpositive(const RowVec& h) = 0;
};

// Online oracle: data is already evaluated, so h has a single (constant) column.
class PointOracle final : public DecisionOracle {
 public:
  bool nonpositive(const RowVec& h) override { return h(h.size() - 1) <= 0.0; }
};

struct LpPhase1 {
  IndexList basis;  // row positions of a dual-feasible basis, ascending
  int pivots = 0;
};

// θ-independent search for a dual-feasible basis. Throws "unbounded relaxation".
LpPhase1 lp_phase1(const RelaxationSystem& sys);

struct EngineResult {
  bool feasible = false;
  IndexList working;  // row positions, ascending
  Mat x;              // p × k
  int iterations = 0;
};

// Dual simplex; b is rows × k.
EngineResult run_lp(const RelaxationSystem& sys, const Mat& b, const LpPhase1& start, DecisionOracle& oracle);
// Dual active-set QP; b is rows × k, f is p × k; warm holds row positions.
EngineResult run_qp(const RelaxationSystem& sys, const Mat& b, const Mat& f, const IndexList& warm,
                    DecisionOracle& oracle);

// Full-length packed x (n × k) from a free-variable solution.
Mat expand_solution(const RelaxationSystem& sys, const Mat& x_free);

enum class RelaxStatus { optimal, infeasible };

struct RelaxResult {
  RelaxStatus status = RelaxStatus::infeasible;
  Vec x;                 // length n
  double J = kInf;
  IndexList active_set;  // global row ids, ascending
  int iterations = 0;
};

struct RelaxationSpec {
  const MpProblem* problem = nullptr;
  Fixing node;
  Vec theta;
  std::optional<IndexList> warm_start;  // global row ids
};

// Caches per-node systems and LP phase-1 results; one instance per thread.
class RelaxCache {
 public:
  explicit RelaxCache(const MpProblem& problem);
  struct Entry {
    RelaxationSystem sys;
    std::optional<LpPhase1> phase1;
  };
  const Entry& get(const Fixing& node);
  const MpProblem& problem() const { return *problem_; }

 private:
  const MpProblem* problem_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::unique_ptr<Entry>> entries_;
};

RelaxResult solve_relaxation(const RelaxationSpec& spec);
RelaxResult solve_relaxation(RelaxCache& cache, const Fixing& node, const Vec& theta,
                             const std::optional<IndexList>& warm_start);

// Objective at full-length x for the given θ.
double objective_value(const MpProblem& p, const Vec& x, const Vec& theta);

}  // namespace bbcert
