#pragma once

#include "bbcert/relax_solver.hpp"

#include <deque>
#include <functional>

namespace bbcert {

enum class NodeRule { df, brf, bf };
enum class BranchRule { fb, mib };
enum class Heuristic { none, lb, rins };
enum class ChildOrder { zero_first, one_first };

struct SolverConfig {
  NodeRule node_rule = NodeRule::df;
  BranchRule branch_rule = BranchRule::fb;
  Heuristic heuristic = Heuristic::none;
  bool warm_start = false;
  ChildOrder order = ChildOrder::zero_first;

  // ε-dominance: prune when eps(θ) + (1 + eps_r)·J̲ >= J̄; eps must be affine.
  bool use_eps = false;
  QuadForm eps;
  double eps_r = 0.0;
  std::optional<int> t0;  // maximum number of branchings
  std::optional<int> m0;  // maximum pending-list length

  int r_n0 = 2;             // LB initial neighborhood size
  double rins_r = 0.5;      // RINS minimum agreeing fraction
  double eps_cutoff = 1e-4; // objective cut-off slack for heuristics
  std::optional<int> node_limit;

  void validate(const MpProblem& problem) const;
};

struct Kappa {
  long iterations = 0;
  long nodes = 0;
  Kappa& operator+=(const Kappa& o) {
    iterations += o.iterations;
    nodes += o.nodes;
    return *this;
  }
  bool operator==(const Kappa& o) const = default;
};

struct Node {
  Fixing fix;
  double parent_bound = -kInf;  // J̲ of the parent (best-first priority)
  std::optional<IndexList> warm_set;
  int level() const { return static_cast<int>(fix.B0.size() + fix.B1.size()); }
};

struct OnlineOutcome {
  double J_bar = kInf;
  std::optional<Vec> x_bar;
  Kappa kappa_tot;
};

struct HeuristicOutcome {
  double J = kInf;
  std::optional<Vec> x;
  Kappa kappa;
};

// Mutable state of one online search.
struct SearchState {
  std::deque<Node> T;
  double J_bar = kInf;
  std::optional<Vec> x_bar;
  Kappa kappa;
  int branchings = 0;
  bool heuristic_done = false;
  bool terminated = false;
  std::optional<Vec> root_x;  // root relaxation solution (RINS reference)
};

// Candidate slots for branching: unfixed binaries with neither box row active.
IndexList branch_candidates(const MpProblem& problem, const Fixing& fix, const IndexList& active_set);

// Chooses among candidates given their relaxed values (same order as `slots`).
int branch_index(const Vec& x_candidates, const IndexList& slots, BranchRule rule);

double node_priority(const Node& node, NodeRule rule);

// Inserts both children before the first pending node whose priority is not smaller.
void sort_insert(std::deque<Node>& T, Node child0, Node child1, NodeRule rule, ChildOrder order);

using HeuristicHook = std::function<HeuristicOutcome(const Vec& x_bar)>;

// Cut evaluation and branching for the node just solved (Alg. 2 plus the heuristic hook).
void cut_step(SearchState& state, const MpProblem& problem, const RelaxResult& relax, const Node& node,
              const SolverConfig& config, const Vec& theta, const HeuristicHook& heuristic);

// Stateful solver: reuses per-node relaxation data across θ. One instance per thread.
class BnbSolver {
 public:
  BnbSolver(const MpProblem& problem, SolverConfig config);
  OnlineOutcome solve(const Vec& theta, const Fixing& root = {});
  const MpProblem& problem() const { return *problem_; }

 private:
  const MpProblem* problem_;
  SolverConfig config_;
  RelaxCache cache_;
};

OnlineOutcome bnb_solve(const MpProblem& problem, const Vec& theta, const SolverConfig& config);

// Sub-problem helpers shared with the certified twin.
SolverConfig heuristic_subconfig(const SolverConfig& config);
MpProblem append_rows(const MpProblem& p, const Mat& A_extra, const Vec& b_extra, const Mat& W_extra);
// Local-branching row Σ_{x̄=0} x_i − Σ_{x̄=1} x_i <= r_n − |{x̄ = 1}| for the binary pattern.
void local_branching_row(const MpProblem& p, const std::vector<int>& pattern, int r_n, RowVec& a, double& b);
std::vector<int> binary_pattern(const MpProblem& p, const Vec& x);
int neighbor_size(int r_n0, bool solved);

HeuristicOutcome lb_heuristic(const MpProblem& problem, const Vec& theta, const Vec& x_bar, const SolverConfig& config);
HeuristicOutcome rins_heuristic(const MpProblem& problem, const Vec& theta, const Vec& x_relaxed, const Vec& x_bar,
                                const SolverConfig& config);

}  // namespace bbcert
