#pragma once

#include "bbcert/poly_geom.hpp"

#include <cstdint>
#include <string>

namespace bbcert {

enum class ProblemKind { milp, miqp };

// MILP: min c'x; MIQP: min ½x'Hx + (f + f_theta θ)'x; both s.t. A x <= b + W θ, θ ∈ theta0,
// x_i ∈ {0,1} for i in binary_indices.
struct MpProblem {
  ProblemKind kind = ProblemKind::milp;
  int n_c = 0;
  int n_b = 0;
  IndexList binary_indices;
  Mat H;        // n×n, MIQP only
  Vec f;        // n, MIQP only
  Mat f_theta;  // n×n_θ, MIQP only
  Vec c;        // n, MILP only
  Mat A;
  Vec b;
  Mat W;
  Polyhedron theta0;
  bool regularized = false;  // H was shifted by 1e-6·I to make it positive definite

  int n() const { return n_c + n_b; }
  int m() const { return static_cast<int>(A.rows()); }
  int n_theta() const { return theta0.dim(); }
  bool is_qp() const { return kind == ProblemKind::miqp; }

  // Throws ContractError on inconsistent sizes, asymmetric H, or an indefinite H.
  void validate() const;
};

MpProblem problem_from_json_text(const std::string& text);
std::string problem_to_json_text(const MpProblem& p);
MpProblem load_problem(const std::string& path);
void save_problem(const MpProblem& p, const std::string& path);

// Entries drawn i.i.d.: normal for H̄ (H = H̄H̄' + 1e-6·I), f, c, f_theta, A, W; uniform [0,2]
// for b; theta0 = [-0.5, 0.5]^n_theta. Binaries are the last n_b variables.
MpProblem random_instance(ProblemKind kind, int n_b, int n_c, int m, int n_theta, std::uint64_t seed);

struct MpcSpec {
  Mat A_dyn;  // nx×nx
  Mat B_dyn;  // nx×nu
  Mat Q_w;    // stage state weight
  Mat R_w;    // stage input weight
  int horizon = 1;
  Vec x_lower, x_upper;  // predicted states and the parameter box
  Vec u_lower, u_upper;  // continuous inputs
  IndexList binary_inputs;  // input channels restricted to {0,1}
};

// Condensed MPC problem over stacked inputs with θ = x0; cost Σ x_k'Q x_k + u_k'R u_k for
// k = 1..N (states) and k = 0..N-1 (inputs), written as ½U'HU + θ'f_θ'U.
MpProblem mpc_condense(const MpcSpec& spec);

// Counter-based stream: value i depends only on (seed, i).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}
  double uniform();  // (0, 1)
  double normal();
 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace bbcert
