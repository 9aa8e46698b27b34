#include "bbcert/problem.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace bbcert {
namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& ptr, const std::string& what) {
  throw ContractError("problem JSON " + ptr + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) schema_error(ptr, "expected object");
  auto it = j.find(key);
  if (it == j.end()) schema_error(ptr + "/" + key, "missing");
  return *it;
}

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) schema_error(ptr, "expected number");
  return j.get<double>();
}

Vec vector_of(const json& j, const std::string& ptr) {
  if (!j.is_array()) schema_error(ptr, "expected array");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = number(j[i], ptr + "/" + std::to_string(i));
  return v;
}

Mat matrix_of(const json& j, const std::string& ptr, int cols_if_empty) {
  if (!j.is_array()) schema_error(ptr, "expected array of arrays");
  if (j.empty()) return Mat(0, cols_if_empty);
  const std::string p0 = ptr + "/0";
  if (!j[0].is_array()) schema_error(p0, "expected array");
  Mat M(j.size(), j[0].size());
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string pi = ptr + "/" + std::to_string(i);
    if (!j[i].is_array()) schema_error(pi, "expected array");
    if (j[i].size() != static_cast<size_t>(M.cols())) schema_error(pi, "ragged row");
    for (size_t k = 0; k < j[i].size(); ++k) M(i, k) = number(j[i][k], pi + "/" + std::to_string(k));
  }
  return M;
}

json to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Mat& M) {
  json a = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
    a.push_back(row);
  }
  return a;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double CounterRng::uniform() {
  const std::uint64_t bits = splitmix64(splitmix64(seed_) ^ counter_++);
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void MpProblem::validate() const {
  const int nv = n();
  const int nt = n_theta();
  if (n_c < 0 || n_b < 0) throw ContractError("negative variable counts");
  if (static_cast<int>(binary_indices.size()) != n_b) throw ContractError("binary_indices size != n_b");
  std::vector<bool> seen(nv, false);
  for (int i : binary_indices) {
    if (i < 0 || i >= nv || seen[i]) throw ContractError("invalid binary index");
    seen[i] = true;
  }
  if (A.cols() != nv) throw ContractError("A has wrong column count");
  if (b.size() != A.rows()) throw ContractError("b has wrong length");
  if (W.rows() != A.rows() || W.cols() != nt) throw ContractError("W has wrong shape");
  if (nt < 1) throw ContractError("theta0 must have n_theta >= 1");
  if (kind == ProblemKind::milp) {
    if (c.size() != nv) throw ContractError("c has wrong length");
  } else {
    if (H.rows() != nv || H.cols() != nv) throw ContractError("H has wrong shape");
    if (f.size() != nv) throw ContractError("f has wrong length");
    if (f_theta.rows() != nv || f_theta.cols() != nt) throw ContractError("f_theta has wrong shape");
    if (nv > 0 && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw ContractError("H not symmetric");
    if (nv > 0) {
      Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() <= 1e-9) {
        throw ContractError("H must be positive definite (semidefinite H is not supported)");
      }
    }
  }
}

MpProblem problem_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ContractError(std::string("problem JSON: ") + e.what());
  }
  MpProblem p;
  const json& kind = field(j, "kind", "");
  if (kind == "milp") {
    p.kind = ProblemKind::milp;
  } else if (kind == "miqp") {
    p.kind = ProblemKind::miqp;
  } else {
    schema_error("/kind", "expected \"milp\" or \"miqp\"");
  }
  const json& nc = field(j, "n_c", "");
  const json& nb = field(j, "n_b", "");
  if (!nc.is_number_integer()) schema_error("/n_c", "expected integer");
  if (!nb.is_number_integer()) schema_error("/n_b", "expected integer");
  p.n_c = nc.get<int>();
  p.n_b = nb.get<int>();
  const json& bi = field(j, "binary_indices", "");
  if (!bi.is_array()) schema_error("/binary_indices", "expected array");
  for (size_t i = 0; i < bi.size(); ++i) {
    if (!bi[i].is_number_integer()) schema_error("/binary_indices/" + std::to_string(i), "expected integer");
    p.binary_indices.push_back(bi[i].get<int>());
  }
  const json& th = field(j, "theta0", "");
  p.theta0.At = matrix_of(field(th, "At", "/theta0"), "/theta0/At", 0);
  p.theta0.bt = vector_of(field(th, "bt", "/theta0"), "/theta0/bt");
  const int nt = p.n_theta();
  p.A = matrix_of(field(j, "A", ""), "/A", p.n());
  p.b = vector_of(field(j, "b", ""), "/b");
  p.W = matrix_of(field(j, "W", ""), "/W", nt);
  if (p.kind == ProblemKind::miqp) {
    p.H = matrix_of(field(j, "H", ""), "/H", p.n());
    p.f = vector_of(field(j, "f", ""), "/f");
    p.f_theta = matrix_of(field(j, "f_theta", ""), "/f_theta", nt);
  } else {
    p.c = vector_of(field(j, "c", ""), "/c");
  }
  if (auto it = j.find("metadata"); it != j.end() && it->is_object()) {
    p.regularized = it->value("regularized", false);
  }
  p.validate();
  return p;
}

std::string problem_to_json_text(const MpProblem& p) {
  json j;
  j["kind"] = p.kind == ProblemKind::milp ? "milp" : "miqp";
  j["n_c"] = p.n_c;
  j["n_b"] = p.n_b;
  j["binary_indices"] = p.binary_indices;
  if (p.is_qp()) {
    j["H"] = to_json(p.H);
    j["f"] = to_json(p.f);
    j["f_theta"] = to_json(p.f_theta);
    j["c"] = nullptr;
  } else {
    j["H"] = nullptr;
    j["f"] = nullptr;
    j["f_theta"] = nullptr;
    j["c"] = to_json(p.c);
  }
  j["A"] = to_json(p.A);
  j["b"] = to_json(p.b);
  j["W"] = to_json(p.W);
  j["theta0"] = {{"At", to_json(p.theta0.At)}, {"bt", to_json(p.theta0.bt)}};
  j["metadata"] = {{"regularized", p.regularized}};
  return j.dump(1);
}

MpProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return problem_from_json_text(ss.str());
}

void save_problem(const MpProblem& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path);
  out << problem_to_json_text(p) << '\n';
}

MpProblem random_instance(ProblemKind kind, int n_b, int n_c, int m, int n_theta, std::uint64_t seed) {
  if (n_b < 0 || n_c < 0 || m < 1 || n_theta < 1 || n_b + n_c < 1) {
    throw ContractError("random_instance: sizes must be positive");
  }
  CounterRng rng(seed);
  auto normal_mat = [&](int r, int c) {
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < c; ++k) M(i, k) = rng.normal();
    return M;
  };
  MpProblem p;
  p.kind = kind;
  p.n_b = n_b;
  p.n_c = n_c;
  const int n = n_b + n_c;
  for (int i = 0; i < n_b; ++i) p.binary_indices.push_back(n_c + i);
  if (kind == ProblemKind::miqp) {
    const Mat Hbar = normal_mat(n, n);
    p.H = Hbar * Hbar.transpose() + 1e-6 * Mat::Identity(n, n);
    p.H = (0.5 * (p.H + p.H.transpose())).eval();
    p.regularized = true;
    p.f = normal_mat(n, 1).col(0);
    p.f_theta = normal_mat(n, n_theta);
  } else {
    p.c = normal_mat(n, 1).col(0);
  }
  p.A = normal_mat(m, n);
  p.b.resize(m);
  for (int i = 0; i < m; ++i) p.b(i) = 2.0 * rng.uniform();
  p.W = normal_mat(m, n_theta);
  p.theta0 = Polyhedron::box(Vec::Constant(n_theta, -0.5), Vec::Constant(n_theta, 0.5));
  return p;
}

MpProblem mpc_condense(const MpcSpec& s) {
  const int nx = static_cast<int>(s.A_dyn.rows());
  const int nu = static_cast<int>(s.B_dyn.cols());
  const int N = s.horizon;
  if (N < 1) throw ContractError("mpc_condense: horizon must be >= 1");
  if (s.A_dyn.cols() != nx || s.B_dyn.rows() != nx || s.Q_w.rows() != nx || s.Q_w.cols() != nx ||
      s.R_w.rows() != nu || s.R_w.cols() != nu || s.x_lower.size() != nx || s.x_upper.size() != nx ||
      s.u_lower.size() != nu || s.u_upper.size() != nu) {
    throw ContractError("mpc_condense: dimension mismatch");
  }
  if ((s.x_upper - s.x_lower).minCoeff() < 0 || (s.u_upper - s.u_lower).minCoeff() < 0) {
    throw ContractError("mpc_condense: infeasible bounds (upper < lower)");
  }
  std::vector<bool> is_binary(nu, false);
  for (int j : s.binary_inputs) {
    if (j < 0 || j >= nu) throw ContractError("mpc_condense: binary input out of range");
    is_binary[j] = true;
  }

  // X = Phi x0 + Gamma U with X = [x_1; ...; x_N].
  const int n = N * nu;
  Mat Phi(N * nx, nx);
  Mat Gamma = Mat::Zero(N * nx, n);
  Mat Ak = Mat::Identity(nx, nx);
  for (int k = 0; k < N; ++k) {
    Ak = s.A_dyn * Ak;
    Phi.middleRows(k * nx, nx) = Ak;
    for (int j = 0; j <= k; ++j) {
      Mat Apow = Mat::Identity(nx, nx);
      for (int t = 0; t < k - j; ++t) Apow = s.A_dyn * Apow;
      Gamma.block(k * nx, j * nu, nx, nu) = Apow * s.B_dyn;
    }
  }
  Mat Qbar = Mat::Zero(N * nx, N * nx);
  Mat Rbar = Mat::Zero(n, n);
  for (int k = 0; k < N; ++k) {
    Qbar.block(k * nx, k * nx, nx, nx) = s.Q_w;
    Rbar.block(k * nu, k * nu, nu, nu) = s.R_w;
  }

  MpProblem p;
  p.kind = ProblemKind::miqp;
  p.H = 2.0 * (Gamma.transpose() * Qbar * Gamma + Rbar);
  p.H = (0.5 * (p.H + p.H.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(p.H, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 1e-9) {
    p.H += 1e-6 * Mat::Identity(n, n);
    p.regularized = true;
  }
  p.f = Vec::Zero(n);
  p.f_theta = 2.0 * Gamma.transpose() * Qbar * Phi;
  for (int k = 0; k < N; ++k)
    for (int j = 0; j < nu; ++j)
      if (is_binary[j]) p.binary_indices.push_back(k * nu + j);
  p.n_b = static_cast<int>(p.binary_indices.size());
  p.n_c = n - p.n_b;

  // Rows: continuous input bounds, then predicted state bounds.
  std::vector<RowVec> rows_a;
  std::vector<double> rows_b;
  std::vector<RowVec> rows_w;
  const RowVec zero_w = RowVec::Zero(nx);
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < nu; ++j) {
      if (is_binary[j]) continue;
      RowVec a = RowVec::Zero(n);
      a(k * nu + j) = 1.0;
      rows_a.push_back(a);
      rows_b.push_back(s.u_upper(j));
      rows_w.push_back(zero_w);
      rows_a.push_back(-a);
      rows_b.push_back(-s.u_lower(j));
      rows_w.push_back(zero_w);
    }
  }
  for (int r = 0; r < N * nx; ++r) {
    const int i = r % nx;
    rows_a.push_back(Gamma.row(r));
    rows_b.push_back(s.x_upper(i));
    rows_w.push_back(-Phi.row(r));
    rows_a.push_back(-Gamma.row(r));
    rows_b.push_back(-s.x_lower(i));
    rows_w.push_back(Phi.row(r));
  }
  const int m = static_cast<int>(rows_a.size());
  p.A.resize(m, n);
  p.b.resize(m);
  p.W.resize(m, nx);
  for (int r = 0; r < m; ++r) {
    p.A.row(r) = rows_a[r];
    p.b(r) = rows_b[r];
    p.W.row(r) = rows_w[r];
  }
  p.theta0 = Polyhedron::box(s.x_lower, s.x_upper);
  p.validate();
  return p;
}

}  // namespace bbcert
