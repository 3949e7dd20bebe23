#include "gridpass/network.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "gridpass/errors.hpp"

namespace gridpass {

const char* to_string(BranchKind kind) {
  switch (kind) {
    case BranchKind::IbrShunt: return "ibr-shunt";
    case BranchKind::RlLine: return "rl-line";
    case BranchKind::Resistive: return "resistive";
  }
  return "?";
}

void NetworkTopology::validate() const {
  if (n_nodes < 1) fail(ErrorKind::Topology, "topology needs at least one node");
  if (!(omega_0 > 0)) fail(ErrorKind::Topology, "omega_0 must be positive");
  const int M = static_cast<int>(branches.size());
  if (M < n_nodes) fail(ErrorKind::Topology, "topology must end with one ibr-shunt branch per node");
  const int first_shunt = M - n_nodes;
  for (int m = 0; m < M; ++m) {
    const Branch& b = branches[m];
    std::ostringstream where;
    where << "branch " << m << (b.name.empty() ? "" : " (" + b.name + ")");
    if (b.from < 0 || b.to > n_nodes || b.from >= b.to)
      fail(ErrorKind::Topology, where.str() + ": endpoints must satisfy 0 <= from < to <= N");
    if (m >= first_shunt) {
      const int node = m - first_shunt + 1;
      if (b.kind != BranchKind::IbrShunt || b.from != 0 || b.to != node)
        fail(ErrorKind::Topology, where.str() +
                                      ": the last N branches must be the ibr-shunt branches (0, 1) ... (0, N) in "
                                      "node order; reorder the branch list");
      continue;
    }
    if (b.kind == BranchKind::IbrShunt)
      fail(ErrorKind::Topology, where.str() + ": ibr-shunt branches must occupy the last N positions; reorder "
                                              "the branch list");
    if (!(b.r > 0)) fail(ErrorKind::Topology, where.str() + ": resistance must be positive");
    if (b.kind == BranchKind::RlLine && !(b.L > 0))
      fail(ErrorKind::Topology, where.str() + ": rl-line inductance must be positive");
    if (b.kind == BranchKind::Resistive && b.L != 0.0)
      fail(ErrorKind::Topology, where.str() + ": resistive branch must have zero inductance");
  }
  // every node reaches the neutral
  std::vector<int> parent(n_nodes + 1);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  for (const Branch& b : branches) parent[find(b.from)] = find(b.to);
  for (int n = 1; n <= n_nodes; ++n)
    if (find(n) != find(0)) fail(ErrorKind::Topology, "node " + std::to_string(n) + " is not connected to the neutral");
}

std::vector<int> NetworkTopology::network_branches() const {
  std::vector<int> out;
  for (int m = 0; m < static_cast<int>(branches.size()); ++m)
    if (branches[m].kind != BranchKind::IbrShunt) out.push_back(m);
  return out;
}

int NetworkTopology::network_branch_count() const { return static_cast<int>(network_branches().size()); }

Incidence build_incidence(const NetworkTopology& t) {
  t.validate();
  const int N = t.n_nodes;
  const auto e2 = t.network_branches();
  const int Mp = static_cast<int>(e2.size());
  Incidence inc;
  inc.C0 = Mat::Zero(N, Mp);
  for (int k = 0; k < Mp; ++k) {
    const Branch& b = t.branches[e2[k]];
    if (b.from > 0) inc.C0(b.from - 1, k) = 1.0;
    inc.C0(b.to - 1, k) = -1.0;
  }
  inc.C_full = Mat::Zero(N, Mp + N);
  inc.C_full.leftCols(Mp) = inc.C0;
  inc.C_full.rightCols(N) = -Mat::Identity(N, N);
  return inc;
}

NetworkStateSpace network_state_space(const NetworkTopology& t) {
  const Incidence inc = build_incidence(t);
  const auto e2 = t.network_branches();
  if (e2.empty()) fail(ErrorKind::EmptyNetwork, "network has no branches besides the inverter shunts");
  const int N = t.n_nodes;
  NetworkStateSpace ss;
  std::vector<int> dyn_cols, static_cols;
  for (int k = 0; k < static_cast<int>(e2.size()); ++k) {
    if (t.branches[e2[k]].kind == BranchKind::RlLine) {
      dyn_cols.push_back(k);
      ss.dynamic_branches.push_back(e2[k]);
    } else {
      static_cols.push_back(k);
    }
  }
  const int Md = static_cast<int>(dyn_cols.size());
  ss.L_mat = Mat::Zero(2 * Md, 2 * Md);
  ss.R_mat = Mat::Zero(2 * Md, 2 * Md);
  ss.W_mat = Mat::Zero(2 * Md, 2 * Md);
  Mat C0d = Mat::Zero(N, Md);
  for (int k = 0; k < Md; ++k) {
    const Branch& b = t.branches[ss.dynamic_branches[k]];
    ss.L_mat(k, k) = ss.L_mat(Md + k, Md + k) = b.L;
    ss.R_mat(k, k) = ss.R_mat(Md + k, Md + k) = b.r;
    ss.W_mat(k, Md + k) = t.omega_0 * b.L;
    ss.W_mat(Md + k, k) = -t.omega_0 * b.L;
    C0d.col(k) = inc.C0.col(dyn_cols[k]);
  }
  ss.C_out = Mat::Zero(2 * N, 2 * Md);
  ss.C_out.topLeftCorner(N, Md) = C0d;
  ss.C_out.bottomRightCorner(N, Md) = C0d;
  Mat Y = Mat::Zero(N, N);
  for (int k : static_cols) {
    const Vec c = inc.C0.col(k);
    Y += (c * c.transpose()) / t.branches[e2[k]].r;
  }
  ss.D_out = Mat::Zero(2 * N, 2 * N);
  ss.D_out.topLeftCorner(N, N) = Y;
  ss.D_out.bottomRightCorner(N, N) = Y;
  return ss;
}

StateSpaceModel NetworkStateSpace::as_state_space() const {
  StateSpaceModel m;
  const Eigen::Index n = L_mat.rows();
  Vec Linv = L_mat.diagonal().cwiseInverse();
  m.A = Linv.asDiagonal() * (W_mat - R_mat);
  m.B = Linv.asDiagonal() * C_out.transpose();
  m.C = C_out;
  for (Eigen::Index k = 0; k < n; ++k)
    m.labels.push_back((k < n / 2 ? "i_bD" : "i_bQ") + std::to_string(k % (n / 2) + 1));
  return m;
}

NetworkPassivityCertificate network_passivity_index(const NetworkTopology& t) {
  const Incidence inc = build_incidence(t);
  const auto e2 = t.network_branches();
  if (e2.empty()) fail(ErrorKind::EmptyNetwork, "network has no branches besides the inverter shunts");
  NetworkPassivityCertificate c;
  c.lambda_r_min = std::numeric_limits<double>::infinity();
  for (int m : e2) c.lambda_r_min = std::min(c.lambda_r_min, t.branches[m].r);
  // D and Q blocks share C0, so the stacked Gram matrix has the same spectrum.
  const Mat gram = inc.C0.transpose() * inc.C0;
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  c.lambda_c_max = es.eigenvalues().maxCoeff();
  if (!(c.lambda_c_max > 0)) fail(ErrorKind::Topology, "degenerate incidence: largest Gram eigenvalue is zero");
  c.sigma_net = c.lambda_r_min / c.lambda_c_max;
  return c;
}

}  // namespace gridpass
