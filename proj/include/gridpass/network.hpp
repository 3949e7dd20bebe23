#pragma once

#include <string>
#include <vector>

#include "gridpass/state_space.hpp"

namespace gridpass {

// ibr-shunt: the placeholder branch through which an inverter ties its node to
// the neutral. rl-line: series r-L. resistive: an r-only branch (L = 0), used for
// constant-impedance loads; it has no state but counts in the passivity index.
enum class BranchKind { IbrShunt, RlLine, Resistive };

const char* to_string(BranchKind kind);

struct Branch {
  int from = 0;  // 0 is the neutral; from < to gives the positive direction
  int to = 0;
  BranchKind kind = BranchKind::RlLine;
  double r = 0.0;
  double L = 0.0;
  std::string name;
};

struct NetworkTopology {
  int n_nodes = 0;
  std::vector<Branch> branches;
  double omega_0 = 2.0 * 3.14159265358979323846 * 50.0;

  void validate() const;
  // Branches other than the inverter shunts (M' in the reduced network).
  int network_branch_count() const;
  std::vector<int> network_branches() const;
};

struct Incidence {
  Mat C0;      // N x M'
  Mat C_full;  // N x (M' + N) = [C0  -I]
};

Incidence build_incidence(const NetworkTopology& topology);

// Stacked D/Q branch dynamics  L i' = -R i + W i + C_out^T v,  i_s = C_out i + D_out v.
// Branch-current ordering: all D components of the dynamic branches, then all Q.
// Node-voltage and injected-current ordering: all D, then all Q.
struct NetworkStateSpace {
  Mat L_mat;
  Mat R_mat;
  Mat W_mat;
  Mat C_out;
  Mat D_out;  // static conductance part from resistive branches
  std::vector<int> dynamic_branches;

  // x = i_bDQ, u = v_oDQ, y = i_sDQ (D_out is not representable here, see d_out)
  StateSpaceModel as_state_space() const;
};

NetworkStateSpace network_state_space(const NetworkTopology& topology);

struct NetworkPassivityCertificate {
  double lambda_r_min = 0.0;
  double lambda_c_max = 0.0;
  double sigma_net = 0.0;
};

NetworkPassivityCertificate network_passivity_index(const NetworkTopology& topology);

}  // namespace gridpass
