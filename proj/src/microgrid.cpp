#include "gridpass/microgrid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "gridpass/errors.hpp"

namespace gridpass {

namespace {

constexpr double kCurrentBase = 20.0;

double voltage_base(const IbrSpec& b) {
  return std::max(100.0, b.kind == IbrKind::Gfm ? b.gfm.V0 : b.gfl.V_nominal);
}

// L di/dt = -r i + w L K i + v with K i = (i_Q, -i_D)
inline void rl_derivative(const double* i, double r, double L, double w, double vD, double vQ, double* di) {
  di[0] = (-r * i[0] + w * L * i[1] + vD) / L;
  di[1] = (-r * i[1] - w * L * i[0] + vQ) / L;
}

// Steady current through r + jwL for branch voltage v (frame rotating at w).
Vec2 rl_steady(double r, double L, double w, const Vec2& v) {
  Mat2 M;
  M << r, -w * L, w * L, r;
  return M.inverse() * v;
}

Vec2 constant_power_command(double P, double Q, const Vec2& v, double v_floor) {
  const double m2 = std::max(v.squaredNorm(), v_floor * v_floor);
  const double k = (2.0 / 3.0) / m2;
  return {k * (P * v[0] + Q * v[1]), k * (P * v[1] - Q * v[0])};
}

// In-place Gaussian elimination with partial pivoting; M is n x n row-major,
// b is n x m row-major.
void solve_small(int n, std::vector<double>& M, std::vector<double>& b, int m) {
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(M[r * n + c]) > std::abs(M[p * n + c])) p = r;
    if (M[p * n + c] == 0.0) fail(ErrorKind::NumericFault, "singular node-voltage system");
    if (p != c) {
      for (int k = 0; k < n; ++k) std::swap(M[p * n + k], M[c * n + k]);
      for (int k = 0; k < m; ++k) std::swap(b[p * m + k], b[c * m + k]);
    }
    for (int r = c + 1; r < n; ++r) {
      const double f = M[r * n + c] / M[c * n + c];
      if (f == 0.0) continue;
      for (int k = c; k < n; ++k) M[r * n + k] -= f * M[c * n + k];
      for (int k = 0; k < m; ++k) b[r * m + k] -= f * b[c * m + k];
    }
  }
  for (int c = n - 1; c >= 0; --c) {
    for (int k = 0; k < m; ++k) {
      double s = b[c * m + k];
      for (int j = c + 1; j < n; ++j) s -= M[c * n + j] * b[j * m + k];
      b[c * m + k] = s / M[c * n + c];
    }
  }
}

// Interface gains blended toward the transparent setting (alpha = beta = 0, kappa = 1).
PeiConfig blended(const PeiConfig& c, double s) {
  if (s == 1.0) return c;
  PeiConfig b = c;
  b.alpha = s * c.alpha;
  b.beta = s * c.beta;
  b.kappa = 1.0 - s * (1.0 - c.kappa);
  return b;
}

struct Scratch {
  std::vector<Vec2> vc, idyn, vnode, is, tpv, tpi;
  std::vector<double> Y, M, b;
};

}  // namespace

MicrogridModel::MicrogridModel(Scenario scenario) : sc_(std::move(scenario)) {
  sc_.validate();
  const int N = sc_.node_count();
  node_ibr_.assign(N, -1);
  auto push = [&](const std::string& name, double scale, StateInfo::Frame f, int node) {
    info_.push_back({name, scale, f, node});
  };
  using F = StateInfo::Frame;
  for (int n = 0; n < N; ++n) {
    const IbrSpec& b = sc_.ibrs[n];
    node_ibr_[b.node - 1] = n;
    ibr_off_.push_back(static_cast<int>(info_.size()));
    const double V = voltage_base(b), I = kCurrentBase, S = 1.5 * V * I;
    const std::string p = b.name + ".";
    if (b.kind == IbrKind::Gfm) {
      const auto& g = b.gfm;
      push(p + "delta", 1.0, F::Angle, b.node);
      push(p + "P", S, F::Local, 0);
      push(p + "Q", S, F::Local, 0);
      push(p + "phi_d", I / g.K_iv, F::Local, 0);
      push(p + "phi_q", I / g.K_iv, F::Local, 0);
      push(p + "gam_d", V / g.K_ic, F::Local, 0);
      push(p + "gam_q", V / g.K_ic, F::Local, 0);
    } else {
      const auto& g = b.gfl;
      push(p + "eta", 1.0, F::Local, 0);
      push(p + "delta", 1.0, F::Angle, b.node);
      push(p + "gam_d", V / g.K_ic, F::Local, 0);
      push(p + "gam_q", V / g.K_ic, F::Local, 0);
    }
    push(p + "i_ld", I, F::Local, 0);
    push(p + "i_lq", I, F::Local, 0);
    push(p + "v_od", V, F::Local, 0);
    push(p + "v_oq", V, F::Local, 0);
  }
  for (int n = 0; n < N; ++n) {
    const IbrSpec& b = sc_.ibrs[n];
    const double V = voltage_base(b);
    tracker_off_.push_back(-1);
    pll_off_.push_back(-1);
    if (!b.pei) continue;
    const std::string p = b.name + ".pei.";
    if (b.pei->mode == ReferenceMode::Tracker) {
      tracker_off_[n] = static_cast<int>(info_.size());
      push(p + "v_hat_d", V, F::Local, 0);
      push(p + "v_hat_q", V, F::Local, 0);
      push(p + "i_hat_d", kCurrentBase, F::Local, 0);
      push(p + "i_hat_q", kCurrentBase, F::Local, 0);
    }
    if (b.pei->angle == PeiAngleSource::MeasurementPll) {
      pll_off_[n] = static_cast<int>(info_.size());
      push(p + "delta", 1.0, F::Angle, b.node);
      push(p + "eta", 1.0, F::Local, 0);
    }
  }
  for (const auto& l : sc_.lines) {
    line_off_.push_back(static_cast<int>(info_.size()));
    push(l.name + ".i_D", kCurrentBase, F::CommonD, l.from);
    push(l.name + ".i_Q", kCurrentBase, F::CommonQ, l.from);
  }
  for (const auto& l : sc_.loads) {
    if (l.model == LoadModel::Impedance && l.L == 0.0) {
      load_off_.push_back(-1);
      continue;
    }
    load_off_.push_back(static_cast<int>(info_.size()));
    push(l.name + ".i_D", kCurrentBase, F::CommonD, l.node);
    push(l.name + ".i_Q", kCurrentBase, F::CommonQ, l.node);
  }
  if (sc_.grid) {
    grid_off_ = static_cast<int>(info_.size());
    push("grid.i_D", kCurrentBase, F::CommonD, sc_.grid->node);
    push("grid.i_Q", kCurrentBase, F::CommonQ, sc_.grid->node);
    push("grid.angle", 1.0, F::Angle, sc_.grid->node);
  }
  n_states_ = static_cast<int>(info_.size());
}

int MicrogridModel::angle_index(int n) const {
  return ibr_off_[n] + (sc_.ibrs[n].kind == IbrKind::Gfm ? 0 : 1);
}

double MicrogridModel::inverter_angle(const Vec& x, int n) const { return x[angle_index(n)]; }

double MicrogridModel::pei_angle(const Vec& x, int n) const {
  return pll_off_[n] >= 0 ? x[pll_off_[n]] : x[angle_index(n)];
}

bool MicrogridModel::has_constant_power_load() const {
  for (const auto& l : sc_.loads)
    if (l.model == LoadModel::Power) return true;
  return false;
}

NetworkConfig MicrogridModel::initial_config() const {
  NetworkConfig c;
  for (const auto& l : sc_.lines) c.line_closed.push_back(l.closed);
  c.loads = sc_.loads;
  c.grid_omega = sc_.grid ? 2.0 * kPi * sc_.grid->f : sc_.omega_0;
  for (const auto& b : sc_.ibrs) c.pei_active.push_back(b.pei && b.pei->enabled);
  c.pei_refs.assign(sc_.ibrs.size(), PeiReferences{});
  return c;
}

void MicrogridModel::apply_event(const Event& e, NetworkConfig& cfg, Vec& x) const {
  switch (e.kind) {
    case EventKind::CloseTie:
    case EventKind::OpenTie: {
      const int k = sc_.find_line(e.target);
      cfg.line_closed[k] = e.kind == EventKind::CloseTie;
      x[line_off_[k]] = 0.0;
      x[line_off_[k] + 1] = 0.0;
      break;
    }
    case EventKind::LoadStep: {
      LoadSpec& l = cfg.loads[sc_.find_load(e.target)];
      if (l.model == LoadModel::Impedance) {
        l.R = e.value;
      } else {
        l.P = e.value;
        if (std::isfinite(e.value2)) l.Q = e.value2;
      }
      break;
    }
    case EventKind::GridFrequencyStep: cfg.grid_omega = 2.0 * kPi * e.value; break;
    case EventKind::PeiEnable: cfg.pei_active[sc_.find_ibr(e.target)] = true; break;
    case EventKind::PeiDisable: cfg.pei_active[sc_.find_ibr(e.target)] = false; break;
  }
}

std::vector<int> MicrogridModel::islands(const NetworkConfig& cfg) const {
  const int N = sc_.node_count();
  std::vector<int> parent(N);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  for (size_t k = 0; k < sc_.lines.size(); ++k)
    if (cfg.line_closed[k]) parent[find(sc_.lines[k].from - 1)] = find(sc_.lines[k].to - 1);
  std::vector<int> label(N, -1), out(N);
  int next = 0;
  for (int n = 0; n < N; ++n) {
    const int r = find(n);
    if (label[r] < 0) label[r] = next++;
    out[n] = label[r];
  }
  return out;
}

NetworkTopology MicrogridModel::topology(const NetworkConfig& cfg, bool include_grid) const {
  NetworkTopology t;
  t.n_nodes = sc_.node_count();
  t.omega_0 = sc_.omega_0;
  for (size_t k = 0; k < sc_.lines.size(); ++k) {
    if (!cfg.line_closed[k]) continue;
    const auto& l = sc_.lines[k];
    t.branches.push_back({l.from, l.to, BranchKind::RlLine, l.r, l.L, l.name});
  }
  for (const auto& l : cfg.loads) {
    if (l.model != LoadModel::Impedance) continue;
    t.branches.push_back({0, l.node, l.L > 0 ? BranchKind::RlLine : BranchKind::Resistive, l.R, l.L, l.name});
  }
  if (include_grid && sc_.grid)
    t.branches.push_back({0, sc_.grid->node, BranchKind::RlLine, sc_.grid->r, sc_.grid->L, "grid"});
  for (int n = 1; n <= t.n_nodes; ++n)
    t.branches.push_back({0, n, BranchKind::IbrShunt, 0.0, 0.0, sc_.ibrs[node_ibr_[n - 1]].name});
  return t;
}

void MicrogridModel::rhs(const Vec& x, const NetworkConfig& cfg, Vec& dx, SystemOutputs* out) const {
  thread_local Scratch s;
  const int N = sc_.node_count();
  const double w0 = sc_.omega_0;
  if (dx.size() != n_states_) dx.resize(n_states_);
  s.vc.assign(N, Vec2::Zero());
  s.idyn.assign(N, Vec2::Zero());
  s.vnode.resize(N);
  s.is.resize(N);
  s.tpv.assign(N, Vec2::Zero());
  s.tpi.assign(N, Vec2::Zero());

  for (int n = 0; n < N; ++n) {
    const int o = ibr_off_[n];
    const int vo = o + (sc_.ibrs[n].kind == IbrKind::Gfm ? 9 : 6);
    s.vc[sc_.ibrs[n].node - 1] = dq_to_common({x[vo], x[vo + 1]}, x[angle_index(n)]);
  }
  for (size_t k = 0; k < sc_.lines.size(); ++k) {
    if (!cfg.line_closed[k]) continue;
    const Vec2 i(x[line_off_[k]], x[line_off_[k] + 1]);
    s.idyn[sc_.lines[k].from - 1] += i;
    s.idyn[sc_.lines[k].to - 1] -= i;
  }
  bool any_static = false;
  s.Y.assign(N * N, 0.0);
  for (size_t k = 0; k < cfg.loads.size(); ++k) {
    const LoadSpec& l = cfg.loads[k];
    if (load_off_[k] < 0) {
      s.Y[(l.node - 1) * N + (l.node - 1)] += 1.0 / l.R;
      any_static = true;
      continue;
    }
    const Vec2 i(x[load_off_[k]], x[load_off_[k] + 1]);
    // impedance branches are stored in the neutral-to-node direction, sinks as drawn current
    if (l.model == LoadModel::Impedance) s.idyn[l.node - 1] -= i; else s.idyn[l.node - 1] += i;
  }
  Vec2 e_grid = Vec2::Zero();
  if (sc_.grid) {
    s.idyn[sc_.grid->node - 1] -= Vec2(x[grid_off_], x[grid_off_ + 1]);
    const double a = x[grid_off_ + 2];
    e_grid = sc_.grid->V * Vec2(std::cos(a), std::sin(a));
  }

  // Node voltages: plain nodes take the capacitor voltage; interface nodes
  // follow the composite terminal law, coupled through static conductances.
  bool any_pei = false;
  for (int n = 0; n < N; ++n) {
    const int node = sc_.ibrs[n].node - 1;
    s.vnode[node] = s.vc[node];
    if (!cfg.pei_active[n]) continue;
    any_pei = true;
    const PeiConfig c = blended(sc_.ibrs[n].pei->cfg, cfg.pei_blend);
    const double th = pei_angle(x, n);
    PeiReferences ref = cfg.pei_refs[n];
    if (tracker_off_[n] >= 0) {
      const int t = tracker_off_[n];
      ref = {{x[t], x[t + 1]}, {x[t + 2], x[t + 3]}};
    }
    s.tpv[node] = dq_to_common(ref.v_hat, th);
    s.tpi[node] = dq_to_common(ref.i_hat, th);
    s.vnode[node] = s.tpv[node] + (c.kappa - c.alpha * c.beta) * (s.vc[node] - s.tpv[node]) - c.beta * s.tpi[node] -
                    c.beta * s.idyn[node];
  }
  if (any_pei && any_static) {
    s.M.assign(N * N, 0.0);
    s.b.assign(N * 2, 0.0);
    for (int node = 0; node < N; ++node) {
      const int n = node_ibr_[node];
      s.M[node * N + node] = 1.0;
      if (cfg.pei_active[n]) {
        const double beta = blended(sc_.ibrs[n].pei->cfg, cfg.pei_blend).beta;
        for (int j = 0; j < N; ++j) s.M[node * N + j] += beta * s.Y[node * N + j];
      }
      s.b[node * 2] = s.vnode[node][0];
      s.b[node * 2 + 1] = s.vnode[node][1];
    }
    solve_small(N, s.M, s.b, 2);
    for (int node = 0; node < N; ++node) s.vnode[node] = {s.b[node * 2], s.b[node * 2 + 1]};
  }
  for (int node = 0; node < N; ++node) {
    s.is[node] = s.idyn[node];
    for (int j = 0; j < N; ++j) s.is[node] += s.Y[node * N + j] * s.vnode[j];
  }

  if (out) out->ibr.resize(N);
  for (int n = 0; n < N; ++n) {
    const IbrSpec& b = sc_.ibrs[n];
    const int node = b.node - 1;
    const int o = ibr_off_[n];
    const double delta = x[angle_index(n)];
    Vec2 ishunt = Vec2::Zero();
    if (cfg.pei_active[n]) ishunt = -blended(b.pei->cfg, cfg.pei_blend).alpha * (s.vc[node] - s.tpv[node]);
    const Vec2 io_DQ = -s.is[node] + ishunt;
    const Vec2 io = common_to_dq(io_DQ, delta);
    if (b.kind == IbrKind::Gfm) gfm_rhs(x.data() + o, io, b.gfm, dx.data() + o);
    else gfl_rhs(x.data() + o, io, b.gfl, dx.data() + o);

    const double th = pei_angle(x, n);
    if (tracker_off_[n] >= 0) {
      const int t = tracker_off_[n];
      const double wc = b.pei->tracker_cutoff;
      const Vec2 vl = common_to_dq(s.vc[node], th), il = common_to_dq(io_DQ, th);
      dx[t] = wc * (vl[0] - x[t]);
      dx[t + 1] = wc * (vl[1] - x[t + 1]);
      dx[t + 2] = wc * (il[0] - x[t + 2]);
      dx[t + 3] = wc * (il[1] - x[t + 3]);
    }
    if (pll_off_[n] >= 0) {
      const int p = pll_off_[n];
      const double vq = common_to_dq(s.vc[node], x[p])[1];
      dx[p] = x[p + 1] + b.pei->pll_kp * vq;
      dx[p + 1] = b.pei->pll_ki * vq;
    }
    if (out) {
      IbrOutputs& r = out->ibr[n];
      const int vo = o + (b.kind == IbrKind::Gfm ? 9 : 6);
      r.local.v_odq = {x[vo], x[vo + 1]};
      r.local.i_odq = io;
      r.v_node_DQ = s.vnode[node];
      r.pq = measure_power(r.local.v_odq, io);
      r.delta = delta;
      r.omega = w0 + dx[angle_index(n)];
      if (cfg.pei_active[n]) {
        const Vec2 vser = s.vc[node] - s.vnode[node];
        const Vec2 inet = -s.is[node];
        r.dv_cmd = common_to_dq(vser, th);
        r.di_cmd = common_to_dq(ishunt, th);
        r.P_v = -1.5 * vser.dot(inet);
        r.P_c = -1.5 * s.vc[node].dot(ishunt);
      } else {
        r.dv_cmd.setZero();
        r.di_cmd.setZero();
        r.P_v = r.P_c = 0.0;
      }
    }
  }

  for (size_t k = 0; k < sc_.lines.size(); ++k) {
    const int o = line_off_[k];
    if (!cfg.line_closed[k]) {
      dx[o] = dx[o + 1] = 0.0;
      continue;
    }
    const auto& l = sc_.lines[k];
    const Vec2 vb = s.vnode[l.from - 1] - s.vnode[l.to - 1];
    rl_derivative(x.data() + o, l.r, l.L, w0, vb[0], vb[1], dx.data() + o);
  }
  for (size_t k = 0; k < cfg.loads.size(); ++k) {
    const int o = load_off_[k];
    if (o < 0) continue;
    const LoadSpec& l = cfg.loads[k];
    const Vec2 v = s.vnode[l.node - 1];
    if (l.model == LoadModel::Impedance) {
      rl_derivative(x.data() + o, l.R, l.L, w0, -v[0], -v[1], dx.data() + o);
    } else {
      const double vb = voltage_base(sc_.ibrs[node_ibr_[l.node - 1]]);
      const Vec2 cmd = constant_power_command(l.P, l.Q, v, 0.05 * vb);
      dx[o] = (cmd[0] - x[o]) / l.tau;
      dx[o + 1] = (cmd[1] - x[o + 1]) / l.tau;
    }
  }
  if (sc_.grid) {
    const Vec2 vb = e_grid - s.vnode[sc_.grid->node - 1];
    rl_derivative(x.data() + grid_off_, sc_.grid->r, sc_.grid->L, w0, vb[0], vb[1], dx.data() + grid_off_);
    dx[grid_off_ + 2] = cfg.grid_omega - w0;
  }
}

void MicrogridModel::rotation_generator(const Vec& x, const std::vector<double>& dw, Vec& g) const {
  g = Vec::Zero(n_states_);
  for (int i = 0; i < n_states_; ++i) {
    const StateInfo& s = info_[i];
    if (s.island_node == 0) continue;
    const double w = dw[s.island_node - 1];
    switch (s.frame) {
      case StateInfo::Frame::Angle: g[i] = w; break;
      case StateInfo::Frame::CommonD: g[i] = -w * x[i + 1]; break;
      case StateInfo::Frame::CommonQ: g[i] = w * x[i - 1]; break;
      case StateInfo::Frame::Local: break;
    }
  }
}

namespace {

// Bookkeeping of which states are solved for in the steady-state problem.
struct SteadyLayout {
  std::vector<int> unknown_states;  // indices into x
  std::vector<int> equations;       // indices into dx
  std::vector<int> island_unknown;  // per island: index into the unknown vector of its frequency, or -1
  std::vector<double> island_fixed; // per island: fixed frequency offset when the grid sets it
  std::vector<int> node_island;
};

SteadyLayout steady_layout(const MicrogridModel& m, const NetworkConfig& cfg) {
  const Scenario& sc = m.scenario();
  SteadyLayout L;
  L.node_island = m.islands(cfg);
  const int K = *std::max_element(L.node_island.begin(), L.node_island.end()) + 1;
  std::vector<bool> fixed(m.size(), false), dropped_eq(m.size(), false);
  L.island_unknown.assign(K, -1);
  L.island_fixed.assign(K, 0.0);
  std::vector<bool> has_grid(K, false);
  if (sc.grid) {
    const int k = L.node_island[sc.grid->node - 1];
    has_grid[k] = true;
    L.island_fixed[k] = cfg.grid_omega - sc.omega_0;
    fixed[m.grid_offset() + 2] = true;
    dropped_eq[m.grid_offset() + 2] = true;
  }
  std::vector<bool> ref_taken(K, false);
  for (int n = 0; n < sc.node_count(); ++n) {
    const int k = L.node_island[sc.ibrs[n].node - 1];
    if (has_grid[k] || ref_taken[k]) continue;
    ref_taken[k] = true;
    fixed[m.angle_index(n)] = true;
  }
  for (size_t k = 0; k < sc.lines.size(); ++k) {
    if (cfg.line_closed[k]) continue;
    for (int j = 0; j < 2; ++j) fixed[m.line_offset(k) + j] = dropped_eq[m.line_offset(k) + j] = true;
  }
  for (int i = 0; i < m.size(); ++i) {
    if (!fixed[i]) L.unknown_states.push_back(i);
    if (!dropped_eq[i]) L.equations.push_back(i);
  }
  int next = static_cast<int>(L.unknown_states.size());
  for (int k = 0; k < K; ++k)
    if (!has_grid[k]) L.island_unknown[k] = next++;
  return L;
}

struct SteadyProblem {
  const MicrogridModel& m;
  NetworkConfig cfg;
  SteadyLayout L;
  std::vector<double> unk_scale;

  std::vector<double> node_dw(const Vec& z) const {
    std::vector<double> dw(L.node_island.size());
    for (size_t n = 0; n < dw.size(); ++n) {
      const int k = L.node_island[n];
      dw[n] = L.island_unknown[k] >= 0 ? z[L.island_unknown[k]] * unk_scale[L.island_unknown[k]] : L.island_fixed[k];
    }
    return dw;
  }

  void expand(const Vec& z, Vec& x) const {
    for (size_t j = 0; j < L.unknown_states.size(); ++j) x[L.unknown_states[j]] = z[j] * unk_scale[j];
  }

  Vec residual(const Vec& z, Vec& x) const {
    expand(z, x);
    Vec dx, g;
    m.rhs(x, cfg, dx);
    m.rotation_generator(x, node_dw(z), g);
    const double w0 = m.scenario().omega_0;
    Vec F(L.equations.size());
    for (size_t e = 0; e < L.equations.size(); ++e) {
      const int i = L.equations[e];
      F[e] = (dx[i] - g[i]) / (m.state_info()[i].scale * w0);
    }
    return F;
  }
};

std::string dominant_subsystem(const MicrogridModel& m, const SteadyLayout& L, const Vec& F) {
  Eigen::Index k;
  F.cwiseAbs().maxCoeff(&k);
  const std::string& name = m.state_info()[L.equations[k]].name;
  return name.substr(0, name.find('.'));
}

Vec initial_guess(const MicrogridModel& m, const NetworkConfig& cfg) {
  const Scenario& sc = m.scenario();
  const int N = sc.node_count();
  const double w0 = sc.omega_0;
  Vec x = Vec::Zero(m.size());
  std::vector<Vec2> vnode(N);
  std::vector<double> ang(N);
  for (int n = 0; n < N; ++n) {
    const IbrSpec& b = sc.ibrs[n];
    double V = b.kind == IbrKind::Gfm ? b.gfm.V0 : b.gfl.V_nominal;
    double a = b.angle;
    if (sc.grid && sc.grid->node == b.node && b.kind == IbrKind::Gfl) {
      V = sc.grid->V;
      a = sc.grid->angle;
    }
    ang[n] = a;
    vnode[b.node - 1] = V * Vec2(std::cos(a), std::sin(a));
  }
  std::vector<Vec2> is(N, Vec2::Zero());
  for (size_t k = 0; k < sc.lines.size(); ++k) {
    if (!cfg.line_closed[k]) continue;
    const auto& l = sc.lines[k];
    const Vec2 i = rl_steady(l.r, l.L, w0, vnode[l.from - 1] - vnode[l.to - 1]);
    x[m.line_offset(k)] = i[0];
    x[m.line_offset(k) + 1] = i[1];
    is[l.from - 1] += i;
    is[l.to - 1] -= i;
  }
  for (size_t k = 0; k < cfg.loads.size(); ++k) {
    const LoadSpec& l = cfg.loads[k];
    const Vec2 v = vnode[l.node - 1];
    Vec2 draw;
    if (l.model == LoadModel::Power) draw = constant_power_command(l.P, l.Q, v, 1.0);
    else draw = l.L > 0 ? rl_steady(l.R, l.L, w0, v) : Vec2(v / l.R);
    is[l.node - 1] += draw;
    if (m.load_offset(k) >= 0) {
      const Vec2 st = l.model == LoadModel::Impedance ? Vec2(-draw) : draw;
      x[m.load_offset(k)] = st[0];
      x[m.load_offset(k) + 1] = st[1];
    }
  }
  if (sc.grid) {
    const Vec2 e = sc.grid->V * Vec2(std::cos(sc.grid->angle), std::sin(sc.grid->angle));
    const int node = sc.grid->node - 1;
    // the grid absorbs whatever the inverter at its node injects
    Vec2 ig = Vec2::Zero();
    const IbrSpec& b = sc.ibrs[node];
    if (b.kind == IbrKind::Gfl) {
      const Vec2 inj = dq_to_common({(2.0 / 3.0) * b.gfl.P_star / sc.grid->V, -(2.0 / 3.0) * b.gfl.Q_star / sc.grid->V},
                                    sc.grid->angle);
      ig = is[node] - inj;
    } else {
      ig = rl_steady(sc.grid->r, sc.grid->L, w0, e - vnode[node]);
    }
    x[m.grid_offset()] = ig[0];
    x[m.grid_offset() + 1] = ig[1];
    x[m.grid_offset() + 2] = sc.grid->angle;
    is[node] -= ig;
  }
  for (int n = 0; n < N; ++n) {
    const IbrSpec& b = sc.ibrs[n];
    const int o = m.ibr_offset(n);
    const Vec2 v_loc = common_to_dq(vnode[b.node - 1], ang[n]);
    const Vec2 io = common_to_dq(-is[b.node - 1], ang[n]);
    if (b.kind == IbrKind::Gfm) {
      GfmState st = gfm_steady_state(b.gfm, v_loc, io);
      st.delta = ang[n];
      const auto a = st.to_array();
      for (int j = 0; j < GfmState::kSize; ++j) x[o + j] = a[j];
    } else {
      GflState st = gfl_steady_state(b.gfl, v_loc[0]);
      st.i_ld = -io[0];
      st.i_lq = -io[1] + b.gfl.omega_0 * b.gfl.C_f * v_loc[0];
      auto a = st.to_array();
      a[1] = ang[n];
      for (int j = 0; j < GflState::kSize; ++j) x[o + j] = a[j];
    }
    if (m.tracker_offset(n) >= 0) {
      const int t = m.tracker_offset(n);
      x[t] = v_loc[0];
      x[t + 1] = v_loc[1];
      x[t + 2] = io[0];
      x[t + 3] = io[1];
    }
    if (m.pll_offset(n) >= 0) x[m.pll_offset(n)] = ang[n];
  }
  return x;
}

// Damped Newton with a central-difference Jacobian; returns the iteration count.
int newton(const SteadyProblem& pb, Vec& z, Vec& x, Vec& F, const OperatingPointOptions& opts) {
  const int nz = static_cast<int>(z.size());
  F = pb.residual(z, x);
  double norm = F.norm();
  int it = 0;
  for (; it < opts.max_iterations && F.cwiseAbs().maxCoeff() > opts.tolerance; ++it) {
    Mat J(F.size(), nz);
    Vec xs = x;
    for (int j = 0; j < nz; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(z[j]));
      Vec zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      J.col(j) = (pb.residual(zp, xs) - pb.residual(zm, xs)) / (2 * h);
    }
    const Vec step = J.colPivHouseholderQr().solve(-F);
    double lam = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
      Vec zt = z + lam * step;
      Vec xt = x;
      const Vec Ft = pb.residual(zt, xt);
      if (Ft.allFinite() && Ft.norm() < norm) {
        z = zt;
        x = xt;
        F = Ft;
        norm = Ft.norm();
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return it;
}

}  // namespace

OperatingPoint find_operating_point(const MicrogridModel& m, const NetworkConfig& cfg_in,
                                    const OperatingPointOptions& opts, const Vec* guess) {
  const Scenario& sc = m.scenario();
  SteadyProblem pb{m, cfg_in, steady_layout(m, cfg_in), {}};
  if (!opts.include_pei) std::fill(pb.cfg.pei_active.begin(), pb.cfg.pei_active.end(), false);
  const int nu = static_cast<int>(pb.L.unknown_states.size());
  const int K = static_cast<int>(pb.L.island_unknown.size());
  int nz = nu;
  for (int k = 0; k < K; ++k) nz += pb.L.island_unknown[k] >= 0;
  if (nz != static_cast<int>(pb.L.equations.size()))
    fail(ErrorKind::NoConvergence, "steady-state problem is not square");

  Vec x = guess ? *guess : initial_guess(m, cfg_in);
  pb.unk_scale.assign(nz, 1.0);
  for (int j = 0; j < nu; ++j) pb.unk_scale[j] = m.state_info()[pb.L.unknown_states[j]].scale;
  Vec z(nz);
  for (int j = 0; j < nu; ++j) z[j] = x[pb.L.unknown_states[j]] / pb.unk_scale[j];
  // initial frequency offsets from the first droop unit of each island
  for (int k = 0; k < K; ++k) {
    const int j = pb.L.island_unknown[k];
    if (j < 0) continue;
    z[j] = 0.0;
    for (int n = 0; n < sc.node_count(); ++n) {
      const IbrSpec& b = sc.ibrs[n];
      if (pb.L.node_island[b.node - 1] != k || b.kind != IbrKind::Gfm) continue;
      z[j] = gfm_frequency(GfmState::from_array(x.data() + m.ibr_offset(n)), b.gfm) - sc.omega_0;
      break;
    }
  }

  const double accept = std::max(opts.tolerance, 1e-9);
  const bool blendable = opts.include_pei && std::find(pb.cfg.pei_active.begin(), pb.cfg.pei_active.end(), true) !=
                                                 pb.cfg.pei_active.end();
  Vec F;
  int it = 0;
  if (!blendable) {
    it = newton(pb, z, x, F, opts);
  } else {
    // Stale interface references can move the equilibrium far from the
    // guess: solve with transparent interfaces first, then walk the gains up.
    pb.cfg.pei_blend = 0.0;
    it = newton(pb, z, x, F, opts);
    double s = 0.0, ds = 0.5;
    while (F.cwiseAbs().maxCoeff() <= accept && s < 1.0 && ds > 1e-3) {
      const double s_try = std::min(1.0, s + ds);
      pb.cfg.pei_blend = s_try;
      Vec zt = z, xt = x, Ft;
      it += newton(pb, zt, xt, Ft, opts);
      if (Ft.cwiseAbs().maxCoeff() <= accept) {
        s = s_try;
        z = zt;
        x = xt;
        F = Ft;
        ds = std::min(2 * ds, 0.5);
      } else {
        ds *= 0.5;
      }
    }
    if (s < 1.0 && F.cwiseAbs().maxCoeff() <= accept) {
      std::ostringstream os;
      os << "operating point: interface continuation stopped at " << s * 100 << "% of the configured gains";
      fail(ErrorKind::NoConvergence, os.str());
    }
  }
  const double res = F.cwiseAbs().maxCoeff();
  if (!(res <= std::max(opts.tolerance, 1e-9))) {
    std::ostringstream os;
    os << "operating point: Newton stalled after " << it << " iterations with scaled residual " << res
       << "; largest residual in '" << dominant_subsystem(m, pb.L, F) << "'";
    fail(ErrorKind::NoConvergence, os.str());
  }

  OperatingPoint op;
  pb.expand(z, x);
  op.x = x;
  op.residual = res;
  op.dominant = dominant_subsystem(m, pb.L, F);
  op.iterations = it;
  const auto dw = pb.node_dw(z);
  SystemOutputs out;
  Vec dx;
  m.rhs(x, pb.cfg, dx, &out);
  for (int n = 0; n < sc.node_count(); ++n) {
    op.omega.push_back(sc.omega_0 + dw[sc.ibrs[n].node - 1]);
    op.terminals.push_back(out.ibr[n].local);
  }
  return op;
}

OperatingPoint find_operating_point(const Scenario& scenario) {
  MicrogridModel m(scenario);
  return find_operating_point(m, m.initial_config());
}

double steady_state_residual(const MicrogridModel& m, const NetworkConfig& cfg_in, const OperatingPoint& op,
                             bool include_pei, std::string* dominant) {
  NetworkConfig cfg = cfg_in;
  if (!include_pei) std::fill(cfg.pei_active.begin(), cfg.pei_active.end(), false);
  const SteadyLayout L = steady_layout(m, cfg);
  std::vector<double> dw(m.scenario().node_count());
  for (int n = 0; n < m.scenario().node_count(); ++n) dw[m.scenario().ibrs[n].node - 1] = op.omega[n] - m.scenario().omega_0;
  Vec dx, g;
  m.rhs(op.x, cfg, dx);
  m.rotation_generator(op.x, dw, g);
  Vec F(L.equations.size());
  for (size_t e = 0; e < L.equations.size(); ++e) {
    const int i = L.equations[e];
    F[e] = (dx[i] - g[i]) / (m.state_info()[i].scale * m.scenario().omega_0);
  }
  if (dominant) *dominant = dominant_subsystem(m, L, F);
  return F.cwiseAbs().maxCoeff();
}

SmallSignalModel assemble_small_signal(const MicrogridModel& m, const NetworkConfig& cfg_in, const OperatingPoint& op,
                                       SmallSignalScope scope, bool include_pei) {
  const Scenario& sc = m.scenario();
  NetworkConfig cfg = cfg_in;
  if (!include_pei) std::fill(cfg.pei_active.begin(), cfg.pei_active.end(), false);
  std::vector<bool> keep(m.size(), true);
  if (sc.grid) keep[m.grid_offset() + 2] = false;
  for (size_t k = 0; k < sc.lines.size(); ++k)
    if (!cfg.line_closed[k]) keep[m.line_offset(k)] = keep[m.line_offset(k) + 1] = false;
  if (scope == SmallSignalScope::Fast) {
    for (int n = 0; n < sc.node_count(); ++n) {
      const int o = m.ibr_offset(n);
      const int slow = sc.ibrs[n].kind == IbrKind::Gfm ? 3 : 2;
      for (int j = 0; j < slow; ++j) keep[o + j] = false;
      if (m.tracker_offset(n) >= 0)
        for (int j = 0; j < 4; ++j) keep[m.tracker_offset(n) + j] = false;
      if (m.pll_offset(n) >= 0) keep[m.pll_offset(n)] = keep[m.pll_offset(n) + 1] = false;
    }
  }
  std::vector<int> idx;
  for (int i = 0; i < m.size(); ++i)
    if (keep[i]) idx.push_back(i);
  std::vector<double> dw(sc.node_count());
  for (int n = 0; n < sc.node_count(); ++n) dw[sc.ibrs[n].node - 1] = op.omega[n] - sc.omega_0;

  auto F = [&](const Vec& x) {
    Vec dx, g;
    m.rhs(x, cfg, dx);
    m.rotation_generator(x, dw, g);
    return Vec(dx - g);
  };
  SmallSignalModel r;
  const int n = static_cast<int>(idx.size());
  r.A = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const int c = idx[j];
    const double h = 1e-6 * m.state_info()[c].scale;
    Vec xp = op.x, xm = op.x;
    xp[c] += h;
    xm[c] -= h;
    const Vec d = (F(xp) - F(xm)) / (2 * h);
    for (int i = 0; i < n; ++i) r.A(i, j) = d[idx[i]];
    r.labels.push_back(m.state_info()[c].name);
  }
  r.eigenvalues = Eigen::EigenSolver<Mat>(r.A, false).eigenvalues();
  // In the full model a common rotation of every angle and current is a
  // neutral direction (one per island without a grid); drop those modes.
  std::vector<double> re(r.eigenvalues.size());
  std::vector<int> order(r.eigenvalues.size());
  std::iota(order.begin(), order.end(), 0);
  int structural = 0;
  if (scope == SmallSignalScope::Full) {
    const auto isl = m.islands(cfg);
    const int K = *std::max_element(isl.begin(), isl.end()) + 1;
    structural = K - (sc.grid ? 1 : 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(r.eigenvalues[a]) < std::abs(r.eigenvalues[b]); });
  }
  r.max_real = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < order.size(); ++k) {
    const auto ev = r.eigenvalues[order[k]];
    if (static_cast<int>(k) < structural && std::abs(ev) < 1e-3) continue;
    r.max_real = std::max(r.max_real, ev.real());
  }
  return r;
}

PostEventAnalysis analyze_post_event(const Scenario& scenario, bool include_pei, SmallSignalScope scope) {
  MicrogridModel m(scenario);
  PostEventAnalysis r;
  r.cfg = m.initial_config();
  r.pre = find_operating_point(m, r.cfg);
  for (int n = 0; n < scenario.node_count(); ++n)
    if (scenario.ibrs[n].pei) r.cfg.pei_refs[n] = capture_references(r.pre, n);
  Vec x = r.pre.x;
  for (const auto& e : scenario.events) m.apply_event(e, r.cfg, x);
  OperatingPointOptions o;
  o.include_pei = include_pei;
  r.post = find_operating_point(m, r.cfg, o, &x);
  r.small_signal = assemble_small_signal(m, r.cfg, r.post, scope, include_pei);
  return r;
}

Mat stack_interconnection(const std::vector<DeviceBlock>& devices, const std::vector<BranchBlock>& branches) {
  const int N = static_cast<int>(devices.size());
  std::vector<int> off(N + 1, 0);
  for (int n = 0; n < N; ++n) off[n + 1] = off[n] + static_cast<int>(devices[n].model.states());
  const int nx = off[N];
  std::vector<int> dyn;
  Mat Y = Mat::Zero(2 * N, 2 * N);  // static conductance, node-pair ordering
  for (int k = 0; k < static_cast<int>(branches.size()); ++k) {
    const Branch& b = branches[k].branch;
    if (b.kind == BranchKind::RlLine) {
      dyn.push_back(k);
      continue;
    }
    Vec c = Vec::Zero(N);
    if (b.from > 0) c[b.from - 1] = 1.0;
    c[b.to - 1] = -1.0;
    for (int a = 0; a < 2; ++a)
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) Y(2 * i + a, 2 * j + a) += c[i] * c[j] / b.r;
  }
  const int nb = 2 * static_cast<int>(dyn.size());
  // Cb: node-pair injections from dynamic branch currents (pair ordering per branch)
  Mat Cb = Mat::Zero(2 * N, nb);
  for (int k = 0; k < static_cast<int>(dyn.size()); ++k) {
    const Branch& b = branches[dyn[k]].branch;
    for (int a = 0; a < 2; ++a) {
      if (b.from > 0) Cb(2 * (b.from - 1) + a, 2 * k + a) = 1.0;
      Cb(2 * (b.to - 1) + a, 2 * k + a) = -1.0;
    }
  }
  // composite device blocks in the common frame
  Mat Ac = Mat::Zero(nx, nx), Bc = Mat::Zero(nx, 2 * N), Cc = Mat::Zero(2 * N, nx), Dc = Mat::Zero(2 * N, 2 * N);
  for (int n = 0; n < N; ++n) {
    const auto& d = devices[n];
    const Mat2 T = rotation(d.delta);
    Mat A = d.model.A, B = d.model.B, C = d.model.C, D = Mat::Zero(2, 2);
    if (d.pei) {
      const auto& p = *d.pei;
      A = A - p.alpha * B * C;
      C = (p.kappa - p.alpha * p.beta) * C;
      D = p.beta * Mat::Identity(2, 2);
    }
    const int r = off[n], c = static_cast<int>(d.model.states());
    Ac.block(r, r, c, c) = A;
    Bc.block(r, 2 * n, c, 2) = B * T.transpose();
    Cc.block(2 * n, r, 2, c) = T * C;
    Dc.block(2 * n, 2 * n, 2, 2) = T * D * T.transpose();
  }
  // u = -(Cb ib + Y v),  v = Cc x + Dc u  =>  (I + Dc Y) v = Cc x - Dc Cb ib
  const Mat S = (Mat::Identity(2 * N, 2 * N) + Dc * Y).inverse();
  const Mat Vx = S * Cc, Vb = -S * Dc * Cb;
  const Mat Ux = -Y * Vx, Ub = -(Cb + Y * Vb);
  Mat A = Mat::Zero(nx + nb, nx + nb);
  A.topLeftCorner(nx, nx) = Ac + Bc * Ux;
  A.topRightCorner(nx, nb) = Bc * Ub;
  for (int k = 0; k < static_cast<int>(dyn.size()); ++k) {
    const auto& bb = branches[dyn[k]];
    const Branch& b = bb.branch;
    const int row = nx + 2 * k;
    // L i' = -r i + w L K i + (v_from - v_to)
    Mat vb = Mat::Zero(2, nx + nb);
    for (int a = 0; a < 2; ++a) {
      Vec sel = Vec::Zero(2 * N);
      if (b.from > 0) sel[2 * (b.from - 1) + a] = 1.0;
      sel[2 * (b.to - 1) + a] = -1.0;
      vb.block(a, 0, 1, nx) = sel.transpose() * Vx;
      vb.block(a, nx, 1, nb) = sel.transpose() * Vb;
    }
    A.block(row, 0, 2, nx + nb) = vb / b.L;
    A(row, row) += -b.r / b.L;
    A(row + 1, row + 1) += -b.r / b.L;
    A(row, row + 1) += bb.omega;
    A(row + 1, row) += -bb.omega;
  }
  return A;
}

}  // namespace gridpass
