#include <cmath>
#include <complex>

#include "gridpass/errors.hpp"
#include "gridpass/simulator.hpp"

namespace gridpass {

namespace {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

struct PhasorNetwork {
  const Scenario& sc;
  CMat Y;
  CVec src;  // injections from the grid source

  PhasorNetwork(const Scenario& s, const NetworkConfig& cfg, double grid_angle) : sc(s) {
    const int N = sc.node_count();
    const double w = sc.omega_0;
    Y = CMat::Zero(N, N);
    src = CVec::Zero(N);
    for (size_t k = 0; k < sc.lines.size(); ++k) {
      if (!cfg.line_closed[k]) continue;
      const auto& l = sc.lines[k];
      const cplx y = 1.0 / cplx(l.r, w * l.L);
      const int a = l.from - 1, b = l.to - 1;
      Y(a, a) += y;
      Y(b, b) += y;
      Y(a, b) -= y;
      Y(b, a) -= y;
    }
    for (const auto& l : cfg.loads) Y(l.node - 1, l.node - 1) += 1.0 / cplx(l.R, w * l.L);
    if (sc.grid) {
      const cplx y = 1.0 / cplx(sc.grid->r, w * sc.grid->L);
      Y(sc.grid->node - 1, sc.grid->node - 1) += y;
      src[sc.grid->node - 1] = y * std::polar(sc.grid->V, grid_angle);
    }
  }
};

}  // namespace

Trajectory simulate_droop_only(const Scenario& scenario) {
  scenario.validate();
  for (const auto& b : scenario.ibrs)
    if (b.kind != IbrKind::Gfm)
      fail(ErrorKind::InvalidScenario, "droop-only reduction needs grid-forming units only ('" + b.name + "')");
  for (const auto& l : scenario.loads)
    if (l.model != LoadModel::Impedance)
      fail(ErrorKind::InvalidScenario, "droop-only reduction supports impedance loads only ('" + l.name + "')");

  MicrogridModel m(scenario);
  NetworkConfig cfg = m.initial_config();
  const int N = scenario.node_count();
  const double w0 = scenario.omega_0;

  // state: per unit [delta, P, Q], then the grid angle
  Vec x = Vec::Zero(3 * N + 1);
  for (int n = 0; n < N; ++n) x[3 * n] = scenario.ibrs[n].angle;
  if (scenario.grid) x[3 * N] = scenario.grid->angle;

  auto powers = [&](const Vec& s, const NetworkConfig& c, Vec& p, Vec& q) {
    PhasorNetwork net(scenario, c, s[3 * N]);
    CVec v(N);
    for (int n = 0; n < N; ++n) {
      const auto& g = scenario.ibrs[n].gfm;
      v[scenario.ibrs[n].node - 1] = std::polar(g.V0 - g.droop_nq * s[3 * n + 2], s[3 * n]);
    }
    const CVec i = net.Y * v - net.src;
    p.resize(N);
    q.resize(N);
    for (int n = 0; n < N; ++n) {
      const int k = scenario.ibrs[n].node - 1;
      const cplx sp = 1.5 * v[k] * std::conj(i[k]);
      p[n] = sp.real();
      q[n] = sp.imag();
    }
  };
  auto f = [&](const Vec& s, const NetworkConfig& c) {
    Vec p, q, d = Vec::Zero(s.size());
    powers(s, c, p, q);
    for (int n = 0; n < N; ++n) {
      const auto& g = scenario.ibrs[n].gfm;
      d[3 * n] = g.omega_s - g.droop_mp * s[3 * n + 1] - w0;
      d[3 * n + 1] = g.omega_c * (p[n] - s[3 * n + 1]);
      d[3 * n + 2] = g.omega_c * (q[n] - s[3 * n + 2]);
    }
    d[3 * N] = c.grid_omega - w0;
    return d;
  };

  // start from the filtered powers at the algebraic equilibrium of the initial angles
  for (int it = 0; it < 200; ++it) {
    Vec p, q;
    powers(x, cfg, p, q);
    double change = 0;
    for (int n = 0; n < N; ++n) {
      change = std::max(change, std::abs(p[n] - x[3 * n + 1]) + std::abs(q[n] - x[3 * n + 2]));
      x[3 * n + 1] = p[n];
      x[3 * n + 2] = q[n];
    }
    if (change < 1e-9) break;
  }

  Trajectory tr;
  std::vector<int> ch;
  for (const auto& b : scenario.ibrs) {
    tr.ibr_names.push_back(b.name);
    for (const char* s : {"delta", "P", "Q", "p", "q", "omega"}) ch.push_back(tr.add_channel(b.name + "." + s));
  }
  const double h = scenario.sim.sample_interval;
  const long n_steps = std::lround(scenario.sim.t_end / h);
  std::vector<std::pair<long, const Event*>> events;
  for (const auto& e : scenario.events) events.emplace_back(std::lround(e.t / h), &e);
  size_t next = 0;
  Vec dummy = Vec::Zero(m.size());
  for (long k = 0; k <= n_steps; ++k) {
    while (next < events.size() && events[next].first <= k) m.apply_event(*events[next++].second, cfg, dummy);
    Vec p, q;
    powers(x, cfg, p, q);
    tr.t.push_back(k * h);
    for (int n = 0; n < N; ++n) {
      const auto& g = scenario.ibrs[n].gfm;
      const double vals[6] = {x[3 * n], x[3 * n + 1], x[3 * n + 2], p[n], q[n], g.omega_s - g.droop_mp * x[3 * n + 1]};
      for (int j = 0; j < 6; ++j) tr.data[ch[6 * n + j]].push_back(vals[j]);
    }
    if (k == n_steps) break;
    const Vec k1 = f(x, cfg);
    const Vec k2 = f(x + 0.5 * h * k1, cfg);
    const Vec k3 = f(x + 0.5 * h * k2, cfg);
    const Vec k4 = f(x + h * k3, cfg);
    x += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!x.allFinite()) {
      tr.diverged = true;
      tr.divergence_time = (k + 1) * h;
      tr.divergence_reason = "non-finite droop state";
      break;
    }
  }
  return tr;
}

}  // namespace gridpass
