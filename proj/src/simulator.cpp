#include "gridpass/simulator.hpp"

#include <cmath>
#include <sstream>

#include "gridpass/errors.hpp"
#include "gridpass/pei.hpp"

namespace gridpass {

int Trajectory::add_channel(const std::string& name) {
  names.push_back(name);
  data.emplace_back();
  return static_cast<int>(names.size()) - 1;
}

bool Trajectory::has(const std::string& name) const {
  for (const auto& n : names)
    if (n == name) return true;
  return false;
}

int Trajectory::index(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  fail(ErrorKind::InvalidArgument, "no trajectory channel named '" + name + "'");
}

const std::vector<double>& Trajectory::operator[](const std::string& name) const { return data[index(name)]; }

namespace {

class Rk4 {
 public:
  Rk4(const MicrogridModel& m) : m_(m) {}
  void step(Vec& x, const NetworkConfig& cfg, double h) {
    m_.rhs(x, cfg, k1_);
    tmp_ = x + 0.5 * h * k1_;
    m_.rhs(tmp_, cfg, k2_);
    tmp_ = x + 0.5 * h * k2_;
    m_.rhs(tmp_, cfg, k3_);
    tmp_ = x + h * k3_;
    m_.rhs(tmp_, cfg, k4_);
    x += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }

 private:
  const MicrogridModel& m_;
  Vec k1_, k2_, k3_, k4_, tmp_;
};

// Channel layout and sampling for the detailed model.
struct Recorder {
  const MicrogridModel& m;
  Trajectory& tr;
  std::vector<int> state_ch;
  struct IbrCh { int iod, ioq, ia, ib, ic, p, q, omega, theta, dvd = -1, dvq, did, diq, pv, pc; };
  std::vector<IbrCh> ibr;
  std::vector<int> node_ch;

  Recorder(const MicrogridModel& model, Trajectory& t) : m(model), tr(t) {
    const Scenario& sc = m.scenario();
    for (const auto& b : sc.ibrs) tr.ibr_names.push_back(b.name);
    for (const auto& s : m.state_info()) state_ch.push_back(tr.add_channel(s.name));
    for (const auto& b : sc.ibrs) {
      const std::string p = b.name + ".";
      IbrCh c{};
      c.iod = tr.add_channel(p + "i_od");
      c.ioq = tr.add_channel(p + "i_oq");
      c.ia = tr.add_channel(p + "i_a");
      c.ib = tr.add_channel(p + "i_b");
      c.ic = tr.add_channel(p + "i_c");
      c.p = tr.add_channel(p + "p");
      c.q = tr.add_channel(p + "q");
      c.omega = tr.add_channel(p + "omega");
      c.theta = tr.add_channel(p + "theta");
      if (b.pei) {
        c.dvd = tr.add_channel(p + "pei.dv_d");
        c.dvq = tr.add_channel(p + "pei.dv_q");
        c.did = tr.add_channel(p + "pei.di_d");
        c.diq = tr.add_channel(p + "pei.di_q");
        c.pv = tr.add_channel(p + "pei.P_v");
        c.pc = tr.add_channel(p + "pei.P_c");
      }
      ibr.push_back(c);
    }
    for (int k = 1; k <= sc.node_count(); ++k) {
      node_ch.push_back(tr.add_channel("node" + std::to_string(k) + ".v_D"));
      tr.add_channel("node" + std::to_string(k) + ".v_Q");
    }
  }

  void record(double t, const Vec& x, const NetworkConfig& cfg) {
    SystemOutputs out;
    Vec dx;
    m.rhs(x, cfg, dx, &out);
    tr.t.push_back(t);
    for (size_t i = 0; i < state_ch.size(); ++i) tr.data[state_ch[i]].push_back(x[i]);
    const double w0 = m.scenario().omega_0;
    for (size_t n = 0; n < ibr.size(); ++n) {
      const IbrCh& c = ibr[n];
      const IbrOutputs& o = out.ibr[n];
      const double theta = w0 * t + o.delta;
      const Abc abc = inv_park({o.local.i_odq[0], o.local.i_odq[1], 0.0}, theta);
      tr.data[c.iod].push_back(o.local.i_odq[0]);
      tr.data[c.ioq].push_back(o.local.i_odq[1]);
      tr.data[c.ia].push_back(abc[0]);
      tr.data[c.ib].push_back(abc[1]);
      tr.data[c.ic].push_back(abc[2]);
      tr.data[c.p].push_back(o.pq[0]);
      tr.data[c.q].push_back(o.pq[1]);
      tr.data[c.omega].push_back(o.omega);
      tr.data[c.theta].push_back(wrap_angle(theta));
      if (c.dvd >= 0) {
        tr.data[c.dvd].push_back(o.dv_cmd[0]);
        tr.data[c.dvq].push_back(o.dv_cmd[1]);
        tr.data[c.did].push_back(o.di_cmd[0]);
        tr.data[c.diq].push_back(o.di_cmd[1]);
        tr.data[c.pv].push_back(o.P_v);
        tr.data[c.pc].push_back(o.P_c);
      }
      const int node = m.scenario().ibrs[n].node - 1;
      tr.data[node_ch[node]].push_back(o.v_node_DQ[0]);
      tr.data[node_ch[node] + 1].push_back(o.v_node_DQ[1]);
    }
  }
};

std::vector<double> state_ceilings(const MicrogridModel& m, double factor) {
  std::vector<double> c;
  for (const auto& s : m.state_info())
    c.push_back(s.frame == StateInfo::Frame::Angle ? std::numeric_limits<double>::infinity() : factor * s.scale);
  return c;
}

}  // namespace

SimulationResult run_simulation(const Scenario& scenario) {
  scenario.validate();
  MicrogridModel m(scenario);
  NetworkConfig cfg = m.initial_config();
  SimulationResult res;
  res.initial = find_operating_point(m, cfg);
  for (int n = 0; n < scenario.node_count(); ++n)
    if (scenario.ibrs[n].pei) cfg.pei_refs[n] = capture_references(res.initial, n);

  const SimSettings& s = scenario.sim;
  const double dt = s.dt;
  const long n_steps = std::lround(s.t_end / dt);
  const long decim = std::max(1L, std::lround(s.sample_interval / dt));
  std::vector<std::pair<long, const Event*>> events;
  for (const auto& e : scenario.events) events.emplace_back(std::lround(e.t / dt), &e);

  Trajectory& tr = res.trajectory;
  Recorder rec(m, tr);
  const auto ceiling = state_ceilings(m, s.blowup_factor);
  Vec x = res.initial.x;
  Rk4 rk(m);
  size_t next_event = 0;
  for (long k = 0; k <= n_steps; ++k) {
    while (next_event < events.size() && events[next_event].first <= k) {
      m.apply_event(*events[next_event].second, cfg, x);
      ++next_event;
    }
    const double t = k * dt;
    if (k % decim == 0) rec.record(t, x, cfg);
    if (k == n_steps) break;
    rk.step(x, cfg, dt);
    bool bad = false;
    for (int i = 0; i < x.size() && !bad; ++i) {
      if (!std::isfinite(x[i])) {
        tr.divergence_reason = "non-finite state '" + m.state_info()[i].name + "'";
        bad = true;
      } else if (std::abs(x[i]) > ceiling[i]) {
        std::ostringstream os;
        os << "state '" << m.state_info()[i].name << "' exceeded " << ceiling[i];
        tr.divergence_reason = os.str();
        bad = true;
      }
    }
    if (bad) {
      tr.diverged = true;
      tr.divergence_time = (k + 1) * dt;
      break;
    }
  }

  for (int n = 0; n < scenario.node_count(); ++n) {
    const auto& b = scenario.ibrs[n];
    if (!b.pei || m.tracker_offset(n) < 0 || tr.diverged) continue;
    const int o = m.tracker_offset(n);
    const PeiReferences& r0 = cfg.pei_refs[n];
    const double drift = (Vec2(x[o], x[o + 1]) - r0.v_hat).norm() / std::max(1.0, r0.v_hat.norm());
    if (drift > b.pei->stale_threshold) {
      std::ostringstream os;
      os << "StaleReference: " << b.name << " tracker drifted " << drift * 100 << "% from the captured equilibrium";
      tr.warnings.push_back(os.str());
    }
  }
  res.final_state = x;
  res.final_config = cfg;
  return res;
}

Trajectory simulate(const Scenario& scenario) { return run_simulation(scenario).trajectory; }

Vec integrate_fixed(const MicrogridModel& model, const NetworkConfig& cfg, Vec x, double t0, double t1, double dt) {
  if (!(dt > 0) || !(t1 >= t0)) fail(ErrorKind::InvalidArgument, "integrate_fixed: need dt > 0 and t1 >= t0");
  const long n = std::lround((t1 - t0) / dt);
  Rk4 rk(model);
  for (long k = 0; k < n; ++k) rk.step(x, cfg, dt);
  return x;
}

}  // namespace gridpass
