#include "gridpass/report.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "gridpass/errors.hpp"
#include "gridpass/microgrid.hpp"

namespace gridpass {

namespace {

DeviceVerdict device_verdict(const Scenario& s, const MicrogridModel& m, const OperatingPoint& op, int n) {
  const IbrSpec& b = s.ibrs[n];
  DeviceVerdict d;
  d.ibr = b.name;
  try {
    const double* x = op.x.data() + m.ibr_offset(n);
    const StateSpaceModel lin = b.kind == IbrKind::Gfm ? linearize_fast_subsystem(b.gfm, GfmState::from_array(x))
                                                       : linearize_fast_subsystem(b.gfl, GflState::from_array(x));
    const L2GainResult g = l2_gain(lin);
    d.gamma = g.gamma;
    d.omega_peak = g.omega_peak;
  } catch (const Error& e) {
    d.gamma_error = e.what();
  }
  if (b.pei) {
    d.has_pei = true;
    d.pei = b.pei->cfg;
    if (std::isfinite(d.gamma)) {
      const PeiVerdict v = verify_pei(d.gamma, d.pei.alpha, d.pei.beta, d.pei.kappa);
      d.pei_valid = v.valid;
      if (v.sigma) d.sigma = *v.sigma;
      d.violated = v.violated;
    }
  }
  return d;
}

std::string fmt(double v, int prec = 6) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

void write_verdicts(std::ostream& os, const RunReport& r) {
  for (const auto& d : r.devices) {
    os << "  " << d.ibr << ": gamma " << fmt(d.gamma) << " (peak at " << fmt(d.omega_peak, 4) << " rad/s)";
    if (!d.gamma_error.empty()) os << " [" << d.gamma_error << "]";
    if (d.has_pei)
      os << "; interface alpha " << d.pei.alpha << " beta " << d.pei.beta << " kappa " << d.pei.kappa << " -> "
         << (d.pei_valid ? "valid, sigma " + fmt(d.sigma, 4) : "invalid");
    else
      os << "; no interface";
    os << "\n";
  }
  if (r.network_applicable)
    os << "  network: lambda_r_min " << fmt(r.network.lambda_r_min) << " lambda_c_max " << fmt(r.network.lambda_c_max)
       << " sigma_net " << fmt(r.network.sigma_net) << "\n";
  else
    os << "  network: " << r.network_note << "\n";
  os << "  max Re(eig): pre-event " << fmt(r.max_real_pre, 4) << ", post-event " << fmt(r.max_real_post, 4);
  if (!r.eigen_note.empty()) os << " [" << r.eigen_note << "]";
  os << "\n";
  os << "  verdict: " << (r.certified ? "certified stable" : "not certified") << "\n";
  for (const auto& f : r.findings) os << "    - " << f << "\n";
}

}  // namespace

RunReport certify(const Scenario& s) {
  s.validate();
  RunReport r;
  r.scenario_id = s.id;
  r.has_verdicts = true;
  MicrogridModel m(s);
  NetworkConfig cfg = m.initial_config();
  const OperatingPoint op = find_operating_point(m, cfg);
  for (int n = 0; n < s.node_count(); ++n) r.devices.push_back(device_verdict(s, m, op, n));

  // the certificate concerns the network as it stands after every scripted switch
  Vec x = op.x;
  for (const auto& e : s.events) m.apply_event(e, cfg, x);
  const NetworkTopology topo = m.topology(cfg);
  if (topo.network_branch_count() == 0) {
    r.network_note = "no network branches; the certificate reduces to the device verdicts";
  } else {
    try {
      r.network = network_passivity_index(topo);
      r.network_applicable = true;
    } catch (const Error& e) {
      r.network_note = e.what();
    }
  }

  bool ok = true;
  for (const auto& d : r.devices) {
    if (!d.gamma_error.empty()) {
      r.findings.push_back(d.ibr + ": no finite L2 gain (" + d.gamma_error + ")");
      ok = false;
    } else if (!d.has_pei) {
      r.findings.push_back(d.ibr + ": no interface, passivity of the inverter alone is not established");
      ok = false;
    } else if (!d.pei_valid) {
      std::string v;
      for (const auto& s2 : d.violated) v += (v.empty() ? "" : ", ") + s2;
      r.findings.push_back(d.ibr + ": interface violates " + v + " at gamma " + fmt(d.gamma));
      ok = false;
    }
  }
  if (m.has_constant_power_load()) {
    r.findings.push_back("constant-power loads are not RL branches; the network index does not apply");
    ok = false;
  }
  if (r.network_applicable && !(r.network.sigma_net > 0)) {
    r.findings.push_back("network passivity index is not positive");
    ok = false;
  } else if (!r.network_applicable && topo.network_branch_count() > 0) {
    r.findings.push_back("network index unavailable: " + r.network_note);
    ok = false;
  }
  r.certified = ok;

  try {
    r.max_real_pre = assemble_small_signal(m, m.initial_config(), op, SmallSignalScope::Full, true).max_real;
    if (!s.events.empty()) r.max_real_post = analyze_post_event(s, true).small_signal.max_real;
  } catch (const Error& e) {
    r.eigen_note = e.what();
  }
  return r;
}

void analyze_run(RunReport& r, const Scenario& s, const Trajectory& traj, const AnalyzeOptions& opts) {
  if (traj.samples() < 2) fail(ErrorKind::InvalidArgument, "trajectory has fewer than two samples");
  RunMetrics& mt = r.metrics;
  r.has_metrics = true;
  mt = RunMetrics{};
  mt.t_event = s.events.empty() ? traj.t.front() : s.events.front().t;
  mt.diverged = traj.diverged;
  mt.divergence_time = traj.divergence_time;
  mt.warnings = traj.warnings;
  const GrowthResult g = detect_growth(traj, mt.t_event);
  mt.growth = g.growing;
  if (g.growing) mt.growth_time = g.detected_at;
  if (!traj.diverged) {
    const SettlingResult st = settling_time(traj, mt.t_event);
    mt.settled = st.settled && !g.growing;
    if (mt.settled) mt.settling_time = st.time;
  }
  if (!traj.diverged && traj.t.back() > mt.t_event) mt.energy.push_back(energy_report(traj, mt.t_event, traj.t.back()));

  if (opts.sharing) {
    bool applicable = s.has_pei();
    for (const auto& b : s.ibrs) applicable = applicable && b.kind == IbrKind::Gfm;
    for (const auto& l : s.loads) applicable = applicable && l.model == LoadModel::Impedance;
    if (!applicable) {
      mt.sharing_note = "needs interfaces, grid-forming units and impedance loads";
    } else {
      try {
        mt.sharing_error = power_sharing_error(traj, simulate_droop_only(s));
      } catch (const Error& e) {
        mt.sharing_note = e.what();
      }
    }
  }
}

std::string report_text(const RunReport& r) {
  std::ostringstream os;
  os << "scenario " << r.scenario_id << "\n";
  if (r.has_verdicts) write_verdicts(os, r);
  if (r.has_metrics) {
    const RunMetrics& m = r.metrics;
    os << "  run: ";
    if (m.diverged) os << "diverged at " << fmt(m.divergence_time, 4) << " s; ";
    os << "growth " << (m.growth ? "yes at " + fmt(m.growth_time, 4) + " s" : "no") << "; ";
    os << (m.settled ? "settled " + fmt(m.settling_time, 4) + " s after the first event" : "not settled") << "\n";
    for (const auto& e : m.energy) {
      os << "  energy " << fmt(e.t0, 4) << "-" << fmt(e.t1, 4) << " s:\n";
      for (size_t k = 0; k < e.ibr.size(); ++k)
        os << "    " << e.ibr[k] << ": E " << fmt(e.E[k], 5) << " J, E_c " << fmt(e.E_c[k], 4) << " J, E_v "
           << fmt(e.E_v[k], 4) << " J, ratio " << fmt(100 * e.ratio[k], 3) << " %\n";
    }
    if (!m.sharing_error.empty()) {
      os << "  sharing error:";
      for (size_t k = 0; k < m.sharing_error.size(); ++k) os << " " << fmt(m.sharing_error[k], 4) << "%";
      os << "\n";
    } else if (!m.sharing_note.empty()) {
      os << "  sharing error: n/a (" << m.sharing_note << ")\n";
    }
    for (const auto& w : m.warnings) os << "  warning: " << w << "\n";
  }
  for (const auto& a : r.artifacts) os << "  wrote " << a << "\n";
  return os.str();
}

std::string report_json(const RunReport& r) {
  using nlohmann::json;
  json j;
  j["scenario"] = r.scenario_id;
  if (r.has_verdicts) {
    j["devices"] = json::array();
    for (const auto& d : r.devices) {
      json e{{"ibr", d.ibr}, {"gamma", num(d.gamma)}, {"omega_peak", num(d.omega_peak)}, {"has_pei", d.has_pei}};
      if (!d.gamma_error.empty()) e["gamma_error"] = d.gamma_error;
      if (d.has_pei) {
        e["pei"] = {{"alpha", d.pei.alpha}, {"beta", d.pei.beta}, {"kappa", d.pei.kappa}};
        e["pei_valid"] = d.pei_valid;
        e["sigma"] = num(d.sigma);
        e["violated"] = d.violated;
      }
      j["devices"].push_back(e);
    }
    if (r.network_applicable)
      j["network"] = {{"lambda_r_min", r.network.lambda_r_min},
                      {"lambda_c_max", r.network.lambda_c_max},
                      {"sigma_net", r.network.sigma_net}};
    else
      j["network"] = {{"note", r.network_note}};
    j["max_real_pre"] = num(r.max_real_pre);
    j["max_real_post"] = num(r.max_real_post);
    if (!r.eigen_note.empty()) j["eigen_note"] = r.eigen_note;
    j["certified"] = r.certified;
    j["findings"] = r.findings;
  }
  if (r.has_metrics) {
    const RunMetrics& m = r.metrics;
    json mj{{"t_event", m.t_event},
            {"diverged", m.diverged},
            {"divergence_time", num(m.divergence_time)},
            {"growth", m.growth},
            {"growth_time", num(m.growth_time)},
            {"settled", m.settled},
            {"settling_time", num(m.settling_time)},
            {"warnings", m.warnings}};
    mj["energy"] = json::array();
    for (const auto& e : m.energy) {
      json ej{{"t0", e.t0}, {"t1", e.t1}, {"ibrs", json::array()}};
      for (size_t k = 0; k < e.ibr.size(); ++k)
        ej["ibrs"].push_back({{"ibr", e.ibr[k]}, {"E", e.E[k]}, {"E_c", e.E_c[k]}, {"E_v", e.E_v[k]}, {"ratio", e.ratio[k]}});
      mj["energy"].push_back(ej);
    }
    if (!m.sharing_error.empty()) mj["sharing_error_percent"] = m.sharing_error;
    if (!m.sharing_note.empty()) mj["sharing_note"] = m.sharing_note;
    j["metrics"] = mj;
  }
  j["artifacts"] = r.artifacts;
  return j.dump(2) + "\n";
}

}  // namespace gridpass
