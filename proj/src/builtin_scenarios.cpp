// Scenario library. Every constant not printed with the study itself comes from
// the classic three-inverter droop microgrid benchmark (coupling inductors,
// lines, grid impedance) and is pinned here so the test suite stays
// self-contained.
#include "gridpass/builtin_scenarios.hpp"

#include <cmath>

#include "gridpass/errors.hpp"

namespace gridpass {

namespace {

constexpr double kLineVoltage = 380.0;
const double kPhasePeak = kLineVoltage * std::sqrt(2.0 / 3.0);

// Coupling inductor of each inverter (benchmark): 0.03 ohm, 0.35 mH.
constexpr double kCouplingR = 0.03;
constexpr double kCouplingL = 0.35e-3;
// Benchmark line 1: 0.23 ohm, 0.1 ohm reactance at 50 Hz.
constexpr double kLine1R = 0.23;
const double kLine1L = 0.1 / (2.0 * kPi * 50.0);
// Inverter nodes sit at the capacitor, so an internal line absorbs the
// coupling inductors on both ends.
LineSpec internal_line(const std::string& name, int from, int to, double r, double L, bool closed) {
  return {name, from, to, r + 2 * kCouplingR, L + 2 * kCouplingL, closed};
}

// The tie line is not specified; both studies use benchmark line 1 between
// the coupling inductors of the two inverters it joins.
LineSpec tie(int from, int to) { return internal_line("tie", from, to, kLine1R, kLine1L, false); }

IbrSpec gfm(const std::string& name, int node, double k_iv) {
  IbrSpec b;
  b.name = name;
  b.kind = IbrKind::Gfm;
  b.node = node;
  b.gfm = GfmParameters::benchmark();
  b.gfm.K_iv = k_iv;
  b.gfm.V0 = kPhasePeak;
  return b;
}

PeiSetup pei(const PeiConfig& c) {
  PeiSetup s;
  s.cfg = c;
  return s;
}

LoadSpec resistor(const std::string& name, int node, double R) {
  LoadSpec l;
  l.name = name;
  l.node = node;
  l.R = R;
  return l;
}

LoadSpec power_load(const std::string& name, int node, double P) {
  LoadSpec l;
  l.name = name;
  l.node = node;
  l.model = LoadModel::Power;
  l.P = P;
  return l;
}

Event close_tie(double t, const std::string& line) { return {t, EventKind::CloseTie, line}; }

PeiConfig make_cfg(double alpha, double beta, double kappa, double gamma) {
  PeiConfig c;
  c.alpha = alpha;
  c.beta = beta;
  c.kappa = kappa;
  c.gamma_design = gamma;
  c.sigma = pei_sigma(alpha, beta, kappa);
  return c;
}

Scenario two_ibr(const std::string& id, bool with_pei, bool updated, bool pei1 = true) {
  Scenario s;
  s.id = "paper:" + id;
  s.description = "two islanded microgrids networked by a tie line at 0.4 s; IBR 2 voltage-loop integral gain 78";
  s.ibrs = {gfm("ibr1", 1, 390.0), gfm("ibr2", 2, 78.0)};
  if (with_pei) {
    if (pei1) s.ibrs[0].pei = pei(two_ibr_pei(1, updated));
    s.ibrs[1].pei = pei(two_ibr_pei(2, updated));
  }
  s.lines = {tie(1, 2)};
  s.loads = {resistor("load1", 1, 25.0), resistor("load2", 2, 20.0)};
  s.events = {close_tie(0.4, "tie")};
  s.sim.t_end = 2.0;
  return s;
}

Scenario three_ibr(const std::string& id, int pei_mask, bool cpl) {
  Scenario s;
  s.id = "paper:" + id;
  s.description = "microgrid with IBRs 1-2 networked to a single-IBR microgrid at 1 s; IBR 3 voltage-loop integral gain 39";
  s.ibrs = {gfm("ibr1", 1, 390.0), gfm("ibr2", 2, 390.0), gfm("ibr3", 3, 39.0)};
  for (int n = 0; n < 3; ++n)
    if (pei_mask & (1 << n)) s.ibrs[n].pei = pei(three_ibr_pei(n + 1));
  s.lines = {internal_line("line12", 1, 2, kLine1R, kLine1L, true), tie(2, 3)};
  if (cpl) s.loads = {power_load("load1", 1, 5784.0), power_load("load2", 3, 7226.0)};
  else s.loads = {resistor("load1", 1, 25.0), resistor("load2", 3, 20.0)};
  s.events = {close_tie(1.0, "tie")};
  s.sim.t_end = 2.5;
  return s;
}

Scenario single_gfl(bool with_pei) {
  Scenario s;
  s.id = with_pei ? "paper:gfl-pei" : "paper:gfl";
  s.description = "grid-following inverter on a distribution grid; grid frequency steps 50 -> 51.5 Hz at 0.3 s";
  IbrSpec b;
  b.name = "gfl";
  b.kind = IbrKind::Gfl;
  b.node = 1;
  b.gfl = GflParameters::benchmark();
  b.gfl.V_nominal = kPhasePeak;
  if (with_pei) b.pei = pei(gfl_pei());
  s.ibrs = {b};
  GridSpec g;
  g.node = 1;
  g.V = kPhasePeak;
  g.r = kCouplingR;
  g.L = kCouplingL;
  s.grid = g;
  s.events = {{0.3, EventKind::GridFrequencyStep, "", 51.5}};
  s.sim.t_end = 0.7;
  return s;
}

}  // namespace

PeiConfig two_ibr_pei(int ibr, bool updated) {
  if (ibr == 1)
    return updated ? make_cfg(0.0031, 0.17, 0.0251, 4.4277) : make_cfg(0.00045, 1.67, 0.36, 4.4277);
  if (ibr == 2)
    return updated ? make_cfg(0.0118, 0.15, 0.0338, 2.931) : make_cfg(0.00097, 2.18, 0.72, 2.931);
  fail(ErrorKind::InvalidArgument, "two-inverter study has inverters 1 and 2");
}

PeiConfig gfl_pei() { return make_cfg(0.0058, 157.25, 1.0, 157.25); }

// Not published for the three-inverter study: IBRs 1 and 2 reuse the
// benchmark-gain setting of the two-inverter study, IBR 3 gets a
// kappa-scaled copy covering its larger gain.
PeiConfig three_ibr_pei(int ibr) {
  if (ibr == 1 || ibr == 2) return make_cfg(0.00045, 1.67, 0.36, 4.4277);
  if (ibr == 3) return make_cfg(0.00097, 2.18, 0.55, 3.686);
  fail(ErrorKind::InvalidArgument, "three-inverter study has inverters 1 to 3");
}

std::vector<std::string> builtin_scenario_ids() {
  return {"paper:gfl",           "paper:gfl-pei",         "paper:microgrid1",      "paper:2ibr-nopei",
          "paper:2ibr-pei",      "paper:2ibr-pei2only",   "paper:2ibr-stable",     "paper:2ibr-sharing",
          "paper:2ibr-sharing-updated", "paper:2ibr-cpl-nopei", "paper:2ibr-cpl-pei", "paper:3ibr-nopei",
          "paper:3ibr-pei",      "paper:3ibr-pei3only",   "paper:3ibr-cpl-pei"};
}

bool is_builtin_scenario(const std::string& id) {
  const std::string full = id.rfind("paper:", 0) == 0 ? id : "paper:" + id;
  for (const auto& s : builtin_scenario_ids())
    if (s == full) return true;
  return false;
}

Scenario builtin_scenario(const std::string& id_in) {
  const std::string id = id_in.rfind("paper:", 0) == 0 ? id_in.substr(6) : id_in;
  Scenario s;
  if (id == "gfl") s = single_gfl(false);
  else if (id == "gfl-pei") s = single_gfl(true);
  else if (id == "microgrid1") {
    s.id = "paper:microgrid1";
    s.description = "single inverter microgrid; load 1 steps 25 -> 10 ohm at 0.5 s";
    s.ibrs = {gfm("ibr1", 1, 390.0)};
    s.loads = {resistor("load1", 1, 25.0)};
    s.events = {{0.5, EventKind::LoadStep, "load1", 10.0}};
    s.sim.t_end = 1.0;
  } else if (id == "2ibr-nopei") s = two_ibr(id, false, false);
  else if (id == "2ibr-pei") s = two_ibr(id, true, false);
  else if (id == "2ibr-pei2only") s = two_ibr(id, true, false, false);
  else if (id == "2ibr-stable") {
    s = two_ibr(id, false, false);
    s.ibrs[1].gfm.K_iv = 390.0;
    s.description = "two microgrids networked at 0.4 s with benchmark gains on both inverters";
  } else if (id == "2ibr-sharing" || id == "2ibr-sharing-updated") {
    s = two_ibr(id, true, id == "2ibr-sharing-updated");
    s.description += "; power-sharing study over 3 s";
    s.sim.t_end = 3.0;
  } else if (id == "2ibr-cpl-nopei" || id == "2ibr-cpl-pei") {
    s = two_ibr(id, id == "2ibr-cpl-pei", false);
    s.loads = {power_load("load1", 1, 5784.0), power_load("load2", 2, 7226.0)};
    s.description = "two microgrids with constant-power loads networked at 0.4 s";
  } else if (id == "3ibr-nopei") s = three_ibr(id, 0, false);
  else if (id == "3ibr-pei") s = three_ibr(id, 7, false);
  else if (id == "3ibr-pei3only") s = three_ibr(id, 4, false);
  else if (id == "3ibr-cpl-pei") s = three_ibr(id, 7, true);
  else fail(ErrorKind::InvalidArgument, "unknown built-in scenario '" + id_in + "'");
  s.validate();
  return s;
}

}  // namespace gridpass
