#include "gridpass/scenario.hpp"

#include <cmath>
#include <set>

#include "gridpass/errors.hpp"

namespace gridpass {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::CloseTie: return "close-tie";
    case EventKind::OpenTie: return "open-tie";
    case EventKind::LoadStep: return "load-step";
    case EventKind::GridFrequencyStep: return "grid-frequency-step";
    case EventKind::PeiEnable: return "pei-enable";
    case EventKind::PeiDisable: return "pei-disable";
  }
  return "?";
}

namespace {
bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }
void bad(const std::string& what) { fail(ErrorKind::InvalidScenario, what); }
}  // namespace

bool operator==(const Event& a, const Event& b) {
  return a.t == b.t && a.kind == b.kind && a.target == b.target && same(a.value, b.value) &&
         same(a.value2, b.value2);
}

int Scenario::find_ibr(const std::string& name) const {
  for (size_t k = 0; k < ibrs.size(); ++k)
    if (ibrs[k].name == name) return static_cast<int>(k);
  return -1;
}

int Scenario::find_line(const std::string& name) const {
  for (size_t k = 0; k < lines.size(); ++k)
    if (lines[k].name == name) return static_cast<int>(k);
  return -1;
}

int Scenario::find_load(const std::string& name) const {
  for (size_t k = 0; k < loads.size(); ++k)
    if (loads[k].name == name) return static_cast<int>(k);
  return -1;
}

bool Scenario::has_pei() const {
  for (const auto& b : ibrs)
    if (b.pei) return true;
  return false;
}

Scenario Scenario::without_pei() const {
  Scenario s = *this;
  for (auto& b : s.ibrs) b.pei.reset();
  std::vector<Event> kept;
  for (const auto& e : s.events)
    if (e.kind != EventKind::PeiEnable && e.kind != EventKind::PeiDisable) kept.push_back(e);
  s.events = kept;
  return s;
}

void Scenario::validate() const {
  const int N = node_count();
  if (N == 0) bad("scenario has no inverters");
  if (!(omega_0 > 0)) bad("omega_0 must be positive");
  std::set<std::string> names;
  std::vector<int> seen(N + 1, 0);
  for (const auto& b : ibrs) {
    if (b.name.empty()) bad("inverter without a name");
    if (!names.insert(b.name).second) bad("duplicate name '" + b.name + "'");
    if (b.node < 1 || b.node > N) bad("inverter '" + b.name + "' sits on node " + std::to_string(b.node) +
                                      " outside 1.." + std::to_string(N));
    if (seen[b.node]++) bad("node " + std::to_string(b.node) + " hosts more than one inverter");
    try {
      if (b.kind == IbrKind::Gfm) b.gfm.validate(); else b.gfl.validate();
    } catch (const Error& e) {
      bad("inverter '" + b.name + "': " + e.what());
    }
    if (b.pei) {
      const auto& c = b.pei->cfg;
      if (!(std::isfinite(c.alpha) && std::isfinite(c.beta) && std::isfinite(c.kappa)))
        bad("interface on '" + b.name + "' has non-finite gains");
      if (!(b.pei->tracker_cutoff > 0)) bad("interface on '" + b.name + "': tracker cutoff must be positive");
    }
  }
  for (const auto& l : lines) {
    if (l.name.empty()) bad("line without a name");
    if (!names.insert(l.name).second) bad("duplicate name '" + l.name + "'");
    if (l.from < 1 || l.to > N || l.from >= l.to)
      bad("line '" + l.name + "' needs endpoints 1 <= from < to <= " + std::to_string(N));
    if (!(l.r > 0 && l.L > 0)) bad("line '" + l.name + "' needs positive r and L");
  }
  for (const auto& l : loads) {
    if (l.name.empty()) bad("load without a name");
    if (!names.insert(l.name).second) bad("duplicate name '" + l.name + "'");
    if (l.node < 1 || l.node > N) bad("load '" + l.name + "' sits outside the node range");
    if (l.model == LoadModel::Impedance) {
      if (!(l.R > 0 && l.L >= 0)) bad("load '" + l.name + "' needs R > 0 and L >= 0");
    } else if (!(l.tau > 0)) {
      bad("load '" + l.name + "' needs a positive time constant");
    }
  }
  if (grid) {
    if (grid->node < 1 || grid->node > N) bad("grid node outside the node range");
    if (!(grid->V > 0 && grid->f > 0 && grid->r > 0 && grid->L > 0)) bad("grid needs positive V, f, r and L");
  }
  if (!(sim.dt > 0 && sim.t_end > 0)) bad("dt and t_end must be positive");
  if (!(sim.sample_interval >= sim.dt)) bad("sample interval must be at least dt");
  if (!(sim.blowup_factor > 1)) bad("blow-up factor must exceed 1");
  double last = 0.0;
  for (const auto& e : events) {
    const std::string tag = std::string(to_string(e.kind)) + " at t=" + std::to_string(e.t);
    if (!(e.t > last) || !(e.t < sim.t_end)) bad("event " + tag + ": times must increase strictly inside (0, t_end)");
    last = e.t;
    switch (e.kind) {
      case EventKind::CloseTie:
      case EventKind::OpenTie:
        if (find_line(e.target) < 0) bad("event " + tag + ": unknown line '" + e.target + "'");
        break;
      case EventKind::LoadStep: {
        const int k = find_load(e.target);
        if (k < 0) bad("event " + tag + ": unknown load '" + e.target + "'");
        if (!std::isfinite(e.value)) bad("event " + tag + ": missing new value");
        if (loads[k].model == LoadModel::Impedance && !(e.value > 0)) bad("event " + tag + ": resistance must be positive");
        break;
      }
      case EventKind::GridFrequencyStep:
        if (!grid) bad("event " + tag + ": scenario has no grid");
        if (!(e.value > 0)) bad("event " + tag + ": frequency must be positive");
        break;
      case EventKind::PeiEnable:
      case EventKind::PeiDisable: {
        const int k = find_ibr(e.target);
        if (k < 0 || !ibrs[k].pei) bad("event " + tag + ": '" + e.target + "' has no interface");
        break;
      }
    }
  }
}

}  // namespace gridpass
