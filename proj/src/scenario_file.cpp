#include "gridpass/scenario_file.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gridpass/builtin_scenarios.hpp"
#include "gridpass/errors.hpp"
#include "gridpass/units.hpp"

namespace gridpass {

namespace {

template <class P>
struct Field {
  const char* key;
  Unit unit;
  double P::*member;
};

const Field<GfmParameters> kGfmFields[] = {
    {"r_f", Unit::Ohm, &GfmParameters::r_f},
    {"L_f", Unit::Henry, &GfmParameters::L_f},
    {"C_f", Unit::Farad, &GfmParameters::C_f},
    {"omega_c", Unit::RadPerSecond, &GfmParameters::omega_c},
    {"droop_mp", Unit::None, &GfmParameters::droop_mp},
    {"droop_nq", Unit::None, &GfmParameters::droop_nq},
    {"V0", Unit::Volt, &GfmParameters::V0},
    {"omega_s", Unit::RadPerSecond, &GfmParameters::omega_s},
    {"K_pv", Unit::None, &GfmParameters::K_pv},
    {"K_iv", Unit::None, &GfmParameters::K_iv},
    {"F_ff", Unit::None, &GfmParameters::F_ff},
    {"K_pc", Unit::None, &GfmParameters::K_pc},
    {"K_ic", Unit::None, &GfmParameters::K_ic},
    {"omega_0", Unit::RadPerSecond, &GfmParameters::omega_0},
};

const Field<GflParameters> kGflFields[] = {
    {"r_f", Unit::Ohm, &GflParameters::r_f},
    {"L_f", Unit::Henry, &GflParameters::L_f},
    {"C_f", Unit::Farad, &GflParameters::C_f},
    {"K_pp", Unit::None, &GflParameters::K_pp},
    {"K_ip", Unit::None, &GflParameters::K_ip},
    {"K_pc", Unit::None, &GflParameters::K_pc},
    {"K_ic", Unit::None, &GflParameters::K_ic},
    {"P_star", Unit::Watt, &GflParameters::P_star},
    {"Q_star", Unit::Var, &GflParameters::Q_star},
    {"omega_0", Unit::RadPerSecond, &GflParameters::omega_0},
    {"V_nominal", Unit::Volt, &GflParameters::V_nominal},
    {"v_floor_fraction", Unit::None, &GflParameters::v_floor_fraction},
};

struct Value {
  std::string text;
  int line = 0;
};

struct Entity {
  std::string name;
  int line = 0;
  std::vector<std::pair<std::string, Value>> fields;  // in file order
};

struct EventLine {
  std::vector<std::string> tokens;
  int line = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':')) return false;
  return true;
}

class Reader {
 public:
  Reader(const std::string& text, std::string source) : src_(std::move(source)) { read(text); }

  Scenario build();

 private:
  std::string src_;
  std::map<std::string, Value> scenario_, grid_, sim_;
  bool has_grid_ = false;
  std::vector<Entity> ibrs_, lines_, loads_, peis_;
  std::vector<EventLine> events_;

  [[noreturn]] void error(int line, const std::string& msg) const {
    fail(ErrorKind::Parse, src_ + ":" + std::to_string(line) + ": " + msg);
  }

  double quantity(const Value& v, Unit u, const std::string& key) const {
    try {
      return parse_quantity(v.text, u);
    } catch (const Error& e) {
      error(v.line, key + ": " + e.what());
    }
  }

  int integer(const Value& v, const std::string& key) const {
    const double d = quantity(v, Unit::None, key);
    if (d != std::floor(d) || std::abs(d) > 1e6) error(v.line, key + ": expected an integer, found '" + v.text + "'");
    return static_cast<int>(d);
  }

  bool boolean(const Value& v, const std::string& key) const {
    if (v.text == "true" || v.text == "yes") return true;
    if (v.text == "false" || v.text == "no") return false;
    error(v.line, key + ": expected true or false, found '" + v.text + "'");
  }

  void read(const std::string& text);
  void add_entity(std::vector<Entity>& list, const std::string& key, const Value& v, const std::string& section);
  void add_plain(std::map<std::string, Value>& map, const std::string& key, const Value& v);

  void build_ibr(const Entity& e, Scenario& s) const;
  void build_line(const Entity& e, Scenario& s) const;
  void build_load(const Entity& e, Scenario& s) const;
  void build_pei(const Entity& e, Scenario& s) const;
  Event build_event(const EventLine& ev, const Scenario& s) const;
};

void Reader::read(const std::string& text) {
  std::istringstream is(text);
  std::string raw, section;
  int ln = 0;
  while (std::getline(is, raw)) {
    ++ln;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') error(ln, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"scenario", "ibrs", "topology", "loads", "grid", "events", "pei", "sim"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok) error(ln, "unknown section [" + section + "]");
      if (section == "grid") has_grid_ = true;
      continue;
    }
    if (section.empty()) error(ln, "content before the first section header");
    if (section == "events") {
      EventLine ev{{}, ln};
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) ev.tokens.push_back(tok);
      events_.push_back(ev);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) error(ln, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const Value v{trim(line.substr(eq + 1)), ln};
    if (key.empty()) error(ln, "missing key before '='");
    if (v.text.empty() && !(section == "scenario" && key == "description")) error(ln, "missing value for '" + key + "'");
    if (section == "scenario") add_plain(scenario_, key, v);
    else if (section == "grid") add_plain(grid_, key, v);
    else if (section == "sim") add_plain(sim_, key, v);
    else if (section == "ibrs") add_entity(ibrs_, key, v, section);
    else if (section == "topology") add_entity(lines_, key, v, section);
    else if (section == "loads") add_entity(loads_, key, v, section);
    else add_entity(peis_, key, v, section);
  }
}

void Reader::add_plain(std::map<std::string, Value>& map, const std::string& key, const Value& v) {
  if (!map.emplace(key, v).second) error(v.line, "duplicate key '" + key + "'");
}

void Reader::add_entity(std::vector<Entity>& list, const std::string& key, const Value& v, const std::string& section) {
  const auto dot = key.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size())
    error(v.line, "keys in [" + section + "] take the form <name>.<field>, found '" + key + "'");
  const std::string name = key.substr(0, dot), field = key.substr(dot + 1);
  if (!valid_name(name)) error(v.line, "invalid name '" + name + "'");
  Entity* e = nullptr;
  for (auto& x : list)
    if (x.name == name) e = &x;
  if (!e) {
    list.push_back({name, v.line, {}});
    e = &list.back();
  }
  for (const auto& [f, old] : e->fields)
    if (f == field) error(v.line, "duplicate key '" + key + "' (first set on line " + std::to_string(old.line) + ")");
  e->fields.emplace_back(field, v);
}

template <class P, size_t N>
const Field<P>* find_field(const Field<P> (&table)[N], const std::string& key) {
  for (const auto& f : table)
    if (key == f.key) return &f;
  return nullptr;
}

void Reader::build_ibr(const Entity& e, Scenario& s) const {
  IbrSpec b;
  b.name = e.name;
  bool have_node = false;
  for (const auto& [k, v] : e.fields)
    if (k == "kind") {
      if (v.text == "gfm") b.kind = IbrKind::Gfm;
      else if (v.text == "gfl") b.kind = IbrKind::Gfl;
      else error(v.line, e.name + ".kind: expected gfm or gfl, found '" + v.text + "'");
    }
  for (const auto& [k, v] : e.fields) {
    const std::string full = e.name + "." + k;
    if (k == "kind") continue;
    if (k == "node") {
      b.node = integer(v, full);
      have_node = true;
    } else if (k == "angle") {
      b.angle = quantity(v, Unit::Radian, full);
    } else if (b.kind == IbrKind::Gfm) {
      const auto* f = find_field(kGfmFields, k);
      if (!f) error(v.line, "unknown key '" + full + "' for a grid-forming inverter");
      b.gfm.*(f->member) = quantity(v, f->unit, full);
    } else {
      const auto* f = find_field(kGflFields, k);
      if (!f) error(v.line, "unknown key '" + full + "' for a grid-following inverter");
      b.gfl.*(f->member) = quantity(v, f->unit, full);
    }
  }
  if (!have_node) error(e.line, "inverter '" + e.name + "' needs a node");
  s.ibrs.push_back(b);
}

void Reader::build_line(const Entity& e, Scenario& s) const {
  LineSpec l;
  l.name = e.name;
  int have = 0;
  for (const auto& [k, v] : e.fields) {
    const std::string full = e.name + "." + k;
    if (k == "from") l.from = integer(v, full), have |= 1;
    else if (k == "to") l.to = integer(v, full), have |= 2;
    else if (k == "r") l.r = quantity(v, Unit::Ohm, full), have |= 4;
    else if (k == "L") l.L = quantity(v, Unit::Henry, full), have |= 8;
    else if (k == "closed") l.closed = boolean(v, full);
    else error(v.line, "unknown key '" + full + "' for a line");
  }
  if (have != 15) error(e.line, "line '" + e.name + "' needs from, to, r and L");
  s.lines.push_back(l);
}

void Reader::build_load(const Entity& e, Scenario& s) const {
  LoadSpec l;
  l.name = e.name;
  bool have_node = false;
  for (const auto& [k, v] : e.fields)
    if (k == "model") {
      if (v.text == "impedance") l.model = LoadModel::Impedance;
      else if (v.text == "power") l.model = LoadModel::Power;
      else error(v.line, e.name + ".model: expected impedance or power, found '" + v.text + "'");
    }
  for (const auto& [k, v] : e.fields) {
    const std::string full = e.name + "." + k;
    const bool imp = l.model == LoadModel::Impedance;
    if (k == "model") continue;
    if (k == "node") l.node = integer(v, full), have_node = true;
    else if (imp && k == "R") l.R = quantity(v, Unit::Ohm, full);
    else if (imp && k == "L") l.L = quantity(v, Unit::Henry, full);
    else if (!imp && k == "P") l.P = quantity(v, Unit::Watt, full);
    else if (!imp && k == "Q") l.Q = quantity(v, Unit::Var, full);
    else if (!imp && k == "tau") l.tau = quantity(v, Unit::Second, full);
    else error(v.line, "unknown key '" + full + "' for " + (imp ? "an impedance" : "a constant-power") + " load");
  }
  if (!have_node) error(e.line, "load '" + e.name + "' needs a node");
  s.loads.push_back(l);
}

void Reader::build_pei(const Entity& e, Scenario& s) const {
  const int n = s.find_ibr(e.name);
  if (n < 0) error(e.line, "interface for unknown inverter '" + e.name + "'");
  PeiSetup p;
  bool have_sigma = false;
  int have = 0;
  for (const auto& [k, v] : e.fields) {
    const std::string full = e.name + "." + k;
    if (k == "alpha") p.cfg.alpha = quantity(v, Unit::None, full), have |= 1;
    else if (k == "beta") p.cfg.beta = quantity(v, Unit::None, full), have |= 2;
    else if (k == "kappa") p.cfg.kappa = quantity(v, Unit::None, full), have |= 4;
    else if (k == "gamma") p.cfg.gamma_design = quantity(v, Unit::None, full);
    else if (k == "sigma") p.cfg.sigma = quantity(v, Unit::None, full), have_sigma = true;
    else if (k == "enabled") p.enabled = boolean(v, full);
    else if (k == "mode") {
      if (v.text == "frozen") p.mode = ReferenceMode::Frozen;
      else if (v.text == "tracker") p.mode = ReferenceMode::Tracker;
      else error(v.line, full + ": expected frozen or tracker, found '" + v.text + "'");
    } else if (k == "cutoff") p.tracker_cutoff = quantity(v, Unit::RadPerSecond, full);
    else if (k == "stale_threshold") p.stale_threshold = quantity(v, Unit::None, full);
    else if (k == "angle_source") {
      if (v.text == "inverter") p.angle = PeiAngleSource::InverterFrame;
      else if (v.text == "pll") p.angle = PeiAngleSource::MeasurementPll;
      else error(v.line, full + ": expected inverter or pll, found '" + v.text + "'");
    } else if (k == "pll_kp") p.pll_kp = quantity(v, Unit::None, full);
    else if (k == "pll_ki") p.pll_ki = quantity(v, Unit::None, full);
    else error(v.line, "unknown key '" + full + "' for an interface");
  }
  if (have != 7) error(e.line, "interface '" + e.name + "' needs alpha, beta and kappa");
  if (!have_sigma) p.cfg.sigma = pei_sigma(p.cfg.alpha, p.cfg.beta, p.cfg.kappa);
  if (s.ibrs[n].pei) error(e.line, "second interface for '" + e.name + "'");
  s.ibrs[n].pei = p;
}

Event Reader::build_event(const EventLine& ev, const Scenario& s) const {
  const auto& tk = ev.tokens;
  auto need = [&](size_t lo, size_t hi, const char* usage) {
    if (tk.size() < lo || tk.size() > hi) error(ev.line, std::string("expected '") + usage + "'");
  };
  if (tk.size() < 2) error(ev.line, "expected '<time> <kind> ...'");
  Event e;
  e.t = quantity({tk[0], ev.line}, Unit::Second, "event time");
  const std::string& kind = tk[1];
  if (kind == "close-tie" || kind == "open-tie") {
    need(3, 3, "<time> close-tie|open-tie <line>");
    e.kind = kind == "close-tie" ? EventKind::CloseTie : EventKind::OpenTie;
    e.target = tk[2];
    if (s.find_line(e.target) < 0) error(ev.line, "unknown line '" + e.target + "'");
  } else if (kind == "load-step") {
    need(4, 5, "<time> load-step <load> <R> | <P> [<Q>]");
    e.kind = EventKind::LoadStep;
    e.target = tk[2];
    const int k = s.find_load(e.target);
    if (k < 0) error(ev.line, "unknown load '" + e.target + "'");
    if (s.loads[k].model == LoadModel::Impedance) {
      if (tk.size() != 4) error(ev.line, "an impedance load step takes one resistance");
      e.value = quantity({tk[3], ev.line}, Unit::Ohm, "load-step");
    } else {
      e.value = quantity({tk[3], ev.line}, Unit::Watt, "load-step");
      if (tk.size() == 5) e.value2 = quantity({tk[4], ev.line}, Unit::Var, "load-step");
    }
  } else if (kind == "grid-frequency-step") {
    need(3, 3, "<time> grid-frequency-step <f>");
    e.kind = EventKind::GridFrequencyStep;
    e.value = quantity({tk[2], ev.line}, Unit::Hertz, "grid-frequency-step");
  } else if (kind == "pei-enable" || kind == "pei-disable") {
    need(3, 3, "<time> pei-enable|pei-disable <inverter>");
    e.kind = kind == "pei-enable" ? EventKind::PeiEnable : EventKind::PeiDisable;
    e.target = tk[2];
    if (s.find_ibr(e.target) < 0) error(ev.line, "unknown inverter '" + e.target + "'");
  } else {
    error(ev.line, "unknown event kind '" + kind + "'");
  }
  return e;
}

Scenario Reader::build() {
  Scenario s;
  for (const auto& [k, v] : scenario_) {
    if (k == "id") s.id = v.text;
    else if (k == "description") s.description = v.text;
    else if (k == "omega_0") s.omega_0 = quantity(v, Unit::RadPerSecond, k);
    else if (k == "f0") s.omega_0 = 2.0 * kPi * quantity(v, Unit::Hertz, k);
    else error(v.line, "unknown key '" + k + "' in [scenario]");
  }
  if (scenario_.count("omega_0") && scenario_.count("f0")) error(scenario_.at("f0").line, "give either f0 or omega_0");
  for (const auto& e : ibrs_) build_ibr(e, s);
  for (const auto& e : lines_) build_line(e, s);
  for (const auto& e : loads_) build_load(e, s);
  for (const auto& e : peis_) build_pei(e, s);
  if (has_grid_) {
    GridSpec g;
    bool have_node = false, have_v = false;
    for (const auto& [k, v] : grid_) {
      if (k == "node") g.node = integer(v, "grid.node"), have_node = true;
      else if (k == "V") g.V = quantity(v, Unit::Volt, "grid.V"), have_v = true;
      else if (k == "f") g.f = quantity(v, Unit::Hertz, "grid.f");
      else if (k == "r") g.r = quantity(v, Unit::Ohm, "grid.r");
      else if (k == "L") g.L = quantity(v, Unit::Henry, "grid.L");
      else if (k == "angle") g.angle = quantity(v, Unit::Radian, "grid.angle");
      else error(v.line, "unknown key '" + k + "' in [grid]");
    }
    if (!have_node || !have_v) fail(ErrorKind::Parse, src_ + ": [grid] needs node and V");
    s.grid = g;
  }
  for (const auto& [k, v] : sim_) {
    if (k == "t_end") s.sim.t_end = quantity(v, Unit::Second, k);
    else if (k == "dt") s.sim.dt = quantity(v, Unit::Second, k);
    else if (k == "sample") s.sim.sample_interval = quantity(v, Unit::Second, k);
    else if (k == "blowup") s.sim.blowup_factor = quantity(v, Unit::None, k);
    else error(v.line, "unknown key '" + k + "' in [sim]");
  }
  for (const auto& ev : events_) s.events.push_back(build_event(ev, s));
  try {
    s.validate();
  } catch (const Error& e) {
    fail(ErrorKind::InvalidScenario, src_ + ": " + e.what());
  }
  return s;
}

std::string q(double v, Unit u) { return format_quantity(v, u); }

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& source) {
  return Reader(text, source).build();
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scenario(ss.str(), path);
}

Scenario resolve_scenario(const std::string& ref) {
  if (ref.rfind("paper:", 0) == 0 || is_builtin_scenario(ref)) return builtin_scenario(ref);
  return load_scenario_file(ref);
}

std::string emit_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "[scenario]\n";
  if (!s.id.empty()) os << "id = " << s.id << "\n";
  if (!s.description.empty()) {
    std::string d = s.description;
    for (auto& c : d)
      if (c == '\n' || c == '\r') c = ' ';
    os << "description = " << d << "\n";
  }
  os << "omega_0 = " << q(s.omega_0, Unit::RadPerSecond) << "\n";

  os << "\n[ibrs]\n";
  for (const auto& b : s.ibrs) {
    const std::string p = b.name + ".";
    os << p << "kind = " << (b.kind == IbrKind::Gfm ? "gfm" : "gfl") << "\n";
    os << p << "node = " << b.node << "\n";
    os << p << "angle = " << q(b.angle, Unit::Radian) << "\n";
    if (b.kind == IbrKind::Gfm)
      for (const auto& f : kGfmFields) os << p << f.key << " = " << q(b.gfm.*f.member, f.unit) << "\n";
    else
      for (const auto& f : kGflFields) os << p << f.key << " = " << q(b.gfl.*f.member, f.unit) << "\n";
  }
  if (!s.lines.empty()) {
    os << "\n[topology]\n";
    for (const auto& l : s.lines) {
      const std::string p = l.name + ".";
      os << p << "from = " << l.from << "\n" << p << "to = " << l.to << "\n";
      os << p << "r = " << q(l.r, Unit::Ohm) << "\n" << p << "L = " << q(l.L, Unit::Henry) << "\n";
      os << p << "closed = " << (l.closed ? "true" : "false") << "\n";
    }
  }
  if (!s.loads.empty()) {
    os << "\n[loads]\n";
    for (const auto& l : s.loads) {
      const std::string p = l.name + ".";
      os << p << "node = " << l.node << "\n";
      if (l.model == LoadModel::Impedance) {
        os << p << "model = impedance\n";
        os << p << "R = " << q(l.R, Unit::Ohm) << "\n" << p << "L = " << q(l.L, Unit::Henry) << "\n";
      } else {
        os << p << "model = power\n";
        os << p << "P = " << q(l.P, Unit::Watt) << "\n" << p << "Q = " << q(l.Q, Unit::Var) << "\n";
        os << p << "tau = " << q(l.tau, Unit::Second) << "\n";
      }
    }
  }
  if (s.grid) {
    const auto& g = *s.grid;
    os << "\n[grid]\nnode = " << g.node << "\nV = " << q(g.V, Unit::Volt) << "\nf = " << q(g.f, Unit::Hertz)
       << "\nr = " << q(g.r, Unit::Ohm) << "\nL = " << q(g.L, Unit::Henry) << "\nangle = " << q(g.angle, Unit::Radian)
       << "\n";
  }
  if (s.has_pei()) {
    os << "\n[pei]\n";
    for (const auto& b : s.ibrs) {
      if (!b.pei) continue;
      const auto& p = *b.pei;
      const std::string n = b.name + ".";
      os << n << "alpha = " << q(p.cfg.alpha, Unit::None) << "\n";
      os << n << "beta = " << q(p.cfg.beta, Unit::None) << "\n";
      os << n << "kappa = " << q(p.cfg.kappa, Unit::None) << "\n";
      os << n << "gamma = " << q(p.cfg.gamma_design, Unit::None) << "\n";
      os << n << "sigma = " << q(p.cfg.sigma, Unit::None) << "\n";
      os << n << "enabled = " << (p.enabled ? "true" : "false") << "\n";
      os << n << "mode = " << (p.mode == ReferenceMode::Frozen ? "frozen" : "tracker") << "\n";
      os << n << "cutoff = " << q(p.tracker_cutoff, Unit::RadPerSecond) << "\n";
      os << n << "stale_threshold = " << q(p.stale_threshold, Unit::None) << "\n";
      os << n << "angle_source = " << (p.angle == PeiAngleSource::InverterFrame ? "inverter" : "pll") << "\n";
      os << n << "pll_kp = " << q(p.pll_kp, Unit::None) << "\n";
      os << n << "pll_ki = " << q(p.pll_ki, Unit::None) << "\n";
    }
  }
  if (!s.events.empty()) {
    os << "\n[events]\n";
    for (const auto& e : s.events) {
      os << q(e.t, Unit::Second) << " " << to_string(e.kind);
      switch (e.kind) {
        case EventKind::LoadStep: {
          const int k = s.find_load(e.target);
          const bool imp = k < 0 || s.loads[k].model == LoadModel::Impedance;
          os << " " << e.target << " " << q(e.value, imp ? Unit::Ohm : Unit::Watt);
          if (!imp && std::isfinite(e.value2)) os << " " << q(e.value2, Unit::Var);
          break;
        }
        case EventKind::GridFrequencyStep: os << " " << q(e.value, Unit::Hertz); break;
        default: os << " " << e.target; break;
      }
      os << "\n";
    }
  }
  os << "\n[sim]\nt_end = " << q(s.sim.t_end, Unit::Second) << "\ndt = " << q(s.sim.dt, Unit::Second)
     << "\nsample = " << q(s.sim.sample_interval, Unit::Second) << "\nblowup = " << q(s.sim.blowup_factor, Unit::None)
     << "\n";
  return os.str();
}

}  // namespace gridpass
