#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gridpass/ibr.hpp"
#include "gridpass/passivity.hpp"

namespace gridpass {

enum class IbrKind { Gfm, Gfl };
enum class ReferenceMode { Frozen, Tracker };
enum class PeiAngleSource { InverterFrame, MeasurementPll };

struct PeiSetup {
  PeiConfig cfg;
  bool enabled = true;  // active from t = 0; otherwise switched on by an event
  ReferenceMode mode = ReferenceMode::Frozen;
  double tracker_cutoff = 2.0;      // rad/s
  double stale_threshold = 0.05;    // relative reference drift that raises a warning
  PeiAngleSource angle = PeiAngleSource::InverterFrame;
  double pll_kp = 0.37;
  double pll_ki = 2.14;

  bool operator==(const PeiSetup&) const = default;
};

struct IbrSpec {
  std::string name;
  IbrKind kind = IbrKind::Gfm;
  int node = 1;
  GfmParameters gfm;
  GflParameters gfl;
  double angle = 0.0;  // initial frame offset, rad
  std::optional<PeiSetup> pei;

  bool operator==(const IbrSpec&) const = default;
};

struct LineSpec {
  std::string name;
  int from = 1;
  int to = 2;
  double r = 0.0;
  double L = 0.0;
  bool closed = true;

  bool operator==(const LineSpec&) const = default;
};

enum class LoadModel { Impedance, Power };

struct LoadSpec {
  std::string name;
  int node = 1;
  LoadModel model = LoadModel::Impedance;
  double R = 0.0;  // per phase, ohm
  double L = 0.0;  // per phase, H (0: purely resistive)
  double P = 0.0;  // W
  double Q = 0.0;  // var
  double tau = 0.01;

  bool operator==(const LoadSpec&) const = default;
};

struct GridSpec {
  int node = 1;
  double V = 0.0;  // peak phase voltage
  double f = 50.0;
  double r = 0.03;
  double L = 0.35e-3;
  double angle = 0.0;

  bool operator==(const GridSpec&) const = default;
};

enum class EventKind { CloseTie, OpenTie, LoadStep, GridFrequencyStep, PeiEnable, PeiDisable };

const char* to_string(EventKind kind);

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::CloseTie;
  std::string target;
  double value = std::numeric_limits<double>::quiet_NaN();
  double value2 = std::numeric_limits<double>::quiet_NaN();
};
// NaN-aware: absent event values compare equal.
bool operator==(const Event& a, const Event& b);


struct SimSettings {
  double t_end = 1.0;
  double dt = 5e-6;
  double sample_interval = 1e-4;
  double blowup_factor = 100.0;

  bool operator==(const SimSettings&) const = default;
};

struct Scenario {
  std::string id;
  std::string description;
  double omega_0 = 2.0 * kPi * 50.0;
  std::vector<IbrSpec> ibrs;
  std::vector<LineSpec> lines;
  std::vector<LoadSpec> loads;
  std::optional<GridSpec> grid;
  std::vector<Event> events;
  SimSettings sim;

  void validate() const;
  int node_count() const { return static_cast<int>(ibrs.size()); }
  int find_ibr(const std::string& name) const;
  int find_line(const std::string& name) const;
  int find_load(const std::string& name) const;
  bool has_pei() const;
  Scenario without_pei() const;

  bool operator==(const Scenario&) const = default;
};


}  // namespace gridpass
