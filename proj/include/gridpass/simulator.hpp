#pragma once

#include <limits>
#include <string>
#include <vector>

#include "gridpass/microgrid.hpp"
#include "gridpass/scenario.hpp"

namespace gridpass {

// Sampled channels of one run, stored column-wise.
struct Trajectory {
  std::vector<double> t;
  std::vector<std::string> names;
  std::vector<std::vector<double>> data;
  std::vector<std::string> ibr_names;
  bool diverged = false;
  double divergence_time = std::numeric_limits<double>::quiet_NaN();
  std::string divergence_reason;
  std::vector<std::string> warnings;

  int add_channel(const std::string& name);
  bool has(const std::string& name) const;
  int index(const std::string& name) const;  // throws InvalidArgument when unknown
  const std::vector<double>& operator[](const std::string& name) const;
  size_t samples() const { return t.size(); }
};

struct SimulationResult {
  Trajectory trajectory;
  OperatingPoint initial;  // pre-event equilibrium
  Vec final_state;
  NetworkConfig final_config;
};

// Fixed-step RK4 run from the pre-event equilibrium. Divergence is recorded in
// the trajectory rather than raised.
SimulationResult run_simulation(const Scenario& scenario);
Trajectory simulate(const Scenario& scenario);

// Integrate an explicit state from t0 to t1 without events (used by the order check).
Vec integrate_fixed(const MicrogridModel& model, const NetworkConfig& cfg, Vec x, double t0, double t1, double dt);

// Reduced model with only droop angle and power-filter states; the network is
// treated as algebraic phasors at the nominal frequency and the inverter
// terminal voltage follows its droop reference.
Trajectory simulate_droop_only(const Scenario& scenario);

}  // namespace gridpass
