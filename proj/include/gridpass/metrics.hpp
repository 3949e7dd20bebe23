#pragma once

#include <string>
#include <vector>

#include "gridpass/simulator.hpp"

namespace gridpass {

struct EnergyReport {
  double t0 = 0.0, t1 = 0.0;
  std::vector<std::string> ibr;
  std::vector<double> E;    // inverter output energy, J
  std::vector<double> E_c;  // consumed by the shunt source
  std::vector<double> E_v;  // consumed by the series source
  std::vector<double> ratio;  // |(E_c + E_v) / E|
};

// Trapezoid rule over the samples inside [t0, t1].
double integrate_window(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1);
EnergyReport energy_report(const Trajectory& traj, double t0, double t1);

struct SharingOptions {
  double tail = 0.2;            // s, averaging window at the end of each run
  double max_relative_std = 0.01;
};
// Percent deviation of each inverter's steady real power from a reference run.
std::vector<double> power_sharing_error(const Trajectory& run, const Trajectory& reference,
                                        const SharingOptions& opts = {});
double tail_mean(const Trajectory& traj, const std::string& channel, double tail, double max_relative_std);

struct GrowthOptions {
  int consecutive = 5;
  double ratio = 1.02;
  double hysteresis = 1e-3;  // relative to the signal range, for extremum picking
};
struct GrowthResult {
  bool growing = false;
  double detected_at = 0.0;        // time of the swing that completed the run
  std::vector<double> swing_time;  // half-cycle peak-to-peak amplitudes
  std::vector<double> swing;
};
GrowthResult detect_growth(const std::vector<double>& t, const std::vector<double>& y, double t_start,
                           const GrowthOptions& opts = {});
// Any inverter's d-axis terminal current growing after t_start; a recorded
// divergence counts as growth.
GrowthResult detect_growth(const Trajectory& traj, double t_start, const GrowthOptions& opts = {});

struct SettlingResult {
  bool settled = false;
  double time = 0.0;  // after t_event
  double worst = 0.0; // largest relative band excursion in the final window
};
// Terminal currents of every inverter stay within `band` of their final value.
SettlingResult settling_time(const Trajectory& traj, double t_event, double band = 0.02, double tail = 0.1);

// Peak |i_abc| in a window.
double peak_phase_current(const Trajectory& traj, const std::string& ibr, double t0, double t1);

}  // namespace gridpass
