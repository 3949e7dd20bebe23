#pragma once

#include <limits>
#include <string>
#include <vector>

#include "gridpass/metrics.hpp"
#include "gridpass/network.hpp"
#include "gridpass/passivity.hpp"
#include "gridpass/scenario.hpp"

namespace gridpass {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct DeviceVerdict {
  std::string ibr;
  double gamma = kNaN;
  double omega_peak = kNaN;
  std::string gamma_error;  // set when the gain could not be computed
  bool has_pei = false;
  PeiConfig pei;
  bool pei_valid = false;
  double sigma = kNaN;
  std::vector<std::string> violated;
};

struct RunMetrics {
  double t_event = 0.0;
  bool diverged = false;
  double divergence_time = kNaN;
  bool growth = false;
  double growth_time = kNaN;
  bool settled = false;
  double settling_time = kNaN;
  std::vector<EnergyReport> energy;
  std::vector<double> sharing_error;  // percent, empty when not applicable
  std::string sharing_note;
  std::vector<std::string> warnings;
};

struct RunReport {
  std::string scenario_id;
  bool has_verdicts = false;  // set by certify
  std::vector<DeviceVerdict> devices;
  bool network_applicable = false;
  NetworkPassivityCertificate network;
  std::string network_note;
  double max_real_pre = kNaN;   // pre-event closed loop
  double max_real_post = kNaN;  // after all events, interfaces as scripted
  std::string eigen_note;
  bool certified = false;
  std::vector<std::string> findings;  // why certification failed
  bool has_metrics = false;
  RunMetrics metrics;
  std::vector<std::string> artifacts;
};

// Device gains, interface checks, network index and closed-loop eigenvalues.
RunReport certify(const Scenario& scenario);

struct AnalyzeOptions {
  bool sharing = true;  // compare steady powers with the droop-only reduction
};
// Adds trajectory metrics to a report.
void analyze_run(RunReport& report, const Scenario& scenario, const Trajectory& traj, const AnalyzeOptions& opts = {});

std::string report_text(const RunReport& report);
std::string report_json(const RunReport& report);

}  // namespace gridpass
