#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridpass/state_space.hpp"

namespace gridpass {

struct L2GainResult {
  double gamma = 0.0;
  double omega_peak = 0.0;
  std::string method;
  int iterations = 0;
  // Imaginary-axis Hamiltonian eigenvalues present just below gamma and
  // absent just above it.
  bool certified_below = false;
  bool certified_above = false;
};

// Largest singular value of C (jw I - A)^-1 B.
double sigma_max_at(const StateSpaceModel& m, double omega);

L2GainResult l2_gain(const StateSpaceModel& model, double tol = 1e-6);

// Brute-force oracle: maximum over a log-spaced grid.
L2GainResult l2_gain_sweep(const StateSpaceModel& model, double omega_min, double omega_max, int points);

// True when the Hamiltonian built for level gamma has eigenvalues on the imaginary axis.
bool hamiltonian_has_imaginary_eigenvalues(const StateSpaceModel& model, double gamma,
                                           std::vector<double>* omegas = nullptr);

struct PeiConfig {
  double alpha = 0.0;  // shunt-current gain, A/V
  double beta = 0.0;   // series-voltage gain, V/A
  double kappa = 1.0;  // voltage feed-through
  double gamma_design = 0.0;
  double sigma = 0.0;

  bool operator==(const PeiConfig&) const = default;
};

double pei_sigma(double alpha, double beta, double kappa);

struct PeiVerdict {
  bool valid = false;
  std::optional<double> sigma;
  std::vector<std::string> violated;
};

PeiVerdict verify_pei(double gamma, double alpha, double beta, double kappa);

struct PeiPolicy {
  double kappa = 1.0;
  double margin = 1e-3;
  // Fraction of the largest admissible alpha; 1 reproduces the plain policy.
  double alpha_fraction = 1.0;
  std::optional<double> sigma_target;
};

PeiConfig design_pei(double gamma, const PeiPolicy& policy = {});

// r(t) = int u.y - sigma int y.y, trapezoidal, r(0) = 0.
std::vector<double> ofp_residual(const std::vector<Vec>& u, const std::vector<Vec>& y, double sigma, double dt);

}  // namespace gridpass
