#pragma once

#include <array>
#include <string>

#include "gridpass/state_space.hpp"

namespace gridpass {

inline constexpr double kPi = 3.14159265358979323846;

// Grid-forming inverter: LC(L) filter, power filter, droop, cascaded PI loops.
struct GfmParameters {
  double r_f = 0.1;
  double L_f = 1.35e-3;
  double C_f = 50e-6;
  double omega_c = 31.41;
  double droop_mp = 9.4e-5;  // rad/s per W
  double droop_nq = 1.3e-3;  // V per var
  double V0 = 380.0 * 0.816496580927726;
  double omega_s = 2.0 * kPi * 50.0;
  double K_pv = 0.05;
  double K_iv = 390.0;
  double F_ff = 0.75;
  double K_pc = 10.5;
  double K_ic = 16e3;
  double omega_0 = 2.0 * kPi * 50.0;

  // Benchmark inverter from the classic three-inverter droop microgrid study.
  static GfmParameters benchmark();
  void validate() const;

  bool operator==(const GfmParameters&) const = default;
};

// Grid-following inverter: same filter and current loop, PLL, power set points.
struct GflParameters {
  double r_f = 0.1;
  double L_f = 1.35e-3;
  double C_f = 50e-6;
  double K_pp = 0.37;
  double K_ip = 2.14;
  double K_pc = 10.5;
  double K_ic = 16e3;
  double P_star = 2500.0;
  double Q_star = 0.0;
  double omega_0 = 2.0 * kPi * 50.0;
  double V_nominal = 380.0 * 0.816496580927726;
  double v_floor_fraction = 0.05;

  static GflParameters benchmark();
  void validate() const;
  double v_floor() const { return v_floor_fraction * V_nominal; }

  bool operator==(const GflParameters&) const = default;
};

struct GfmState {
  double delta = 0, P = 0, Q = 0;
  double phi_d = 0, phi_q = 0;
  double gam_d = 0, gam_q = 0;
  double i_ld = 0, i_lq = 0;
  double v_od = 0, v_oq = 0;

  static constexpr int kSize = 11;
  static constexpr int kFastOffset = 3;
  static constexpr int kFastSize = 8;
  static const std::array<const char*, kSize>& names();
  std::array<double, kSize> to_array() const;
  static GfmState from_array(const double* x);
};

// theta is the absolute Park angle produced by the PLL.
struct GflState {
  double eta = 0, theta = 0;
  double gam_d = 0, gam_q = 0;
  double i_ld = 0, i_lq = 0;
  double v_od = 0, v_oq = 0;

  static constexpr int kSize = 8;
  static constexpr int kFastOffset = 2;
  static constexpr int kFastSize = 6;
  static const std::array<const char*, kSize>& names();
  std::array<double, kSize> to_array() const;
  static GflState from_array(const double* x);
};

// p, q delivered to the network; i_odq points into the inverter.
Vec2 measure_power(const Vec2& v_odq, const Vec2& i_odq);

GfmState gfm_derivatives(const GfmState& x, const Vec2& i_odq, const GfmParameters& p);
double gfm_frequency(const GfmState& x, const GfmParameters& p);

// Terminal-current set point for the requested power, in the same into-inverter
// direction as i_odq (so producing P* gives a negative d component).
Vec2 gfl_current_setpoint(double v_od, const GflParameters& p);
GflState gfl_derivatives(const GflState& x, const Vec2& i_odq, const GflParameters& p);
double gfl_frequency(const GflState& x, const GflParameters& p);

// Raw right-hand sides on flat arrays, used by the network simulator.
// Angle derivatives are returned relative to the nominal frame (omega_n - omega_0).
void gfm_rhs(const double* x, const Vec2& i_odq, const GfmParameters& p, double* dx);
void gfl_rhs(const double* x, const Vec2& i_odq, const GflParameters& p, double* dx);

// Fast subsystem with the slow states frozen at the operating point.
StateSpaceModel linearize_fast_subsystem(const GfmParameters& p, const GfmState& op);
StateSpaceModel linearize_fast_subsystem(const GflParameters& p, const GflState& op);

// Central-difference counterpart of the above, for consistency checks.
StateSpaceModel finite_difference_fast_subsystem(const GfmParameters& p, const GfmState& op,
                                                 const Vec2& i_odq, double rel_step = 1e-6);
StateSpaceModel finite_difference_fast_subsystem(const GflParameters& p, const GflState& op,
                                                 const Vec2& i_odq, double rel_step = 1e-6);

// Standalone steady states (terminal voltage and current given in the local frame).
GfmState gfm_steady_state(const GfmParameters& p, const Vec2& v_odq, const Vec2& i_odq);
GflState gfl_steady_state(const GflParameters& p, double v_od);

}  // namespace gridpass
