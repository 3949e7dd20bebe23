#pragma once

#include <array>

#include "gridpass/passivity.hpp"
#include "gridpass/state_space.hpp"

namespace gridpass {

using Abc = std::array<double, 3>;
using Dq0 = std::array<double, 3>;

// Sine-aligned Park transform with the 2/3 amplitude-invariant scaling.
Dq0 park(const Abc& abc, double theta);
Abc inv_park(const Dq0& dq0, double theta);

// Local d-q to common D-Q rotation and its inverse (transpose).
Mat2 rotation(double delta);
Vec2 dq_to_common(const Vec2& v_dq, double delta);
Vec2 common_to_dq(const Vec2& v_DQ, double delta);

double wrap_angle(double theta);

struct FrameAngle {
  double theta = 0.0;  // Park angle, wrapped to [0, 2pi)
  double delta = 0.0;  // offset from the nominal rotating frame
};

FrameAngle frame_angle(double omega_0, double t, double delta);

struct PeiReferences {
  Vec2 v_hat{0.0, 0.0};
  Vec2 i_hat{0.0, 0.0};
};

struct PeiCommand {
  Vec2 dv_cmd{0.0, 0.0};  // series-source voltage
  Vec2 di_cmd{0.0, 0.0};  // shunt-source current
};

PeiCommand pei_step(const Vec2& v_meas, const Vec2& i_meas, const PeiReferences& refs, const PeiConfig& cfg);

// Network-side terminal quantities of the composite for a given command.
struct CompositeTerminal {
  Vec2 v_net;  // v - dv_cmd
  Vec2 i_net;  // i - di_cmd
};
CompositeTerminal composite_terminal(const Vec2& v_meas, const Vec2& i_meas, const PeiCommand& cmd);

// First-order reference tracker, d ref / dt.
PeiReferences tracker_derivative(const PeiReferences& ref, const Vec2& v_meas, const Vec2& i_meas, double cutoff);

struct OperatingPoint;
PeiReferences capture_references(const OperatingPoint& op, int ibr_index);

}  // namespace gridpass
