#include "gridpass/pei.hpp"

#include <cmath>

#include "gridpass/errors.hpp"
#include "gridpass/ibr.hpp"
#include "gridpass/microgrid.hpp"

namespace gridpass {

namespace {
constexpr double kThird = 2.0 * kPi / 3.0;
}

Dq0 park(const Abc& x, double th) {
  const double sa = std::sin(th), sb = std::sin(th - kThird), sc = std::sin(th + kThird);
  const double ca = std::cos(th), cb = std::cos(th - kThird), cc = std::cos(th + kThird);
  return {(2.0 / 3.0) * (sa * x[0] + sb * x[1] + sc * x[2]), (2.0 / 3.0) * (ca * x[0] + cb * x[1] + cc * x[2]),
          (1.0 / 3.0) * (x[0] + x[1] + x[2])};
}

Abc inv_park(const Dq0& y, double th) {
  return {std::sin(th) * y[0] + std::cos(th) * y[1] + y[2],
          std::sin(th - kThird) * y[0] + std::cos(th - kThird) * y[1] + y[2],
          std::sin(th + kThird) * y[0] + std::cos(th + kThird) * y[1] + y[2]};
}

Mat2 rotation(double delta) {
  const double c = std::cos(delta), s = std::sin(delta);
  Mat2 T;
  T << c, -s, s, c;
  return T;
}

Vec2 dq_to_common(const Vec2& v, double delta) {
  const double c = std::cos(delta), s = std::sin(delta);
  return {c * v[0] - s * v[1], s * v[0] + c * v[1]};
}

Vec2 common_to_dq(const Vec2& v, double delta) {
  const double c = std::cos(delta), s = std::sin(delta);
  return {c * v[0] + s * v[1], -s * v[0] + c * v[1]};
}

double wrap_angle(double th) {
  double w = std::fmod(th, 2.0 * kPi);
  if (w < 0) w += 2.0 * kPi;
  return w;
}

FrameAngle frame_angle(double omega_0, double t, double delta) {
  return {wrap_angle(omega_0 * t + delta), delta};
}

PeiCommand pei_step(const Vec2& v, const Vec2& i, const PeiReferences& refs, const PeiConfig& cfg) {
  const Vec2 dv = v - refs.v_hat;
  const Vec2 di = i - refs.i_hat;
  PeiCommand c;
  c.dv_cmd = (1.0 - cfg.kappa) * dv - cfg.beta * di;
  c.di_cmd = -cfg.alpha * dv;
  return c;
}

CompositeTerminal composite_terminal(const Vec2& v, const Vec2& i, const PeiCommand& c) {
  return {v - c.dv_cmd, i - c.di_cmd};
}

PeiReferences tracker_derivative(const PeiReferences& ref, const Vec2& v, const Vec2& i, double cutoff) {
  return {cutoff * (v - ref.v_hat), cutoff * (i - ref.i_hat)};
}

PeiReferences capture_references(const OperatingPoint& op, int n) {
  if (n < 0 || n >= static_cast<int>(op.terminals.size()))
    fail(ErrorKind::InvalidArgument, "capture_references: inverter index out of range");
  if (!(op.residual < 1e-6))
    fail(ErrorKind::NoConvergence, "capture_references: operating point is not verified");
  return {op.terminals[n].v_odq, op.terminals[n].i_odq};
}

}  // namespace gridpass
