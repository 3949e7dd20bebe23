#include "gridpass/ibr.hpp"

#include <cmath>
#include <sstream>

#include "gridpass/errors.hpp"

namespace gridpass {

void StateSpaceModel::validate() const {
  if (A.rows() != A.cols()) fail(ErrorKind::InvalidArgument, "state matrix must be square");
  if (B.rows() != A.rows() || C.cols() != A.rows())
    fail(ErrorKind::InvalidArgument, "B/C dimensions do not match A");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite())
    fail(ErrorKind::NumericFault, "state-space matrices contain non-finite entries");
}

Eigen::VectorXcd StateSpaceModel::eigenvalues() const {
  if (A.rows() == 0) return {};
  return Eigen::EigenSolver<Mat>(A, false).eigenvalues();
}

double StateSpaceModel::max_real_eigenvalue() const {
  auto ev = eigenvalues();
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) m = std::max(m, ev[i].real());
  return m;
}

GfmParameters GfmParameters::benchmark() { return GfmParameters{}; }

void GfmParameters::validate() const {
  if (!(r_f > 0 && L_f > 0 && C_f > 0 && omega_c > 0))
    fail(ErrorKind::InvalidArgument, "GFM filter constants r_f, L_f, C_f and omega_c must be positive");
  if (!(omega_0 > 0)) fail(ErrorKind::InvalidArgument, "omega_0 must be positive");
}

GflParameters GflParameters::benchmark() { return GflParameters{}; }

void GflParameters::validate() const {
  if (!(r_f > 0 && L_f > 0 && C_f > 0))
    fail(ErrorKind::InvalidArgument, "GFL filter constants r_f, L_f and C_f must be positive");
  if (!(K_ip > 0)) fail(ErrorKind::InvalidArgument, "PLL integral gain K_ip must be positive");
  if (!(omega_0 > 0)) fail(ErrorKind::InvalidArgument, "omega_0 must be positive");
}

const std::array<const char*, GfmState::kSize>& GfmState::names() {
  static const std::array<const char*, kSize> n = {"delta", "P", "Q", "phi_d", "phi_q", "gam_d",
                                                   "gam_q", "i_ld", "i_lq", "v_od", "v_oq"};
  return n;
}

std::array<double, GfmState::kSize> GfmState::to_array() const {
  return {delta, P, Q, phi_d, phi_q, gam_d, gam_q, i_ld, i_lq, v_od, v_oq};
}

GfmState GfmState::from_array(const double* x) {
  return {x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8], x[9], x[10]};
}

const std::array<const char*, GflState::kSize>& GflState::names() {
  static const std::array<const char*, kSize> n = {"eta", "theta", "gam_d", "gam_q",
                                                   "i_ld", "i_lq", "v_od", "v_oq"};
  return n;
}

std::array<double, GflState::kSize> GflState::to_array() const {
  return {eta, theta, gam_d, gam_q, i_ld, i_lq, v_od, v_oq};
}

GflState GflState::from_array(const double* x) {
  return {x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]};
}

Vec2 measure_power(const Vec2& v, const Vec2& i) {
  return {-1.5 * (v[0] * i[0] + v[1] * i[1]), -1.5 * (v[1] * i[0] - v[0] * i[1])};
}

namespace {

void check_finite(const double* dx, int n, const char* who) {
  for (int k = 0; k < n; ++k) {
    if (!std::isfinite(dx[k])) {
      std::ostringstream os;
      os << who << ": non-finite derivative in component " << k;
      fail(ErrorKind::NumericFault, os.str());
    }
  }
}

// Inner current loop and filter shared by both inverter types.
// x points at [gam_d, gam_q, i_ld, i_lq, v_od, v_oq].
inline void current_loop_and_filter(const double* x, double iref_d, double iref_q,
                                    const Vec2& io, double r_f, double L_f, double C_f,
                                    double K_pc, double K_ic, double w0, double* dx) {
  const double gd = x[0], gq = x[1], ild = x[2], ilq = x[3], vod = x[4], voq = x[5];
  const double vid = K_pc * (iref_d - ild) - w0 * L_f * ilq + K_ic * gd;
  const double viq = K_pc * (iref_q - ilq) + w0 * L_f * ild + K_ic * gq;
  dx[0] = iref_d - ild;
  dx[1] = iref_q - ilq;
  dx[2] = (-r_f * ild + w0 * L_f * ilq + vid - vod) / L_f;
  dx[3] = (-r_f * ilq - w0 * L_f * ild + viq - voq) / L_f;
  dx[4] = w0 * voq + (ild + io[0]) / C_f;
  dx[5] = -w0 * vod + (ilq + io[1]) / C_f;
}

}  // namespace

double gfm_frequency(const GfmState& x, const GfmParameters& p) { return p.omega_s - p.droop_mp * x.P; }

void gfm_rhs(const double* x, const Vec2& io, const GfmParameters& p, double* dx) {
  const double P = x[1], Q = x[2], phd = x[3], phq = x[4];
  const double vod = x[9], voq = x[10];
  const Vec2 pq = measure_power({vod, voq}, io);
  const double wn = p.omega_s - p.droop_mp * P;
  const double vref_d = p.V0 - p.droop_nq * Q;
  const double w0 = p.omega_0;

  dx[0] = wn - w0;
  dx[1] = p.omega_c * (pq[0] - P);
  dx[2] = p.omega_c * (pq[1] - Q);
  dx[3] = vref_d - vod;
  dx[4] = -voq;
  const double iref_d = p.K_pv * (vref_d - vod) - p.F_ff * io[0] - w0 * p.C_f * voq + p.K_iv * phd;
  const double iref_q = p.K_pv * (-voq) - p.F_ff * io[1] + w0 * p.C_f * vod + p.K_iv * phq;
  current_loop_and_filter(x + 5, iref_d, iref_q, io, p.r_f, p.L_f, p.C_f, p.K_pc, p.K_ic, w0, dx + 5);
}

GfmState gfm_derivatives(const GfmState& x, const Vec2& i_odq, const GfmParameters& p) {
  auto a = x.to_array();
  std::array<double, GfmState::kSize> d{};
  gfm_rhs(a.data(), i_odq, p, d.data());
  check_finite(d.data(), GfmState::kSize, "gfm_derivatives");
  return GfmState::from_array(d.data());
}

Vec2 gfl_current_setpoint(double v_od, const GflParameters& p) {
  if (!(std::abs(v_od) >= p.v_floor())) {
    std::ostringstream os;
    os << "GFL current set point: |v_od| = " << std::abs(v_od) << " V is below the floor "
       << p.v_floor() << " V";
    fail(ErrorKind::SetpointSingularity, os.str());
  }
  return {-(2.0 / 3.0) * p.P_star / v_od, (2.0 / 3.0) * p.Q_star / v_od};
}

double gfl_frequency(const GflState& x, const GflParameters& p) {
  return x.eta + p.K_pp * x.v_oq + p.omega_0;
}

void gfl_rhs(const double* x, const Vec2& io, const GflParameters& p, double* dx) {
  const double eta = x[0], vod = x[6], voq = x[7];
  // The set point is a terminal current; the inductor carries the opposite
  // sign when the filter capacitor current is neglected.
  const Vec2 iset = gfl_current_setpoint(vod, p);
  dx[0] = p.K_ip * voq;
  dx[1] = eta + p.K_pp * voq;
  current_loop_and_filter(x + 2, -iset[0], -iset[1], io, p.r_f, p.L_f, p.C_f, p.K_pc, p.K_ic,
                          p.omega_0, dx + 2);
}

GflState gfl_derivatives(const GflState& x, const Vec2& i_odq, const GflParameters& p) {
  auto a = x.to_array();
  std::array<double, GflState::kSize> d{};
  gfl_rhs(a.data(), i_odq, p, d.data());
  d[1] += p.omega_0;
  check_finite(d.data(), GflState::kSize, "gfl_derivatives");
  return GflState::from_array(d.data());
}

namespace {

const std::vector<std::string> kGfmFastLabels = {"phi_d", "phi_q", "gam_d", "gam_q",
                                                 "i_ld",  "i_lq",  "v_od",  "v_oq"};
const std::vector<std::string> kGflFastLabels = {"gam_d", "gam_q", "i_ld", "i_lq", "v_od", "v_oq"};

// Rows of the current loop + filter for the block [gam, i_l, v_o], given the
// Jacobians of the current reference with respect to the block states (dref_x)
// and to the input (dref_u). cols: offset of gam_d inside the state vector.
void fill_current_loop(Mat& A, Mat& B, int row0, int col_gam, const Mat& dref_x, const Mat& dref_u,
                       double r_f, double L_f, double C_f, double K_pc, double K_ic, double w0) {
  const int g = col_gam, il = col_gam + 2, vo = col_gam + 4;
  const int n = static_cast<int>(A.cols());
  // v_i rows
  Mat dvi_x = K_pc * dref_x;
  Mat dvi_u = K_pc * dref_u;
  dvi_x(0, il) -= K_pc;
  dvi_x(0, il + 1) -= w0 * L_f;
  dvi_x(0, g) += K_ic;
  dvi_x(1, il + 1) -= K_pc;
  dvi_x(1, il) += w0 * L_f;
  dvi_x(1, g + 1) += K_ic;

  for (int k = 0; k < 2; ++k) {
    A.row(row0 + k) = dref_x.row(k);
    A(row0 + k, il + k) -= 1.0;
    B.row(row0 + k) = dref_u.row(k);
  }
  Mat fil = Mat::Zero(2, n);
  fil(0, il) = -r_f;
  fil(0, il + 1) = w0 * L_f;
  fil(0, vo) = -1.0;
  fil(1, il + 1) = -r_f;
  fil(1, il) = -w0 * L_f;
  fil(1, vo + 1) = -1.0;
  A.block(row0 + 2, 0, 2, n) = (fil + dvi_x) / L_f;
  B.block(row0 + 2, 0, 2, 2) = dvi_u / L_f;
  A(row0 + 4, vo + 1) = w0;
  A(row0 + 4, il) = 1.0 / C_f;
  A(row0 + 5, vo) = -w0;
  A(row0 + 5, il + 1) = 1.0 / C_f;
  B(row0 + 4, 0) = 1.0 / C_f;
  B(row0 + 5, 1) = 1.0 / C_f;
}

}  // namespace

StateSpaceModel linearize_fast_subsystem(const GfmParameters& p, const GfmState&) {
  p.validate();
  const int n = GfmState::kFastSize;
  const double w0 = p.omega_0;
  StateSpaceModel m;
  m.A = Mat::Zero(n, n);
  m.B = Mat::Zero(n, 2);
  m.C = Mat::Zero(2, n);
  m.labels = kGfmFastLabels;
  // fast order: phi_d phi_q gam_d gam_q i_ld i_lq v_od v_oq
  m.A(0, 6) = -1.0;
  m.A(1, 7) = -1.0;
  Mat dref_x = Mat::Zero(2, n), dref_u = Mat::Zero(2, 2);
  dref_x(0, 0) = p.K_iv;
  dref_x(0, 6) = -p.K_pv;
  dref_x(0, 7) = -w0 * p.C_f;
  dref_x(1, 1) = p.K_iv;
  dref_x(1, 7) = -p.K_pv;
  dref_x(1, 6) = w0 * p.C_f;
  dref_u(0, 0) = -p.F_ff;
  dref_u(1, 1) = -p.F_ff;
  fill_current_loop(m.A, m.B, 2, 2, dref_x, dref_u, p.r_f, p.L_f, p.C_f, p.K_pc, p.K_ic, w0);
  m.C(0, 6) = 1.0;
  m.C(1, 7) = 1.0;
  return m;
}

StateSpaceModel linearize_fast_subsystem(const GflParameters& p, const GflState& op) {
  p.validate();
  const int n = GflState::kFastSize;
  if (!(std::abs(op.v_od) >= p.v_floor()))
    fail(ErrorKind::SetpointSingularity, "GFL linearization: operating-point v_od below the floor");
  StateSpaceModel m;
  m.A = Mat::Zero(n, n);
  m.B = Mat::Zero(n, 2);
  m.C = Mat::Zero(2, n);
  m.labels = kGflFastLabels;
  // inductor reference = -(terminal set point); only v_od enters it
  const double v2 = op.v_od * op.v_od;
  Mat dref_x = Mat::Zero(2, n), dref_u = Mat::Zero(2, 2);
  dref_x(0, 4) = -(2.0 / 3.0) * p.P_star / v2;
  dref_x(1, 4) = (2.0 / 3.0) * p.Q_star / v2;
  fill_current_loop(m.A, m.B, 0, 0, dref_x, dref_u, p.r_f, p.L_f, p.C_f, p.K_pc, p.K_ic, p.omega_0);
  m.C(0, 4) = 1.0;
  m.C(1, 5) = 1.0;
  return m;
}

namespace {

template <class Params, class State, class Rhs>
StateSpaceModel fd_fast(const Params& p, const State& op, const Vec2& io, double rel, Rhs rhs,
                        const std::vector<std::string>& labels) {
  constexpr int N = State::kSize, off = State::kFastOffset, n = State::kFastSize;
  auto base = op.to_array();
  StateSpaceModel m;
  m.A = Mat::Zero(n, n);
  m.B = Mat::Zero(n, 2);
  m.C = Mat::Zero(2, n);
  m.labels = labels;
  std::array<double, N> xp{}, xm{}, dp{}, dm{};
  for (int j = 0; j < n; ++j) {
    const double h = rel * std::max(1.0, std::abs(base[off + j]));
    xp = base;
    xm = base;
    xp[off + j] += h;
    xm[off + j] -= h;
    rhs(xp.data(), io, p, dp.data());
    rhs(xm.data(), io, p, dm.data());
    for (int i = 0; i < n; ++i) m.A(i, j) = (dp[off + i] - dm[off + i]) / (2 * h);
  }
  for (int j = 0; j < 2; ++j) {
    const double h = rel * std::max(1.0, std::abs(io[j]));
    Vec2 up = io, um = io;
    up[j] += h;
    um[j] -= h;
    rhs(base.data(), up, p, dp.data());
    rhs(base.data(), um, p, dm.data());
    for (int i = 0; i < n; ++i) m.B(i, j) = (dp[off + i] - dm[off + i]) / (2 * h);
  }
  m.C(0, n - 2) = 1.0;
  m.C(1, n - 1) = 1.0;
  return m;
}

}  // namespace

StateSpaceModel finite_difference_fast_subsystem(const GfmParameters& p, const GfmState& op,
                                                 const Vec2& io, double rel) {
  return fd_fast(p, op, io, rel, gfm_rhs, kGfmFastLabels);
}

StateSpaceModel finite_difference_fast_subsystem(const GflParameters& p, const GflState& op,
                                                 const Vec2& io, double rel) {
  return fd_fast(p, op, io, rel, gfl_rhs, kGflFastLabels);
}

GfmState gfm_steady_state(const GfmParameters& p, const Vec2& v, const Vec2& io) {
  const double w0 = p.omega_0;
  GfmState s;
  const Vec2 pq = measure_power(v, io);
  s.P = pq[0];
  s.Q = pq[1];
  s.v_od = v[0];
  s.v_oq = v[1];
  s.i_ld = -io[0] - w0 * p.C_f * v[1];
  s.i_lq = -io[1] + w0 * p.C_f * v[0];
  const double vref_d = p.V0 - p.droop_nq * s.Q;
  s.phi_d = (s.i_ld - p.K_pv * (vref_d - v[0]) + p.F_ff * io[0] + w0 * p.C_f * v[1]) / p.K_iv;
  s.phi_q = (s.i_lq + p.K_pv * v[1] + p.F_ff * io[1] - w0 * p.C_f * v[0]) / p.K_iv;
  s.gam_d = (p.r_f * s.i_ld + v[0]) / p.K_ic;
  s.gam_q = (p.r_f * s.i_lq + v[1]) / p.K_ic;
  return s;
}

GflState gfl_steady_state(const GflParameters& p, double v_od) {
  const Vec2 iset = gfl_current_setpoint(v_od, p);
  GflState s;
  s.v_od = v_od;
  s.i_ld = -iset[0];
  s.i_lq = -iset[1];
  s.gam_d = (p.r_f * s.i_ld + v_od) / p.K_ic;
  s.gam_q = (p.r_f * s.i_lq) / p.K_ic;
  return s;
}

}  // namespace gridpass
