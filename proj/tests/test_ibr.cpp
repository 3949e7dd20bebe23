#include <doctest.h>

#include <cmath>

#include "gridpass/errors.hpp"
#include "gridpass/ibr.hpp"
#include "gridpass/passivity.hpp"

using namespace gridpass;

namespace {

double rel_diff(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

GfmState loaded_gfm(const GfmParameters& p) {
  // a resistive load drawing roughly 5.8 kW at nominal voltage
  const double v = p.V0;
  return gfm_steady_state(p, {v, 0.0}, {-v / 25.0, 0.0});
}

}  // namespace

TEST_CASE("instantaneous power follows the into-inverter current convention") {
  CHECK(measure_power({100, 0}, {0, 0}) == Vec2(0, 0));
  const Vec2 pq = measure_power({100, 0}, {-10, 0});
  CHECK(pq[0] == doctest::Approx(1500));
  CHECK(pq[1] == doctest::Approx(0));
  CHECK(measure_power({0, 100}, {-10, 0})[1] == doctest::Approx(1500));
}

TEST_CASE("grid-forming steady state has zero derivative apart from the droop angle") {
  const GfmParameters p = GfmParameters::benchmark();
  const GfmState x = loaded_gfm(p);
  const Vec2 io(-p.V0 / 25.0, 0.0);
  const GfmState d = gfm_derivatives(x, io, p);
  const auto a = d.to_array();
  for (int k = 1; k < GfmState::kSize; ++k) CHECK(std::abs(a[k]) < 1e-6 * (1 + std::abs(x.to_array()[k])));
  // frequency below nominal by the droop on the delivered power
  CHECK(d.delta == doctest::Approx(-p.droop_mp * x.P).epsilon(1e-9));
  CHECK(x.P == doctest::Approx(1.5 * p.V0 * p.V0 / 25.0).epsilon(1e-9));
}

TEST_CASE("grid-following steady state has zero derivative and tracks the power set point") {
  const GflParameters p = GflParameters::benchmark();
  const GflState x = gfl_steady_state(p, p.V_nominal);
  const Vec2 io(-x.i_ld, -x.i_lq + p.omega_0 * p.C_f * x.v_od);  // capacitor current balance
  const GflState d = gfl_derivatives(x, io, p);
  CHECK(d.eta == doctest::Approx(0).scale(1));
  CHECK(d.theta == doctest::Approx(p.omega_0));
  const auto a = d.to_array();
  for (int k = 2; k < GflState::kSize; ++k) CHECK(std::abs(a[k]) < 1e-6);
  const Vec2 pq = measure_power({x.v_od, x.v_oq}, io);
  CHECK(pq[0] == doctest::Approx(p.P_star).epsilon(1e-6));
}

TEST_CASE("the current set point guards the voltage floor") {
  const GflParameters p = GflParameters::benchmark();
  CHECK_THROWS_AS(gfl_current_setpoint(0.01 * p.V_nominal, p), Error);
  const Vec2 i = gfl_current_setpoint(p.V_nominal, p);
  CHECK(i[0] == doctest::Approx(-2.0 / 3.0 * p.P_star / p.V_nominal));
}

TEST_CASE("fast-subsystem Jacobians agree with central differences") {
  SUBCASE("grid-forming") {
    for (double kiv : {390.0, 78.0}) {
      GfmParameters p = GfmParameters::benchmark();
      p.K_iv = kiv;
      const GfmState x = loaded_gfm(p);
      const auto lin = linearize_fast_subsystem(p, x);
      const auto fd = finite_difference_fast_subsystem(p, x, {-p.V0 / 25.0, 0.0});
      CHECK(lin.A.rows() == 8);
      CHECK(lin.B.cols() == 2);
      CHECK(lin.C.rows() == 2);
      CHECK(rel_diff(lin.A, fd.A) < 1e-6);
      CHECK(rel_diff(lin.B, fd.B) < 1e-6);
      CHECK(rel_diff(lin.C, fd.C) < 1e-12);
    }
  }
  SUBCASE("grid-following") {
    const GflParameters p = GflParameters::benchmark();
    const GflState x = gfl_steady_state(p, p.V_nominal);
    const auto lin = linearize_fast_subsystem(p, x);
    const Vec2 io(-x.i_ld, -x.i_lq + p.omega_0 * p.C_f * x.v_od);
    const auto fd = finite_difference_fast_subsystem(p, x, io);
    CHECK(lin.A.rows() == 6);
    CHECK(rel_diff(lin.A, fd.A) < 1e-6);
    CHECK(rel_diff(lin.B, fd.B) < 1e-6);
  }
}

TEST_CASE("device L2 gains of the shipped inverters") {
  GfmParameters p1 = GfmParameters::benchmark();
  const double g1 = l2_gain(linearize_fast_subsystem(p1, loaded_gfm(p1))).gamma;
  CHECK(g1 == doctest::Approx(4.43).epsilon(0.01));
  GfmParameters p2 = p1;
  p2.K_iv = 78.0;
  const double g2 = l2_gain(linearize_fast_subsystem(p2, loaded_gfm(p2))).gamma;
  CHECK(g2 == doctest::Approx(2.9).epsilon(0.02));
  // The grid-following current-loop gains are not published; the shipped ones give 131.77.
  const GflParameters q = GflParameters::benchmark();
  const double g3 = l2_gain(linearize_fast_subsystem(q, gfl_steady_state(q, 310.27))).gamma;
  CHECK(g3 == doctest::Approx(131.77).epsilon(0.002));
}

TEST_CASE("parameter validation rejects non-physical values") {
  GfmParameters p = GfmParameters::benchmark();
  p.C_f = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  GflParameters q = GflParameters::benchmark();
  q.L_f = -1;
  CHECK_THROWS_AS(q.validate(), Error);
}
