#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "gridpass/builtin_scenarios.hpp"
#include "gridpass/errors.hpp"
#include "gridpass/metrics.hpp"
#include "gridpass/simulator.hpp"
#include "gridpass/trajectory_io.hpp"

using namespace gridpass;

namespace {

Scenario quiet(const std::string& id, double t_end) {
  Scenario s = builtin_scenario(id);
  s.events.clear();
  s.sim.t_end = t_end;
  return s;
}

double max_drift(const std::vector<double>& y) {
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  return *hi - *lo;
}

}  // namespace

TEST_CASE("a run started at equilibrium stays there") {
  const Trajectory tr = simulate(quiet("microgrid1", 1.0));
  CHECK_FALSE(tr.diverged);
  for (const char* ch : {"ibr1.P", "ibr1.Q", "ibr1.i_ld", "ibr1.i_lq", "ibr1.v_od", "ibr1.v_oq", "ibr1.i_od"})
    CHECK(max_drift(tr[ch]) < 1e-6 * std::max(1.0, std::abs(tr[ch].front())));
  CHECK(tr["ibr1.P"].front() == doctest::Approx(1.5 * std::pow(tr["ibr1.v_od"].front(), 2) / 25.0).epsilon(1e-6));
}

TEST_CASE("no-load inverter holds its droop voltage") {
  Scenario s = quiet("microgrid1", 0.1);
  s.loads.clear();
  const OperatingPoint op = find_operating_point(s);
  CHECK(op.terminals[0].v_odq[0] == doctest::Approx(s.ibrs[0].gfm.V0).epsilon(1e-9));
  CHECK(op.terminals[0].i_odq.norm() < 1e-9);
}

TEST_CASE("phase currents are the inverse Park transform of the dq currents") {
  const Trajectory tr = simulate(quiet("2ibr-stable", 0.05));
  for (size_t k = 0; k < tr.samples(); k += 37) {
    const Abc abc = inv_park({tr["ibr2.i_od"][k], tr["ibr2.i_oq"][k], 0.0}, tr["ibr2.theta"][k]);
    CHECK(std::abs(abc[0] - tr["ibr2.i_a"][k]) < 1e-9);
    CHECK(std::abs(abc[2] - tr["ibr2.i_c"][k]) < 1e-9);
  }
}

TEST_CASE("energy accounting") {
  Scenario s = builtin_scenario("2ibr-nopei");
  s.sim.t_end = 0.6;
  const Trajectory tr = simulate(s);
  const EnergyReport e = energy_report(tr, 0.4, 0.6);
  REQUIRE(e.ibr.size() == 2);
  for (size_t k = 0; k < 2; ++k) {
    CHECK(e.E_c[k] == 0);
    CHECK(e.E_v[k] == 0);
    CHECK(e.ratio[k] == 0);
    CHECK(e.E[k] > 0);
  }
  CHECK_THROWS_AS(energy_report(tr, 0.5, 0.4), Error);
  CHECK_THROWS_AS(energy_report(tr, 0.5, 3.0), Error);

  std::vector<double> t{0, 1, 2}, y{0, 0, 0};
  CHECK(integrate_window(t, y, 0, 2) == 0);
  y = {1, 3, 5};
  CHECK(integrate_window(t, y, 0, 2) == doctest::Approx(6));
}

TEST_CASE("growth detector") {
  std::vector<double> t, grow, decay;
  for (int k = 0; k < 20000; ++k) {
    const double tt = k * 1e-4;
    t.push_back(tt);
    grow.push_back(10 + std::exp(2 * tt) * std::sin(2 * kPi * 20 * tt));
    decay.push_back(10 + std::exp(-2 * tt) * std::sin(2 * kPi * 20 * tt));
  }
  const GrowthResult g = detect_growth(t, grow, 0.0);
  CHECK(g.growing);
  CHECK(g.detected_at < 0.5);
  CHECK_FALSE(detect_growth(t, decay, 0.0).growing);
  std::vector<double> flat(t.size(), 3.0);
  CHECK_FALSE(detect_growth(t, flat, 0.0).growing);
}

TEST_CASE("reduced droop model") {
  Scenario s = builtin_scenario("microgrid1");
  s.sim.t_end = 1.0;
  const Trajectory reduced = simulate_droop_only(s);
  const Trajectory detailed = simulate(s);
  // same droop equilibrium before the step
  const size_t pre = reduced.samples() / 4;
  CHECK(reduced["ibr1.P"][pre] == doctest::Approx(detailed["ibr1.P"][pre]).epsilon(0.01));

  // after the step P follows a first-order response with the power-filter rate
  const auto& t = reduced.t;
  const auto& P = reduced["ibr1.P"];
  const double wc = s.ibrs[0].gfm.omega_c;
  const double P0 = P[pre], Pinf = P.back();
  const double t_step = s.events[0].t;
  for (double dt : {0.01, 0.03, 0.06}) {
    const size_t k = std::lower_bound(t.begin(), t.end(), t_step + dt) - t.begin();
    const double expect = Pinf + (P0 - Pinf) * std::exp(-wc * (t[k] - t_step));
    CHECK(P[k] == doctest::Approx(expect).epsilon(0.02));
  }
}

TEST_CASE("RK4 converges at fourth order") {
  Scenario s = builtin_scenario("2ibr-nopei");
  const MicrogridModel m(s);
  NetworkConfig cfg = m.initial_config();
  const OperatingPoint op = find_operating_point(m, cfg);
  Vec x0 = op.x;
  for (const auto& e : s.events) m.apply_event(e, cfg, x0);
  const double h = 4e-5, T = 4e-3;
  const Vec a = integrate_fixed(m, cfg, x0, 0, T, h);
  const Vec b = integrate_fixed(m, cfg, x0, 0, T, h / 2);
  const Vec c = integrate_fixed(m, cfg, x0, 0, T, h / 4);
  const double ratio = (a - b).norm() / (b - c).norm();
  CHECK(ratio == doctest::Approx(16).epsilon(0.3));
}

TEST_CASE("small-signal stability of the benchmark systems") {
  const Scenario mg1 = builtin_scenario("microgrid1");
  const MicrogridModel m(mg1);
  const OperatingPoint op = find_operating_point(m, m.initial_config());
  CHECK(assemble_small_signal(m, m.initial_config(), op, SmallSignalScope::Full).max_real < 0);

  CHECK(analyze_post_event(builtin_scenario("2ibr-nopei"), false).small_signal.max_real > 0);
  CHECK(analyze_post_event(builtin_scenario("2ibr-pei"), true).small_signal.max_real < 0);
}

TEST_CASE("constant-power loads draw their rating at equilibrium") {
  const Scenario s = builtin_scenario("2ibr-cpl-pei");
  const OperatingPoint op = find_operating_point(s);
  const Vec2 pq1 = measure_power(op.terminals[0].v_odq, op.terminals[0].i_odq);
  const Vec2 pq2 = measure_power(op.terminals[1].v_odq, op.terminals[1].i_odq);
  CHECK(pq1[0] == doctest::Approx(5784).epsilon(0.01));
  CHECK(pq2[0] == doctest::Approx(7226).epsilon(0.01));
}

TEST_CASE("trajectory files round trip") {
  Scenario s = builtin_scenario("gfl-pei");
  s.sim.t_end = 0.35;
  Trajectory tr = simulate(s);
  tr.warnings.push_back("note with, comma");
  for (auto fmt : {TrajectoryFormat::Csv, TrajectoryFormat::Binary}) {
    std::stringstream ss;
    write_trajectory(ss, tr, fmt);
    const Trajectory back = read_trajectory(ss);
    CHECK(back.t == tr.t);
    CHECK(back.names == tr.names);
    CHECK(back.data == tr.data);
    CHECK(back.ibr_names == tr.ibr_names);
    CHECK(back.warnings == tr.warnings);
    CHECK(back.diverged == tr.diverged);
  }
  std::stringstream bad("not a trajectory\n1,2\n");
  CHECK_THROWS_AS(read_trajectory(bad), Error);
}

TEST_CASE("every built-in scenario has a verified equilibrium") {
  for (const auto& id : builtin_scenario_ids()) {
    CAPTURE(id);
    const OperatingPoint op = find_operating_point(builtin_scenario(id));
    CHECK(op.residual < 1e-6);
  }
}
