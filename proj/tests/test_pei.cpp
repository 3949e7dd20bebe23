#include <doctest.h>

#include <cmath>
#include <random>

#include "gridpass/builtin_scenarios.hpp"
#include "gridpass/microgrid.hpp"
#include "gridpass/pei.hpp"

using namespace gridpass;

TEST_CASE("Park transform") {
  const double V = 310.0;
  for (double th : {0.0, 0.3, 2.0, 5.9}) {
    const Dq0 dq = park({V * std::sin(th), V * std::sin(th - 2 * kPi / 3), V * std::sin(th + 2 * kPi / 3)}, th);
    CHECK(dq[0] == doctest::Approx(V));
    CHECK(dq[1] == doctest::Approx(0).scale(V));
    CHECK(dq[2] == doctest::Approx(0).scale(V));
    CHECK(park({1, 1, 1}, th)[2] == doctest::Approx(1));
  }
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-500, 500), a(0, 2 * kPi);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    const Abc x{u(rng), u(rng), u(rng)};
    const double th = a(rng);
    const Abc y = inv_park(park(x, th), th);
    for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(x[j] - y[j]) / 500);
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("frame rotation") {
  const Vec2 v(3, 4);
  CHECK(dq_to_common(v, 0).isApprox(v));
  const Vec2 r = dq_to_common(v, kPi / 2);
  CHECK(r[0] == doctest::Approx(-4));
  CHECK(r[1] == doctest::Approx(3));
  CHECK(common_to_dq(dq_to_common(v, 1.234), 1.234).isApprox(v));
  CHECK(rotation(0.7).transpose().isApprox(rotation(-0.7)));
  CHECK(wrap_angle(-0.1) == doctest::Approx(2 * kPi - 0.1));
  CHECK(wrap_angle(7.0) == doctest::Approx(7.0 - 2 * kPi));
}

TEST_CASE("deviation feedback law") {
  PeiConfig cfg;
  cfg.alpha = 0.00045;
  cfg.beta = 1.67;
  cfg.kappa = 0.36;
  PeiReferences ref;
  ref.v_hat = {300, 0};
  ref.i_hat = {-20, 1};

  PeiCommand c = pei_step(ref.v_hat, ref.i_hat, ref, cfg);
  CHECK(c.dv_cmd.isZero());
  CHECK(c.di_cmd.isZero());

  c = pei_step(ref.v_hat + Vec2(1, 0), ref.i_hat, ref, cfg);
  CHECK(c.dv_cmd[0] == doctest::Approx(0.64));
  CHECK(c.dv_cmd[1] == doctest::Approx(0).scale(1));
  CHECK(c.di_cmd[0] == doctest::Approx(-0.00045));
  CHECK(c.di_cmd[1] == doctest::Approx(0).scale(1));

  // composite terminal deviations: kappa dv + beta di and di + alpha dv
  const Vec2 dv(2, -1), di(0.5, 3);
  c = pei_step(ref.v_hat + dv, ref.i_hat + di, ref, cfg);
  const CompositeTerminal t = composite_terminal(ref.v_hat + dv, ref.i_hat + di, c);
  CHECK((t.v_net - ref.v_hat).isApprox(cfg.kappa * dv + cfg.beta * di));
  CHECK((t.i_net - ref.i_hat).isApprox(di + cfg.alpha * dv));
}

TEST_CASE("rotating the frame does not change the law") {
  PeiConfig cfg{0.001, 2.0, 0.5, 0, 0};
  PeiReferences ref{{300, 5}, {-10, 2}};
  const Vec2 v(302, 4), i(-9, 2.5);
  const PeiCommand c = pei_step(v, i, ref, cfg);
  const double d = 0.8;
  PeiReferences rr{dq_to_common(ref.v_hat, d), dq_to_common(ref.i_hat, d)};
  const PeiCommand cr = pei_step(dq_to_common(v, d), dq_to_common(i, d), rr, cfg);
  CHECK(cr.dv_cmd.isApprox(dq_to_common(c.dv_cmd, d)));
  CHECK(cr.di_cmd.isApprox(dq_to_common(c.di_cmd, d)));
}

TEST_CASE("reference tracker is a first-order filter") {
  const double wc = 2.0, dt = 1e-3;
  PeiReferences ref{{300, 0}, {-10, 0}};
  const Vec2 v(320, 0), i(-15, 1);
  for (double t = 0; t < 5 / wc; t += dt) {
    const PeiReferences d = tracker_derivative(ref, v, i, wc);
    ref.v_hat += dt * d.v_hat;
    ref.i_hat += dt * d.i_hat;
  }
  // within exp(-5) of the step after five time constants
  CHECK(std::abs(ref.v_hat[0] - 320) < 20 * 0.0075);
  CHECK(std::abs(ref.i_hat[0] + 15) < 5 * 0.0075);
}

TEST_CASE("captured references sit on the droop axis") {
  const Scenario s = builtin_scenario("2ibr-pei");
  const OperatingPoint op = find_operating_point(s);
  for (int n = 0; n < 2; ++n) {
    const PeiReferences r = capture_references(op, n);
    CHECK(std::abs(r.v_hat[1]) < 1e-6 * r.v_hat[0]);
    CHECK(r.v_hat[0] > 250);
    CHECK(r.i_hat[0] < 0);
  }
}
