#include <doctest.h>

#include <string>

#include "gridpass/builtin_scenarios.hpp"
#include "gridpass/errors.hpp"
#include "gridpass/scenario_file.hpp"
#include "gridpass/units.hpp"

using namespace gridpass;

namespace {

std::string parse_error(const std::string& text) {
  try {
    parse_scenario(text, "case.ini");
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal = R"([scenario]
id = small
f0 = 50Hz

[ibrs]
a.kind = gfm
a.node = 1
a.L_f = 1.35mH
a.C_f = 50uF

[loads]
r1.node = 1
r1.R = 25ohm

[events]
0.2s load-step r1 10ohm

[sim]
t_end = 300ms
dt = 5us
)";

}  // namespace

TEST_CASE("quantities carry units") {
  CHECK(parse_quantity("1.35mH", Unit::Henry) == doctest::Approx(1.35e-3));
  CHECK(parse_quantity("50uF", Unit::Farad) == doctest::Approx(50e-6));
  CHECK(parse_quantity("50µF", Unit::Farad) == doctest::Approx(50e-6));
  CHECK(parse_quantity("0.35Ω", Unit::Ohm) == 0.35);
  CHECK(parse_quantity("0.35 ohm", Unit::Ohm) == 0.35);
  CHECK(parse_quantity("2.5kW", Unit::Watt) == 2500);
  CHECK(parse_quantity("5us", Unit::Second) == doctest::Approx(5e-6));
  CHECK(parse_quantity("390", Unit::None) == 390);
  CHECK_THROWS_AS(parse_quantity("1.35", Unit::Henry), Error);
  CHECK_THROWS_AS(parse_quantity("1.35mF", Unit::Henry), Error);
  CHECK_THROWS_AS(parse_quantity("3V", Unit::None), Error);
  CHECK_THROWS_AS(parse_quantity("abc", Unit::Volt), Error);
  for (double v : {1.35e-3, 0.1, 310.2695, 2.0 * kPi * 50.0, 0.0})
    CHECK(parse_quantity(format_quantity(v, Unit::Henry), Unit::Henry) == v);
}

TEST_CASE("a minimal file") {
  const Scenario s = parse_scenario(kMinimal, "case.ini");
  CHECK(s.id == "small");
  REQUIRE(s.ibrs.size() == 1);
  CHECK(s.ibrs[0].gfm.L_f == doctest::Approx(1.35e-3));
  CHECK(s.ibrs[0].gfm.K_iv == GfmParameters::benchmark().K_iv);
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].kind == EventKind::LoadStep);
  CHECK(s.events[0].value == 10.0);
  CHECK(s.sim.t_end == doctest::Approx(0.3));
  CHECK(parse_scenario(emit_scenario(s)) == s);
}

TEST_CASE("every built-in scenario survives a write and read") {
  for (const auto& id : builtin_scenario_ids()) {
    CAPTURE(id);
    const Scenario s = builtin_scenario(id);
    CHECK(parse_scenario(emit_scenario(s)) == s);
  }
}

TEST_CASE("diagnostics point at the offending line") {
  std::string text = kMinimal;
  text.replace(text.find("a.C_f = 50uF"), 12, "a.C_f = 50");
  CHECK(parse_error(text).rfind("case.ini:9:", 0) == 0);

  text = kMinimal;
  text.replace(text.find("a.C_f"), 5, "a.C_x");
  const std::string e = parse_error(text);
  CHECK(e.rfind("case.ini:9:", 0) == 0);
  CHECK(e.find("C_x") != std::string::npos);

  text = kMinimal;
  text.replace(text.find("load-step"), 9, "load-jump");
  CHECK(parse_error(text).rfind("case.ini:16:", 0) == 0);

  CHECK(parse_error(std::string(kMinimal) + "[extras]\n").rfind("case.ini:21:", 0) == 0);

  // an event aimed at an unknown load is a scenario error
  text = kMinimal;
  text.replace(text.find("load-step r1"), 12, "load-step r9");
  CHECK_FALSE(parse_error(text).empty());
}

TEST_CASE("resolving references") {
  CHECK(resolve_scenario("paper:2ibr-pei").id == "paper:2ibr-pei");
  CHECK(resolve_scenario("2ibr-pei").id == "paper:2ibr-pei");
  try {
    resolve_scenario("/nonexistent/file.ini");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}
