#pragma once

#include <string>

namespace gridpass {

// Base units understood by the scenario reader. Dimensionless values carry no
// suffix; everything else must name its unit, optionally with an SI prefix
// (p n u µ m k M G), e.g. "1.35mH", "50uF", "0.1ohm", "5us".
enum class Unit { None, Ohm, Henry, Farad, Volt, Ampere, Watt, Var, Second, Hertz, RadPerSecond, Radian };

const char* unit_symbol(Unit u);

// Throws Parse with a short reason (no location; callers add it).
double parse_quantity(const std::string& text, Unit expected);

// Shortest text that parses back to exactly the same double.
std::string format_quantity(double value, Unit unit);

}  // namespace gridpass
