#include "gridpass/units.hpp"

#include <charconv>
#include <cmath>
#include <cstring>

#include "gridpass/errors.hpp"

namespace gridpass {

namespace {

struct Prefix {
  const char* text;
  double factor;
};

// "µ" is two bytes in UTF-8, so prefixes are matched as strings.
constexpr Prefix kPrefixes[] = {{"p", 1e-12}, {"n", 1e-9}, {"u", 1e-6}, {"\xc2\xb5", 1e-6},
                                {"m", 1e-3},  {"k", 1e3},  {"M", 1e6},  {"G", 1e9}};

bool matches_unit(const std::string& s, Unit u) {
  switch (u) {
    case Unit::Ohm: return s == "ohm" || s == "Ohm" || s == "\xce\xa9";
    case Unit::Henry: return s == "H";
    case Unit::Farad: return s == "F";
    case Unit::Volt: return s == "V";
    case Unit::Ampere: return s == "A";
    case Unit::Watt: return s == "W";
    case Unit::Var: return s == "var" || s == "VAr";
    case Unit::Second: return s == "s";
    case Unit::Hertz: return s == "Hz";
    case Unit::RadPerSecond: return s == "rad/s";
    case Unit::Radian: return s == "rad";
    case Unit::None: return s.empty();
  }
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

const char* unit_symbol(Unit u) {
  switch (u) {
    case Unit::None: return "";
    case Unit::Ohm: return "ohm";
    case Unit::Henry: return "H";
    case Unit::Farad: return "F";
    case Unit::Volt: return "V";
    case Unit::Ampere: return "A";
    case Unit::Watt: return "W";
    case Unit::Var: return "var";
    case Unit::Second: return "s";
    case Unit::Hertz: return "Hz";
    case Unit::RadPerSecond: return "rad/s";
    case Unit::Radian: return "rad";
  }
  return "";
}

double parse_quantity(const std::string& text_in, Unit expected) {
  const std::string text = trim(text_in);
  if (text.empty()) fail(ErrorKind::Parse, "empty value");
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  const auto [end, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || end == first) fail(ErrorKind::Parse, "'" + text + "' does not start with a number");
  const std::string suffix = trim(std::string(end, last));

  if (expected == Unit::None) {
    if (!suffix.empty()) fail(ErrorKind::Parse, "'" + text + "' takes a plain number, found suffix '" + suffix + "'");
    return v;
  }
  if (suffix.empty())
    fail(ErrorKind::Parse, "'" + text + "' is missing its unit (expected " + unit_symbol(expected) + ")");
  if (matches_unit(suffix, expected)) return v;
  for (const auto& p : kPrefixes) {
    const size_t n = std::strlen(p.text);
    if (suffix.size() > n && suffix.compare(0, n, p.text) == 0 && matches_unit(suffix.substr(n), expected))
      return v * p.factor;
  }
  fail(ErrorKind::Parse, "'" + text + "' has unit '" + suffix + "', expected " + unit_symbol(expected));
}

std::string format_quantity(double value, Unit unit) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, end) + unit_symbol(unit);
}

}  // namespace gridpass
