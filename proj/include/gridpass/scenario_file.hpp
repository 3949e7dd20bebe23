#pragma once

#include <string>

#include "gridpass/scenario.hpp"

namespace gridpass {

// INI-like text with sections [scenario] [ibrs] [topology] [loads] [grid]
// [events] [pei] [sim]. Entities are keyed "<name>.<field> = <value>"; events
// are lines "<time> <kind> [<target>] [<value> [<value2>]]". Diagnostics carry
// "<source>:<line>:" and unknown keys are rejected.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");
Scenario load_scenario_file(const std::string& path);

// Text that parses back to an identical Scenario.
std::string emit_scenario(const Scenario& scenario);

// A built-in id ("paper:..." or a bare known id) or a file path.
Scenario resolve_scenario(const std::string& ref);

}  // namespace gridpass
