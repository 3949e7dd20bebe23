#pragma once

#include <string>
#include <vector>

#include "gridpass/scenario.hpp"

namespace gridpass {

// Ids accepted with or without the "paper:" prefix.
std::vector<std::string> builtin_scenario_ids();
bool is_builtin_scenario(const std::string& id);
Scenario builtin_scenario(const std::string& id);

// Interface settings published for the two-inverter study, one per inverter.
PeiConfig two_ibr_pei(int ibr, bool updated = false);
PeiConfig gfl_pei();
PeiConfig three_ibr_pei(int ibr);

}  // namespace gridpass
