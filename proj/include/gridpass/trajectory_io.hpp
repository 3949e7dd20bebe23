#pragma once

#include <iosfwd>
#include <string>

#include "gridpass/simulator.hpp"

namespace gridpass {

enum class TrajectoryFormat { Csv, Binary };

// CSV: '#' metadata lines, a header "t,<channel>,...", one row per sample.
// Binary: "GPTRAJ01" magic, then counts, names and column-major doubles (little endian).
void write_trajectory(std::ostream& os, const Trajectory& traj, TrajectoryFormat format);
void write_trajectory(const std::string& path, const Trajectory& traj, TrajectoryFormat format);

// The format is detected from the first bytes.
Trajectory read_trajectory(std::istream& is);
Trajectory read_trajectory(const std::string& path);

}  // namespace gridpass
