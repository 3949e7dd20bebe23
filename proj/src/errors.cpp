#include "gridpass/errors.hpp"

namespace gridpass {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::Topology: return "TopologyError";
    case ErrorKind::EmptyNetwork: return "EmptyNetwork";
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::UnstableDeviceModel: return "UnstableDeviceModel";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SetpointSingularity: return "SetpointSingularity";
    case ErrorKind::NumericFault: return "NumericFault";
    case ErrorKind::NumericBlowup: return "NumericBlowup";
    case ErrorKind::InfeasiblePolicy: return "InfeasiblePolicy";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorKind::NotSettled: return "NotSettled";
    case ErrorKind::Io: return "IoError";
  }
  return "Unknown";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace gridpass
