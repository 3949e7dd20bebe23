#pragma once

#include <stdexcept>
#include <string>

namespace gridpass {

enum class ErrorKind {
  InvalidArgument,
  Parse,
  InvalidScenario,
  Topology,
  EmptyNetwork,
  NotHurwitz,
  UnstableDeviceModel,
  NoConvergence,
  SetpointSingularity,
  NumericFault,
  NumericBlowup,
  InfeasiblePolicy,
  LengthMismatch,
  WindowOutOfRange,
  NotSettled,
  Io,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so the C layer can map it
// onto a stable status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace gridpass
