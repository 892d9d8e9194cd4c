#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fruitscan {

enum class ErrorKind {
  Precondition,
  Decode,
  Format,
  Io,
  Infeasible,
  Range,
  SelectionFailed,
  EmptyRegion,
  Numeric,
  DegenerateTraining,
  Mismatch,
  Integrity,
  Version,
  Parse,
  InfeasibleSplit,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI,
// the Python bindings) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::Precondition, what);
}

}  // namespace fruitscan
