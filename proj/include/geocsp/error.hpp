#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geocsp {

/// Machine-readable error category. The CLI reports it as the `kind` field of
/// the error JSON it writes to stderr.
enum class ErrorKind {
  Range,
  MissingAssignment,
  Integrality,
  Degeneracy,
  Underdetermined,
  Unsolvable,
  Inconsistency,
  GenerationFailure,
  Dimension,
  Graph,
  TrainingAbort,
  Config,
  Io,
  Format,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace geocsp
